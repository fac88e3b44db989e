#pragma once

#include <string>
#include <vector>

namespace rsed {

// Mono audio buffer. Integer PCM is normalized to [-1, 1) on load.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 22050;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads a mono WAV file (PCM 16/24-bit or IEEE float32).
// Stereo or other encodings are rejected.
Waveform read_wav(const std::string& path);

// Writes a mono IEEE float32 WAV file.
void write_wav(const std::string& path, const Waveform& w);

}  // namespace rsed
