#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rsed/audio.hpp"

namespace rsed {

// Playback-speed resampling by a windowed-sinc kernel: output length is
// round(len / ratio) and frequencies scale by ratio.
Waveform resample(const Waveform& w, double ratio);

// Shifts pitch while preserving duration (resample then stretch back).
Waveform pitch_shift(const Waveform& w, double semitones);

// Phase-vocoder stretch: output length is about len / rate, pitch preserved.
Waveform time_stretch(const Waveform& w, double rate);

// clip + g * noise excerpt, with g set so the clip-to-noise power ratio hits
// snr_db. The excerpt offset is drawn from rng.
Waveform mix_noise(const Waveform& clip, const Waveform& noise, double snr_db,
                   std::mt19937_64& rng);

struct AugmentationSpec {
  int n_pitch = 4;
  double pitch_min = -1.0, pitch_max = 1.0;  // semitones
  int n_stretch = 4;
  double stretch_min = 0.8, stretch_max = 1.25;  // rate
  int n_noise = 4;  // per noise source
  double snr_min = 0.0, snr_max = 30.0;  // dB
  std::uint64_t seed = 0;
};

struct NoiseSource {
  std::string id;
  Waveform audio;
  std::string subset;  // train/validation tag, checked by callers
};

struct AugmentedClip {
  Waveform audio;
  std::string effect;     // "pitch_shift", "time_stretch", "mix_noise"
  double parameter = 0.0; // semitones, rate, or snr dB
  std::string noise_id;   // empty unless mix_noise
  std::uint64_t seed = 0;
};

// One effect per variant, never combined: n_pitch pitch shifts, n_stretch
// stretches, and n_noise mixtures per pool source. Deterministic per seed.
std::vector<AugmentedClip> augment_set(const Waveform& clip, const AugmentationSpec& spec,
                                       const std::vector<NoiseSource>& pool);

// Writes <stem>.wav plus a <stem>.json provenance sidecar (source clip id,
// effect, parameter, noise source, seed). Returns the WAV path.
std::string save_augmented_clip(const std::string& dir, const std::string& stem,
                                const AugmentedClip& clip, const std::string& source_id);

}  // namespace rsed
