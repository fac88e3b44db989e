#include "rsed/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "rsed/fft.hpp"

namespace rsed {

namespace {

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

double mean_square(const std::vector<float>& v, size_t from, size_t len) {
  double acc = 0.0;
  for (size_t i = from; i < from + len; ++i) acc += static_cast<double>(v[i]) * v[i];
  return len > 0 ? acc / len : 0.0;
}

}  // namespace

Waveform resample(const Waveform& w, double ratio) {
  if (!(ratio >= 0.25 && ratio <= 4.0)) {
    throw std::invalid_argument("resample ratio out of [0.25, 4]");
  }
  const long len = static_cast<long>(w.samples.size());
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(static_cast<size_t>(std::llround(len / ratio)));

  // Anti-alias cutoff when speeding up; 32 zero crossings, Hann window.
  const double scale = std::min(1.0, 1.0 / ratio);
  const double half_width = 32.0 / scale;
  for (size_t i = 0; i < out.samples.size(); ++i) {
    const double t = i * ratio;
    const long j0 = std::max(0L, static_cast<long>(std::ceil(t - half_width)));
    const long j1 = std::min(len - 1, static_cast<long>(std::floor(t + half_width)));
    double acc = 0.0;
    for (long j = j0; j <= j1; ++j) {
      const double u = j - t;
      const double win = 0.5 + 0.5 * std::cos(M_PI * u / half_width);
      acc += w.samples[j] * scale * sinc(scale * u) * win;
    }
    out.samples[i] = static_cast<float>(acc);
  }
  return out;
}

Waveform time_stretch(const Waveform& w, double rate) {
  if (!(rate >= 0.5 && rate <= 2.0)) throw std::invalid_argument("rate out of [0.5, 2]");
  const int win = 1024;
  const int hs = 256;  // synthesis hop
  const int ha = std::max(1, static_cast<int>(std::lround(hs * rate)));
  const long len = static_cast<long>(w.samples.size());

  // pad both ends so every output sample is covered by full frames
  std::vector<double> x(len + 2 * win + ha, 0.0);
  for (long i = 0; i < len; ++i) x[win + i] = w.samples[i];

  RealFft fft(win);
  const int bins = fft.n_bins();
  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  const int n_frames = static_cast<int>((x.size() - win) / ha) + 1;
  const long out_len = static_cast<long>(n_frames - 1) * hs + win;
  std::vector<double> acc(out_len, 0.0), norm(out_len, 0.0);

  std::vector<double> frame(win), synth(win);
  std::vector<std::complex<double>> spec(bins);
  std::vector<double> prev_phase(bins, 0.0), syn_phase(bins, 0.0);

  for (int u = 0; u < n_frames; ++u) {
    const long off = static_cast<long>(u) * ha;
    for (int i = 0; i < win; ++i) frame[i] = x[off + i] * window[i];
    fft.forward(frame.data(), spec.data());

    for (int k = 0; k < bins; ++k) {
      const double mag = std::abs(spec[k]);
      const double phase = std::arg(spec[k]);
      if (u == 0) {
        syn_phase[k] = phase;
      } else {
        const double expected = 2.0 * M_PI * k * ha / win;
        double delta = phase - prev_phase[k] - expected;
        delta -= 2.0 * M_PI * std::round(delta / (2.0 * M_PI));
        const double inst = (expected + delta) / ha;  // radians per sample
        syn_phase[k] += inst * hs;
      }
      prev_phase[k] = phase;
      spec[k] = std::polar(mag, syn_phase[k]);
    }
    fft.inverse(spec.data(), synth.data());
    const long out_off = static_cast<long>(u) * hs;
    for (int i = 0; i < win; ++i) {
      acc[out_off + i] += synth[i] * window[i];
      norm[out_off + i] += window[i] * window[i];
    }
  }

  const long target = std::llround(len * static_cast<double>(hs) / ha);
  const long trim = std::llround(win * static_cast<double>(hs) / ha);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(target, 0.0f);
  for (long i = 0; i < target; ++i) {
    const long j = trim + i;
    if (j >= 0 && j < out_len && norm[j] > 1e-8) {
      out.samples[i] = static_cast<float>(acc[j] / norm[j]);
    }
  }
  return out;
}

Waveform pitch_shift(const Waveform& w, double semitones) {
  if (std::abs(semitones) > 12.0) {
    throw std::invalid_argument("pitch shift limited to one octave");
  }
  const double ratio = std::pow(2.0, semitones / 12.0);
  Waveform shifted = resample(w, ratio);
  if (shifted.samples.empty() || w.samples.empty()) return shifted;
  const double rate =
      static_cast<double>(shifted.samples.size()) / static_cast<double>(w.samples.size());
  return time_stretch(shifted, std::clamp(rate, 0.5, 2.0));
}

Waveform mix_noise(const Waveform& clip, const Waveform& noise, double snr_db,
                   std::mt19937_64& rng) {
  if (noise.samples.size() < clip.samples.size()) {
    throw std::invalid_argument("noise shorter than clip");
  }
  if (noise.sample_rate != clip.sample_rate) {
    throw std::invalid_argument("sample rate mismatch between clip and noise");
  }
  const double p_clip = mean_square(clip.samples, 0, clip.samples.size());
  if (p_clip <= 0.0) throw std::invalid_argument("undefined SNR: silent clip");

  const size_t span = noise.samples.size() - clip.samples.size();
  size_t offset = 0;
  if (span > 0) {
    std::uniform_int_distribution<size_t> dist(0, span);
    offset = dist(rng);
  }
  const double p_noise = mean_square(noise.samples, offset, clip.samples.size());
  snr_db = std::min(snr_db, 120.0);
  double g = 0.0;
  if (p_noise > 0.0) g = std::sqrt(p_clip / (p_noise * std::pow(10.0, snr_db / 10.0)));

  Waveform out = clip;
  for (size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] += static_cast<float>(g * noise.samples[offset + i]);
  }
  return out;
}

std::vector<AugmentedClip> augment_set(const Waveform& clip, const AugmentationSpec& spec,
                                       const std::vector<NoiseSource>& pool) {
  if (spec.n_pitch < 0 || spec.n_stretch < 0 || spec.n_noise < 0) {
    throw std::invalid_argument("augmentation counts must be nonnegative");
  }
  if (spec.n_noise > 0 && pool.empty()) {
    throw std::invalid_argument("noise augmentation requested with an empty pool");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<AugmentedClip> out;

  std::uniform_real_distribution<double> pitch_dist(spec.pitch_min, spec.pitch_max);
  for (int i = 0; i < spec.n_pitch; ++i) {
    const double s = pitch_dist(rng);
    out.push_back({pitch_shift(clip, s), "pitch_shift", s, "", spec.seed});
  }
  std::uniform_real_distribution<double> rate_dist(spec.stretch_min, spec.stretch_max);
  for (int i = 0; i < spec.n_stretch; ++i) {
    const double r = rate_dist(rng);
    out.push_back({time_stretch(clip, r), "time_stretch", r, "", spec.seed});
  }
  std::uniform_real_distribution<double> snr_dist(spec.snr_min, spec.snr_max);
  for (const NoiseSource& src : pool) {
    for (int i = 0; i < spec.n_noise; ++i) {
      const double snr = snr_dist(rng);
      out.push_back({mix_noise(clip, src.audio, snr, rng), "mix_noise", snr, src.id, spec.seed});
    }
  }
  return out;
}

std::string save_augmented_clip(const std::string& dir, const std::string& stem,
                                const AugmentedClip& clip, const std::string& source_id) {
  std::filesystem::create_directories(dir);
  const std::string wav_path = (std::filesystem::path(dir) / (stem + ".wav")).string();
  write_wav(wav_path, clip.audio);
  nlohmann::json sidecar = {{"source_clip", source_id},
                            {"effect", clip.effect},
                            {"parameter", clip.parameter},
                            {"noise_source", clip.noise_id},
                            {"seed", clip.seed}};
  std::ofstream out((std::filesystem::path(dir) / (stem + ".json")).string());
  if (!out) throw std::runtime_error("cannot write sidecar for " + stem);
  out << sidecar.dump(2) << "\n";
  return wav_path;
}

}  // namespace rsed
