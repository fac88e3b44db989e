#include "rsed/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>

#include "rsed/detector.hpp"

namespace rsed {

namespace {

// RBJ constant-skirt bandpass.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double z1 = 0.0, z2 = 0.0;

  Biquad(double f0, double q, int sr) {
    const double w = 2.0 * M_PI * f0 / sr;
    const double alpha = std::sin(w) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    b0 = alpha / a0;
    b1 = 0.0;
    b2 = -alpha / a0;
    a1 = -2.0 * std::cos(w) / a0;
    a2 = (1.0 - alpha) / a0;
  }

  double process(double x) {
    const double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    return y;
  }
};

// Complex-phasor oscillator, renormalized periodically.
struct Osc {
  std::complex<double> z, w;
  int n = 0;

  Osc(double freq_hz, double phase, int sr)
      : z(std::polar(1.0, phase)), w(std::polar(1.0, 2.0 * M_PI * freq_hz / sr)) {}

  double next() {
    const double v = z.imag();
    z *= w;
    if (++n == 4096) {
      z /= std::abs(z);
      n = 0;
    }
    return v;
  }
};

constexpr double kOctaveCenters[] = {125, 250, 500, 1000, 2000, 4000, 8000, 16000};
constexpr int kNumOctaves = 8;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2);
  return a;
}

}  // namespace

std::vector<SensorProfile> default_sensor_profiles() {
  // A continuum: insect band sweeps 2.2 -> 4.45 kHz, level and tilt stagger.
  std::vector<SensorProfile> out;
  for (int i = 0; i < 6; ++i) {
    SensorProfile p;
    p.id = std::string("unit") + std::to_string(i + 1);
    const double tilt = -0.5 + i * 0.2;  // dB per octave away from 1 kHz
    p.shape_gains.resize(kNumOctaves);
    for (int b = 0; b < kNumOctaves; ++b) {
      const double oct = std::log2(kOctaveCenters[b] / 1000.0);
      p.shape_gains[b] = std::pow(10.0, (tilt * oct - 1.0 * std::abs(oct)) / 20.0);
    }
    p.insect_center_hz = 2200.0 + 450.0 * i;
    p.insect_level_db = 4.0 + 2.0 * ((i * 7) % 5);
    p.spl0_db = -33.0 + 2.0 * i;
    p.decay_db = 8.0 + 1.0 * i;
    p.noise_seed = 101 + 13 * static_cast<std::uint64_t>(i);
    out.push_back(p);
  }
  return out;
}

Waveform synth_background(const SensorProfile& profile, double duration_seconds,
                          int sample_rate) {
  if (!(duration_seconds > 0)) throw std::invalid_argument("duration must be positive");
  const long n = static_cast<long>(std::llround(duration_seconds * sample_rate));
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);

  std::mt19937_64 rng(profile.noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Biquad> bank;
  std::vector<double> gains;
  for (int b = 0; b < kNumOctaves && b < static_cast<int>(profile.shape_gains.size()); ++b) {
    if (kOctaveCenters[b] < sample_rate / 2.0 * 0.9) {
      bank.emplace_back(kOctaveCenters[b], 1.0, sample_rate);
      gains.push_back(profile.shape_gains[b]);
    }
  }

  // insect chorus: detuned partials with slow amplitude modulation, plus the
  // second harmonic at half level
  const double insect_amp = std::pow(10.0, profile.insect_level_db / 20.0);
  std::vector<Osc> partials;
  std::vector<Osc> am;
  std::vector<double> partial_amp;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int h = 1; h <= 2; ++h) {
    for (int k = 0; k < 4; ++k) {
      const double detune = 1.0 + 0.02 * (unif(rng) - 0.5);
      const double f = profile.insect_center_hz * h * detune;
      partials.emplace_back(f, 2.0 * M_PI * unif(rng), sample_rate);
      am.emplace_back(8.0 + 6.0 * unif(rng), 2.0 * M_PI * unif(rng), sample_rate);
      partial_amp.push_back(insect_amp * (h == 1 ? 1.0 : 0.5) * (0.7 + 0.6 * unif(rng)) / 4.0);
    }
  }

  const double env0 = std::pow(10.0, profile.spl0_db / 20.0);
  const double env_step =
      std::pow(10.0, -profile.decay_db / 20.0 / static_cast<double>(n > 1 ? n - 1 : 1));
  double env = env0;
  for (long i = 0; i < n; ++i) {
    const double white = normal(rng);
    double bed = 0.02 * white;
    for (size_t b = 0; b < bank.size(); ++b) bed += gains[b] * bank[b].process(white);
    double insects = 0.0;
    for (size_t p = 0; p < partials.size(); ++p) {
      insects += partial_amp[p] * (0.65 + 0.35 * am[p].next()) * partials[p].next();
    }
    out.samples[i] = static_cast<float>(env * (bed + insects));
    env *= env_step;
  }
  return out;
}

Waveform synth_call(CallBand band, double duration_seconds, std::uint64_t seed, int sample_rate,
                    double lo_hz, double hi_hz) {
  if (lo_hz <= 0.0 || hi_hz <= 0.0) {
    lo_hz = band == CallBand::Low ? 2000.0 : 5000.0;
    hi_hz = band == CallBand::Low ? 5000.0 : 10000.0;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double margin = 0.15 * (hi_hz - lo_hz);
  const double f0 = lo_hz + margin + (hi_hz - lo_hz - 2 * margin) * unif(rng);
  const double f1 = lo_hz + margin + (hi_hz - lo_hz - 2 * margin) * unif(rng);

  const long n = static_cast<long>(std::llround(duration_seconds * sample_rate));
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (long i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double tau = t / duration_seconds;
    const double phase = 2.0 * M_PI * (f0 * t + 0.5 * (f1 - f0) * tau * t);
    const double win = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / std::max(1L, n - 1));
    out.samples[i] = static_cast<float>(win * std::sin(phase));
  }
  return out;
}

std::vector<SensorNight> synth_night(const NightSpec& spec) {
  if (spec.sensors.empty()) throw std::invalid_argument("no sensor profiles");
  if (spec.call_count < 0) throw std::invalid_argument("negative call count");

  std::vector<SensorNight> out;
  const double T = spec.duration_seconds;
  const int sr = spec.sample_rate;

  for (size_t si = 0; si < spec.sensors.size(); ++si) {
    const SensorProfile& profile = spec.sensors[si];
    SensorNight night;
    night.sensor_id = profile.id;
    night.audio = synth_background(profile, T, sr);
    night.reference.sensor_id = profile.id;

    std::mt19937_64 rng(mix_seed(spec.seed, 7919 * (si + 1)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // call centers from the increasing density profile, rejection-sampled
    // with a minimum gap
    const double margin = 0.2;
    const double w_max = 1.0 + std::max(0.0, spec.density_slope);
    std::vector<double> times;
    long attempts = 0;
    const long max_attempts = 20000L * std::max(1, spec.call_count);
    while (static_cast<int>(times.size()) < spec.call_count) {
      if (++attempts > max_attempts) {
        throw std::runtime_error("cannot place calls without overlap; reduce call_count");
      }
      const double t = margin + (T - 2 * margin) * unif(rng);
      const double w = 1.0 + spec.density_slope * (t / T);
      if (unif(rng) * w_max > w) continue;
      bool ok = true;
      for (double other : times) {
        if (std::abs(other - t) < spec.min_call_gap_seconds) {
          ok = false;
          break;
        }
      }
      if (ok) times.push_back(t);
    }
    std::sort(times.begin(), times.end());

    for (double t : times) {
      const bool low = unif(rng) < 0.5;
      const double dur = 0.05 + 0.10 * unif(rng);
      const std::uint64_t call_seed = rng();
      const double lo = low ? spec.band_low_lo_hz : spec.band_high_lo_hz;
      const double hi = low ? spec.band_low_hi_hz : spec.band_high_hi_hz;
      Waveform call =
          synth_call(low ? CallBand::Low : CallBand::High, dur, call_seed, sr, lo, hi);
      const double snr = spec.snr_min_db + (spec.snr_max_db - spec.snr_min_db) * unif(rng);

      // local background power around the call
      const long c0 = std::max(0L, static_cast<long>(std::llround((t - 0.25) * sr)));
      const long c1 = std::min(static_cast<long>(night.audio.samples.size()),
                               static_cast<long>(std::llround((t + 0.25) * sr)));
      double p_bg = 0.0;
      for (long i = c0; i < c1; ++i) {
        p_bg += static_cast<double>(night.audio.samples[i]) * night.audio.samples[i];
      }
      p_bg /= std::max(1L, c1 - c0);
      double p_call = 0.0;
      for (float s : call.samples) p_call += static_cast<double>(s) * s;
      p_call /= std::max<size_t>(1, call.samples.size());
      const double g =
          p_call > 0 ? std::sqrt(p_bg * std::pow(10.0, snr / 10.0) / p_call) : 0.0;

      const long start = std::llround((t - dur / 2.0) * sr);
      for (size_t i = 0; i < call.samples.size(); ++i) {
        const long j = start + static_cast<long>(i);
        if (j >= 0 && j < static_cast<long>(night.audio.samples.size())) {
          night.audio.samples[j] += static_cast<float>(g * call.samples[i]);
        }
      }

      Event ev;
      ev.time = t;
      ev.confidence = 1.0;
      // mean sweep frequency, for band-split analyses
      std::mt19937_64 peek(call_seed);
      std::uniform_real_distribution<double> u2(0.0, 1.0);
      const double m = 0.15 * (hi - lo);
      const double f0 = lo + m + (hi - lo - 2 * m) * u2(peek);
      const double f1 = lo + m + (hi - lo - 2 * m) * u2(peek);
      ev.freq_hz = 0.5 * (f0 + f1);
      night.reference.events.push_back(ev);
    }
    out.push_back(std::move(night));
  }
  return out;
}

SensorFeatures featurize_recording(const Waveform& w, const FrontendConfig& frontend,
                                   const ContextConfig& context, int n_threads,
                                   const std::string& sensor_id) {
  SensorFeatures f;
  f.sensor_id = sensor_id;
  f.duration_seconds = w.duration();
  const TimeFrequencyMatrix energy = melspectrogram(w, frontend.spectrogram, n_threads);
  f.compressed = compress(energy, frontend);
  f.context = summary_statistics(reduce_bands(f.compressed, context.reduce_group), context);
  return f;
}

std::vector<TrainExample> clips_from_reference(const SensorFeatures& features,
                                               const EventList& reference, int patch_frames,
                                               const ClipDatasetConfig& cfg) {
  const TimeFrequencyMatrix& m = features.compressed;
  std::vector<TrainExample> out;

  auto make_clip = [&](double t, int label, double freq) {
    TrainExample ex;
    const int start = static_cast<int>(std::lround(t * m.frame_rate)) - patch_frames / 2;
    ex.patch = extract_patch(m, start, patch_frames);
    const ContextSlice slice = context_at(features.context, t);
    ex.context = slice.values;
    ex.label = label;
    ex.sensor_id = features.sensor_id;
    ex.time = t;
    ex.freq_hz = freq;
    return ex;
  };

  for (const Event& e : reference.events) out.push_back(make_clip(e.time, 1, e.freq_hz));

  const double half_patch = 0.5 * patch_frames / m.frame_rate;
  const double lo = half_patch;
  const double hi = features.duration_seconds - half_patch;
  if (hi <= lo) throw std::invalid_argument("insufficient negative space: recording too short");

  std::vector<double> ref_times;
  for (const Event& e : reference.events) ref_times.push_back(e.time);

  std::mt19937_64 rng(mix_seed(cfg.seed, std::hash<std::string>{}(features.sensor_id)));
  std::uniform_real_distribution<double> unif(lo, hi);
  const long wanted = static_cast<long>(reference.size()) * cfg.negatives_per_positive;
  long attempts = 0;
  const long max_attempts = 10000L * std::max(1L, wanted);
  long placed = 0;
  while (placed < wanted) {
    if (++attempts > max_attempts) {
      throw std::runtime_error("insufficient negative space");
    }
    const double t = unif(rng);
    auto it = std::lower_bound(ref_times.begin(), ref_times.end(), t);
    double nearest = 1e300;
    if (it != ref_times.end()) nearest = std::min(nearest, std::abs(*it - t));
    if (it != ref_times.begin()) nearest = std::min(nearest, std::abs(*std::prev(it) - t));
    if (nearest < cfg.guard_seconds) continue;
    out.push_back(make_clip(t, 0, 0.0));
    placed++;
  }
  return out;
}

std::vector<TrainExample> build_clip_dataset(const std::vector<SensorNight>& nights,
                                             const FrontendConfig& frontend,
                                             const ContextConfig& context, int patch_frames,
                                             const ClipDatasetConfig& cfg, int n_threads) {
  std::vector<TrainExample> out;
  for (const SensorNight& night : nights) {
    const SensorFeatures f =
        featurize_recording(night.audio, frontend, context, n_threads, night.sensor_id);
    auto clips = clips_from_reference(f, night.reference, patch_frames, cfg);
    out.insert(out.end(), std::make_move_iterator(clips.begin()),
               std::make_move_iterator(clips.end()));
  }
  return out;
}

}  // namespace rsed
