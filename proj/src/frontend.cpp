#include "rsed/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <thread>

#include "rsed/fft.hpp"

namespace rsed {

std::string tf_kind_name(TfKind k) {
  switch (k) {
    case TfKind::Energy: return "energy";
    case TfKind::LogMel: return "logmel";
    case TfKind::Pcen: return "pcen";
  }
  return "?";
}

TfKind parse_tf_kind(const std::string& name) {
  if (name == "energy") return TfKind::Energy;
  if (name == "logmel") return TfKind::LogMel;
  if (name == "pcen") return TfKind::Pcen;
  throw std::invalid_argument("unknown time-frequency kind: " + name);
}

std::string frontend_kind_name(FrontendKind k) {
  return k == FrontendKind::LogMel ? "logmelspec" : "pcen";
}

FrontendKind parse_frontend_kind(const std::string& name) {
  if (name == "logmelspec" || name == "logmel") return FrontendKind::LogMel;
  if (name == "pcen") return FrontendKind::Pcen;
  throw std::invalid_argument("unknown frontend kind: " + name);
}

void SpectrogramConfig::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  if (win_length <= 0 || hop_length <= 0) throw std::invalid_argument("bad framing");
  if (fft_length < win_length) throw std::invalid_argument("fft_length < win_length");
  if (n_mels < 2) throw std::invalid_argument("n_mels must be at least 2");
  if (!(fmin > 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw std::invalid_argument("mel range must satisfy 0 < fmin < fmax <= Nyquist");
  }
}

void PcenParams::validate() const {
  if (!(smoother_seconds > 0)) throw std::invalid_argument("smoother support must be positive");
  if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (!(delta >= 0)) throw std::invalid_argument("delta must be nonnegative");
  if (!(root > 0 && root <= 1)) throw std::invalid_argument("root must be in (0, 1]");
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
}

PcenParams pcen_outdoor() { return {0.060, 0.8, 10.0, 0.25, 1e-6}; }
PcenParams pcen_indoor() { return {0.400, 0.98, 2.0, 0.5, 1e-6}; }

float tf_pad_value(TfKind kind) {
  switch (kind) {
    case TfKind::Energy: return 0.0f;
    case TfKind::Pcen: return 0.0f;  // (0/den + d)^r - d^r
    case TfKind::LogMel: return static_cast<float>(std::log10(kLogEps));
  }
  return 0.0f;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filterbank with Slaney area normalization. filters[b] holds
// (first_bin, weights).
struct MelFilterbank {
  std::vector<int> first_bin;
  std::vector<std::vector<double>> weights;
};

MelFilterbank build_filterbank(const SpectrogramConfig& cfg, const std::vector<double>& edges) {
  const int n_bins = cfg.fft_length / 2 + 1;
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.fft_length;
  MelFilterbank fb;
  fb.first_bin.resize(cfg.n_mels);
  fb.weights.resize(cfg.n_mels);
  for (int b = 0; b < cfg.n_mels; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    const double norm = 2.0 / (hi - lo);
    int k0 = std::max(0, static_cast<int>(std::ceil(lo / bin_hz)));
    int k1 = std::min(n_bins - 1, static_cast<int>(std::floor(hi / bin_hz)));
    std::vector<double> w;
    int first = k0;
    for (int k = k0; k <= k1; ++k) {
      const double f = k * bin_hz;
      double v = 0.0;
      if (f >= lo && f <= mid && mid > lo) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f <= hi && hi > mid) {
        v = (hi - f) / (hi - mid);
      }
      w.push_back(v * norm);
    }
    fb.first_bin[b] = first;
    fb.weights[b] = std::move(w);
  }
  return fb;
}

}  // namespace

std::vector<double> mel_frequencies(const SpectrogramConfig& cfg) {
  const double m_lo = hz_to_mel(cfg.fmin);
  const double m_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * i / (cfg.n_mels + 1));
  }
  return edges;
}

double mel_band_center(const SpectrogramConfig& cfg, int band) {
  return mel_frequencies(cfg)[band + 1];
}

TimeFrequencyMatrix melspectrogram(const Waveform& w, const SpectrogramConfig& cfg,
                                   int n_threads) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate) {
    throw std::invalid_argument("sample rate mismatch: waveform has " +
                                std::to_string(w.sample_rate) + " Hz, config expects " +
                                std::to_string(cfg.sample_rate) + " Hz");
  }
  const long len = static_cast<long>(w.samples.size());
  if (len < cfg.win_length) throw std::invalid_argument("input too short");
  for (float s : w.samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite sample in waveform");
  }

  const int n_frames = static_cast<int>((len - cfg.win_length) / cfg.hop_length) + 1;
  const std::vector<double> edges = mel_frequencies(cfg);
  const MelFilterbank fb = build_filterbank(cfg, edges);

  std::vector<double> window(cfg.win_length);
  for (int i = 0; i < cfg.win_length; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.win_length);
  }

  TimeFrequencyMatrix out;
  out.n_frames = n_frames;
  out.n_bands = cfg.n_mels;
  out.frame_rate = cfg.frame_rate();
  out.band_edges = edges;
  out.kind = TfKind::Energy;
  out.values.resize(static_cast<size_t>(n_frames) * cfg.n_mels);

  RealFft fft(cfg.fft_length);
  const int n_bins = fft.n_bins();

  auto run = [&](int t0, int t1) {
    std::vector<double> frame(cfg.fft_length, 0.0);
    std::vector<std::complex<double>> spec(n_bins);
    std::vector<double> power(n_bins);
    for (int t = t0; t < t1; ++t) {
      const float* src = w.samples.data() + static_cast<size_t>(t) * cfg.hop_length;
      for (int i = 0; i < cfg.win_length; ++i) frame[i] = src[i] * window[i];
      std::fill(frame.begin() + cfg.win_length, frame.end(), 0.0);
      fft.forward(frame.data(), spec.data());
      for (int k = 0; k < n_bins; ++k) power[k] = std::norm(spec[k]);
      float* dst = out.values.data() + static_cast<size_t>(t) * cfg.n_mels;
      for (int b = 0; b < cfg.n_mels; ++b) {
        double acc = 0.0;
        const auto& wt = fb.weights[b];
        const int k0 = fb.first_bin[b];
        for (size_t j = 0; j < wt.size(); ++j) acc += wt[j] * power[k0 + j];
        dst[b] = static_cast<float>(acc);
      }
    }
  };

  n_threads = std::max(1, n_threads);
  if (n_threads == 1 || n_frames < 4 * n_threads) {
    run(0, n_frames);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n_frames + n_threads - 1) / n_threads;
    for (int i = 0; i < n_threads; ++i) {
      int t0 = i * chunk, t1 = std::min(n_frames, t0 + chunk);
      if (t0 >= t1) break;
      pool.emplace_back(run, t0, t1);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

TimeFrequencyMatrix logmelspec(const TimeFrequencyMatrix& energy) {
  if (energy.kind != TfKind::Energy) {
    throw std::invalid_argument("logmelspec expects an energy matrix");
  }
  TimeFrequencyMatrix out = energy;
  out.kind = TfKind::LogMel;
  for (auto& v : out.values) v = static_cast<float>(std::log10(v + kLogEps));
  return out;
}

TimeFrequencyMatrix ema_smooth(const TimeFrequencyMatrix& energy, double t_seconds) {
  if (energy.kind != TfKind::Energy) {
    throw std::invalid_argument("ema_smooth expects an energy matrix");
  }
  if (!(t_seconds > 0)) throw std::invalid_argument("smoother support must be positive");
  TimeFrequencyMatrix out = energy;
  if (energy.n_frames == 0) return out;
  const double s = 1.0 - std::exp(-1.0 / (energy.frame_rate * t_seconds));
  const int nb = energy.n_bands;
  std::vector<double> state(energy.frame(0).begin(), energy.frame(0).end());
  for (int t = 1; t < energy.n_frames; ++t) {
    const float* src = energy.values.data() + static_cast<size_t>(t) * nb;
    float* dst = out.values.data() + static_cast<size_t>(t) * nb;
    for (int f = 0; f < nb; ++f) {
      state[f] += s * (src[f] - state[f]);
      dst[f] = static_cast<float>(state[f]);
    }
  }
  return out;
}

TimeFrequencyMatrix pcen_from_smoothed(const TimeFrequencyMatrix& energy,
                                       const TimeFrequencyMatrix& smoothed,
                                       const PcenParams& p) {
  if (energy.kind != TfKind::Energy) {
    throw std::invalid_argument("pcen expects an energy matrix");
  }
  if (smoothed.values.size() != energy.values.size()) {
    throw std::invalid_argument("smoother shape mismatch");
  }
  p.validate();
  TimeFrequencyMatrix out = energy;
  out.kind = TfKind::Pcen;
  const double dr = std::pow(p.delta, p.root);
  const size_t n = energy.values.size();
  for (size_t i = 0; i < n; ++i) {
    const double e = energy.values[i];
    const double m = smoothed.values[i];
    const double gain = e / (p.eps + std::pow(m, p.alpha));
    out.values[i] = static_cast<float>(std::pow(gain + p.delta, p.root) - dr);
  }
  return out;
}

TimeFrequencyMatrix pcen(const TimeFrequencyMatrix& energy, const PcenParams& p) {
  p.validate();
  return pcen_from_smoothed(energy, ema_smooth(energy, p.smoother_seconds), p);
}

TimeFrequencyMatrix compress(const TimeFrequencyMatrix& energy, const FrontendConfig& cfg) {
  return cfg.kind == FrontendKind::Pcen ? pcen(energy, cfg.pcen) : logmelspec(energy);
}

PcenStreamer::PcenStreamer(const PcenParams& p, int n_bands, double frame_rate)
    : params_(p), state_(n_bands, 0.0) {
  p.validate();
  if (n_bands <= 0 || frame_rate <= 0) throw std::invalid_argument("bad streamer shape");
  smooth_coeff_ = 1.0 - std::exp(-1.0 / (frame_rate * p.smoother_seconds));
}

void PcenStreamer::reset() {
  std::fill(state_.begin(), state_.end(), 0.0);
  primed_ = false;
}

void PcenStreamer::process(std::span<const float> energy_frame, std::span<float> out) {
  if (energy_frame.size() != state_.size() || out.size() != state_.size()) {
    throw std::invalid_argument("frame size mismatch");
  }
  const double dr = std::pow(params_.delta, params_.root);
  for (size_t f = 0; f < state_.size(); ++f) {
    const double e = energy_frame[f];
    if (!primed_) {
      state_[f] = e;
    } else {
      state_[f] += smooth_coeff_ * (e - state_[f]);
    }
    const double gain = e / (params_.eps + std::pow(state_[f], params_.alpha));
    out[f] = static_cast<float>(std::pow(gain + params_.delta, params_.root) - dr);
  }
  primed_ = true;
}

}  // namespace rsed
