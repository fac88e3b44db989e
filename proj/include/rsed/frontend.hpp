#pragma once

#include <span>
#include <string>
#include <vector>

#include "rsed/audio.hpp"

namespace rsed {

enum class TfKind { Energy, LogMel, Pcen };

std::string tf_kind_name(TfKind k);
TfKind parse_tf_kind(const std::string& name);

struct SpectrogramConfig {
  int sample_rate = 22050;
  int win_length = 256;
  int hop_length = 32;
  int fft_length = 1024;
  int n_mels = 128;
  double fmin = 2000.0;
  double fmax = 11025.0;

  double frame_rate() const { return static_cast<double>(sample_rate) / hop_length; }
  void validate() const;
};

// Frame-major time-frequency matrix. Values are stored as f32; all math
// upstream runs in f64.
struct TimeFrequencyMatrix {
  std::vector<float> values;
  int n_frames = 0;
  int n_bands = 0;
  double frame_rate = 0.0;
  std::vector<double> band_edges;  // mel-spaced grid in Hz, n_bands + 2 points
  TfKind kind = TfKind::Energy;

  float& at(int t, int f) { return values[static_cast<size_t>(t) * n_bands + f]; }
  float at(int t, int f) const { return values[static_cast<size_t>(t) * n_bands + f]; }
  std::span<const float> frame(int t) const {
    return {values.data() + static_cast<size_t>(t) * n_bands, static_cast<size_t>(n_bands)};
  }
};

struct PcenParams {
  double smoother_seconds = 0.060;  // T, support of the low-pass smoother
  double alpha = 0.8;
  double delta = 10.0;
  double root = 0.25;  // r
  double eps = 1e-6;

  void validate() const;
};

// Presets: field recordings with distant sources vs. close-talk indoor audio.
PcenParams pcen_outdoor();
PcenParams pcen_indoor();

enum class FrontendKind { LogMel, Pcen };
std::string frontend_kind_name(FrontendKind k);
FrontendKind parse_frontend_kind(const std::string& name);

struct FrontendConfig {
  FrontendKind kind = FrontendKind::Pcen;
  SpectrogramConfig spectrogram;
  PcenParams pcen = pcen_outdoor();
};

// log10 floor, -100 dB.
inline constexpr double kLogEps = 1e-10;

// Fill value used when patches extend past the matrix bounds. Matches
// compressing a zero-energy cell.
float tf_pad_value(TfKind kind);

// Mel-spaced frequency grid in Hz (n_mels + 2 points between fmin and fmax).
std::vector<double> mel_frequencies(const SpectrogramConfig& cfg);

// Center frequency (triangle apex) of one mel band.
double mel_band_center(const SpectrogramConfig& cfg, int band);

// Power mel spectrogram with Hann-windowed, non-centered framing: frames start
// at sample 0 and advance by hop_length. Frame count is
// floor((len - win) / hop) + 1.
TimeFrequencyMatrix melspectrogram(const Waveform& w, const SpectrogramConfig& cfg,
                                   int n_threads = 1);

TimeFrequencyMatrix logmelspec(const TimeFrequencyMatrix& energy);

// Per-band exponential moving average with s = 1 - exp(-hop_dur / t_seconds),
// initialized from the first frame.
TimeFrequencyMatrix ema_smooth(const TimeFrequencyMatrix& energy, double t_seconds);

TimeFrequencyMatrix pcen(const TimeFrequencyMatrix& energy, const PcenParams& p);

// PCEN with an externally supplied smoother matrix (same shape as energy).
TimeFrequencyMatrix pcen_from_smoothed(const TimeFrequencyMatrix& energy,
                                       const TimeFrequencyMatrix& smoothed,
                                       const PcenParams& p);

// Applies the compression stage selected by cfg.kind.
TimeFrequencyMatrix compress(const TimeFrequencyMatrix& energy, const FrontendConfig& cfg);

// Streaming PCEN. Per-instance smoother state; one consumer at a time.
class PcenStreamer {
 public:
  PcenStreamer(const PcenParams& p, int n_bands, double frame_rate);

  // Consumes one energy frame, writes one normalized frame.
  void process(std::span<const float> energy_frame, std::span<float> out);
  void reset();

 private:
  PcenParams params_;
  double smooth_coeff_;
  std::vector<double> state_;
  bool primed_ = false;
};

}  // namespace rsed
