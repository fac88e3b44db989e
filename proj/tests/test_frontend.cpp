#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rsed/frontend.hpp"
#include "rsed/stats.hpp"

using namespace rsed;

namespace {

Waveform sine(double freq_hz, double seconds, double amp = 0.5, int sr = 22050) {
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(static_cast<size_t>(seconds * sr));
  for (size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq_hz * i / sr));
  }
  return w;
}

TimeFrequencyMatrix energy_matrix(int frames, int bands, float value, double frame_rate) {
  TimeFrequencyMatrix m;
  m.n_frames = frames;
  m.n_bands = bands;
  m.frame_rate = frame_rate;
  m.kind = TfKind::Energy;
  m.values.assign(static_cast<size_t>(frames) * bands, value);
  return m;
}

}  // namespace

TEST_CASE("melspectrogram: zero waveform maps to zero energy") {
  Waveform w;
  w.samples.assign(22050, 0.0f);
  const auto m = melspectrogram(w, SpectrogramConfig{});
  for (float v : m.values) CHECK(v == 0.0f);
  CHECK(m.kind == TfKind::Energy);
}

TEST_CASE("melspectrogram: frame count and rate bookkeeping") {
  SpectrogramConfig cfg;
  Waveform w;
  w.samples.assign(22050, 0.0f);
  const auto m = melspectrogram(w, cfg);
  CHECK(m.n_frames == (22050 - 256) / 32 + 1);
  CHECK(m.n_bands == 128);
  CHECK(m.frame_rate * cfg.hop_length == cfg.sample_rate);  // exact: hop is a power of two
  CHECK(m.band_edges.size() == 130);
  CHECK(m.band_edges.front() == doctest::Approx(2000.0));
  CHECK(m.band_edges.back() == doctest::Approx(11025.0));
}

TEST_CASE("melspectrogram: sine at a band center peaks in that band (DFT oracle)") {
  SpectrogramConfig cfg;
  oracle::NaiveMel ref{cfg.sample_rate, cfg.win_length, cfg.hop_length, cfg.fft_length,
                       cfg.n_mels, cfg.fmin, cfg.fmax};
  for (int band : {20, 64, 100}) {
    const double f = mel_band_center(cfg, band);
    const Waveform w = sine(f, 0.2);
    const auto m = melspectrogram(w, cfg);

    // time-averaged energy per band from the implementation
    std::vector<double> mean(cfg.n_mels, 0.0);
    for (int t = 0; t < m.n_frames; ++t) {
      for (int b = 0; b < cfg.n_mels; ++b) mean[b] += m.at(t, b);
    }
    const int impl_argmax =
        static_cast<int>(std::max_element(mean.begin(), mean.end()) - mean.begin());

    // oracle: naive windowed DFT + first-principles filterbank on a few frames
    std::vector<double> omean(cfg.n_mels, 0.0);
    for (int t = 0; t < 8; ++t) {
      const auto bands = ref.band_energies_at_frame(w.samples, t);
      for (int b = 0; b < cfg.n_mels; ++b) omean[b] += bands[b];
    }
    const int oracle_argmax =
        static_cast<int>(std::max_element(omean.begin(), omean.end()) - omean.begin());

    CHECK(impl_argmax == band);
    CHECK(oracle_argmax == band);
  }
}

TEST_CASE("melspectrogram: matches the naive DFT oracle cell by cell") {
  SpectrogramConfig cfg;
  cfg.n_mels = 16;  // keep the naive oracle affordable
  std::mt19937_64 rng(5);
  std::normal_distribution<float> noise(0.0f, 0.3f);
  Waveform w;
  w.samples.resize(2048);
  for (auto& s : w.samples) s = noise(rng);

  const auto m = melspectrogram(w, cfg);
  oracle::NaiveMel ref{cfg.sample_rate, cfg.win_length, cfg.hop_length, cfg.fft_length,
                       cfg.n_mels, cfg.fmin, cfg.fmax};
  for (int t : {0, 7, 31}) {
    const auto bands = ref.band_energies_at_frame(w.samples, t);
    for (int b = 0; b < cfg.n_mels; ++b) {
      CHECK(m.at(t, b) == doctest::Approx(bands[b]).epsilon(1e-4));
    }
  }
}

TEST_CASE("melspectrogram: 2-homogeneous in amplitude") {
  std::mt19937_64 rng(9);
  std::normal_distribution<float> noise(0.0f, 0.2f);
  Waveform w;
  w.samples.resize(4096);
  for (auto& s : w.samples) s = noise(rng);
  Waveform w3 = w;
  for (auto& s : w3.samples) s *= 3.0f;

  const auto a = melspectrogram(w, SpectrogramConfig{});
  const auto b = melspectrogram(w3, SpectrogramConfig{});
  for (size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] > 1e-12) {
      CHECK(b.values[i] / a.values[i] == doctest::Approx(9.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("melspectrogram: error paths") {
  SpectrogramConfig cfg;
  Waveform shorty;
  shorty.samples.assign(100, 0.0f);
  CHECK_THROWS_WITH_AS(melspectrogram(shorty, cfg), "input too short", std::invalid_argument);

  Waveform nan_wave;
  nan_wave.samples.assign(1000, 0.0f);
  nan_wave.samples[500] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(melspectrogram(nan_wave, cfg), std::invalid_argument);

  Waveform wrong_rate;
  wrong_rate.samples.assign(1000, 0.0f);
  wrong_rate.sample_rate = 44100;
  CHECK_THROWS_AS(melspectrogram(wrong_rate, cfg), std::invalid_argument);
}

TEST_CASE("melspectrogram: threading does not change the result") {
  std::mt19937_64 rng(13);
  std::normal_distribution<float> noise(0.0f, 0.2f);
  Waveform w;
  w.samples.resize(22050);
  for (auto& s : w.samples) s = noise(rng);
  const auto a = melspectrogram(w, SpectrogramConfig{}, 1);
  const auto b = melspectrogram(w, SpectrogramConfig{}, 3);
  REQUIRE(a.values.size() == b.values.size());
  for (size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
}

TEST_CASE("logmelspec: floor, identity, and scale shift") {
  auto zero = energy_matrix(10, 4, 0.0f, 100.0);
  const auto lz = logmelspec(zero);
  CHECK(lz.kind == TfKind::LogMel);
  for (float v : lz.values) CHECK(v == doctest::Approx(-10.0));

  auto one = energy_matrix(10, 4, 1.0f, 100.0);
  for (float v : logmelspec(one).values) CHECK(v == doctest::Approx(4.34e-11).epsilon(0.01));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> unif(0.5f, 2.0f);
  auto e = energy_matrix(20, 8, 0.0f, 100.0);
  for (auto& v : e.values) v = unif(rng);
  auto e10 = e;
  for (auto& v : e10.values) v *= 10.0f;
  const auto a = logmelspec(e), b = logmelspec(e10);
  for (size_t i = 0; i < a.values.size(); ++i) {
    CHECK(b.values[i] - a.values[i] == doctest::Approx(1.0).epsilon(1e-5));
  }

  CHECK_THROWS_AS(logmelspec(lz), std::invalid_argument);
}

TEST_CASE("ema_smooth: constant input is a fixed point") {
  auto e = energy_matrix(200, 4, 2.5f, 689.0625);
  const auto m = ema_smooth(e, 0.060);
  for (float v : m.values) CHECK(v == doctest::Approx(2.5f));
}

TEST_CASE("ema_smooth: impulse response unrolls geometrically") {
  const double frame_rate = 22050.0 / 32.0;
  auto e = energy_matrix(50, 3, 0.0f, frame_rate);
  e.at(0, 1) = 1.0f;
  const auto m = ema_smooth(e, 0.060);
  const double s = 1.0 - std::exp(-(32.0 / 22050.0) / 0.060);
  CHECK(s == doctest::Approx(0.02390).epsilon(2e-3));  // closed-form coefficient
  for (int t = 0; t < 50; ++t) {
    CHECK(m.at(t, 1) == doctest::Approx(std::pow(1.0 - s, t)).epsilon(1e-5));
    CHECK(m.at(t, 0) == 0.0f);
  }
}

TEST_CASE("ema_smooth: output stays inside the per-band envelope") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> unif(0.0f, 5.0f);
  auto e = energy_matrix(300, 6, 0.0f, 689.0625);
  for (auto& v : e.values) v = unif(rng);
  const auto m = ema_smooth(e, 0.1);
  for (int f = 0; f < 6; ++f) {
    float lo = 1e30f, hi = -1e30f;
    for (int t = 0; t < 300; ++t) {
      lo = std::min(lo, e.at(t, f));
      hi = std::max(hi, e.at(t, f));
    }
    for (int t = 0; t < 300; ++t) {
      CHECK(m.at(t, f) >= lo - 1e-6f);
      CHECK(m.at(t, f) <= hi + 1e-6f);
    }
  }
}

TEST_CASE("pcen: zero in, zero out") {
  auto e = energy_matrix(100, 8, 0.0f, 689.0625);
  for (float v : pcen(e, pcen_outdoor()).values) CHECK(v == 0.0f);
}

TEST_CASE("pcen: constant input hits the closed-form steady state") {
  const PcenParams p = pcen_outdoor();
  auto e = energy_matrix(2000, 2, 1.0f, 689.0625);
  const auto out = pcen(e, p);
  const double expected =
      std::pow(1.0 / (p.eps + 1.0) + p.delta, p.root) - std::pow(p.delta, p.root);
  CHECK(expected == doctest::Approx(0.0429).epsilon(1e-3));
  const int burn_in = static_cast<int>(20 * p.smoother_seconds * 689.0625) + 1;
  for (int t = burn_in; t < 2000; ++t) {
    CHECK(out.at(t, 0) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("pcen: pure gain normalization in the alpha=1, delta=0, r=1 limit") {
  PcenParams p{0.060, 1.0, 0.0, 1.0, 1e-12};
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<float> unif(0.5f, 2.0f);
  auto e = energy_matrix(2000, 4, 0.0f, 689.0625);
  for (auto& v : e.values) v = unif(rng);
  auto e_gained = e;
  for (auto& v : e_gained.values) v *= 37.5f;

  const auto a = pcen(e, p);
  const auto b = pcen(e_gained, p);
  const int burn_in = static_cast<int>(20 * p.smoother_seconds * 689.0625) + 1;
  for (int t = burn_in; t < 2000; ++t) {
    for (int f = 0; f < 4; ++f) {
      CHECK(std::abs(a.at(t, f) - b.at(t, f)) < 1e-6);  // f32 storage noise floor
    }
  }

  // constant input in the same limit normalizes to 1
  auto c = energy_matrix(2000, 1, 3.7f, 689.0625);
  const auto out = pcen(c, p);
  CHECK(out.at(1999, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("pcen: strictly increasing in energy for a fixed smoother") {
  const PcenParams p = pcen_outdoor();
  auto m = energy_matrix(5, 3, 1.0f, 689.0625);
  auto e1 = energy_matrix(5, 3, 0.5f, 689.0625);
  auto e2 = energy_matrix(5, 3, 0.6f, 689.0625);
  const auto a = pcen_from_smoothed(e1, m, p);
  const auto b = pcen_from_smoothed(e2, m, p);
  for (size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] > a.values[i]);
}

TEST_CASE("pcen: streaming form matches the batch form") {
  const PcenParams p = pcen_outdoor();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<float> unif(0.0f, 3.0f);
  auto e = energy_matrix(500, 16, 0.0f, 689.0625);
  for (auto& v : e.values) v = unif(rng);
  const auto batch = pcen(e, p);

  PcenStreamer stream(p, 16, 689.0625);
  std::vector<float> frame(16);
  for (int t = 0; t < 500; ++t) {
    stream.process(e.frame(t), frame);
    for (int f = 0; f < 16; ++f) {
      CHECK(frame[f] == doctest::Approx(batch.at(t, f)).epsilon(1e-6));
    }
  }
}

TEST_CASE("distribution_stats: standard normal sample") {
  std::mt19937_64 rng(41);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  TimeFrequencyMatrix x = energy_matrix(10000, 100, 0.0f, 100.0);
  for (auto& v : x.values) v = normal(rng);
  const auto s = distribution_stats(x);
  CHECK(s.n == 1000000);
  CHECK(std::abs(s.mean) < 1e-9);
  CHECK(s.variance == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(s.skewness) < 0.01);
  CHECK(std::abs(s.excess_kurtosis) < 0.02);
  CHECK(std::abs(s.mode_location) <= 0.15);  // mode near 0, one bin wide

  std::int64_t total = 0;
  for (auto c : s.counts) total += c;
  CHECK(total == s.n);
}

TEST_CASE("distribution_stats: exponential magnitudes keep skewness 2") {
  std::mt19937_64 rng(43);
  std::exponential_distribution<double> expo(1.0);
  TimeFrequencyMatrix x = energy_matrix(10000, 100, 0.0f, 100.0);
  for (auto& v : x.values) v = static_cast<float>(expo(rng));
  const auto s = distribution_stats(x);
  CHECK(s.skewness == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("distribution_stats: constant input is degenerate") {
  auto x = energy_matrix(100, 10, 1.5f, 100.0);
  CHECK_THROWS_WITH_AS(distribution_stats(x), "degenerate distribution",
                       std::invalid_argument);
}

TEST_CASE("pooled_distribution_stats: shared standardization") {
  std::mt19937_64 rng(47);
  std::normal_distribution<float> n0(0.0f, 1.0f), n1(3.0f, 1.0f);
  auto a = energy_matrix(1000, 10, 0.0f, 100.0);
  auto b = energy_matrix(1000, 10, 0.0f, 100.0);
  for (auto& v : a.values) v = n0(rng);
  for (auto& v : b.values) v = n1(rng);
  const auto pooled = pooled_distribution_stats({&a, &b});
  REQUIRE(pooled.per_input.size() == 2);
  // under pooled standardization the two modes straddle zero
  CHECK(pooled.per_input[0].mode_location < -0.5);
  CHECK(pooled.per_input[1].mode_location > 0.5);
  CHECK(std::abs(pooled.pooled.mean) < 1e-9);
  CHECK(pooled.pooled.variance == doctest::Approx(1.0).epsilon(1e-9));
}
