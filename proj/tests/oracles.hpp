#pragma once

// Independent reference implementations used only by tests. Everything here
// is deliberately naive: direct DFT sums, quadruple-loop convolutions,
// exhaustive matchings. They must not share code with the library paths they
// check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

// Direct DFT power at one analysis frequency over the whole signal.
inline double goertzel_power(const std::vector<float>& x, double freq_hz, int sample_rate) {
  std::complex<double> acc(0.0, 0.0);
  const double w = -2.0 * M_PI * freq_hz / sample_rate;
  for (size_t n = 0; n < x.size(); ++n) {
    acc += static_cast<double>(x[n]) * std::exp(std::complex<double>(0.0, w * n));
  }
  return std::norm(acc);
}

// Dominant frequency by scanning a grid of direct DFT probes.
inline double dominant_frequency(const std::vector<float>& x, int sample_rate, double lo_hz,
                                 double hi_hz, double step_hz = 1.0) {
  double best_f = lo_hz, best_p = -1.0;
  for (double f = lo_hz; f <= hi_hz; f += step_hz) {
    const double p = goertzel_power(x, f, sample_rate);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  return best_f;
}

// Fraction of spectral energy inside [lo, hi], on a fine direct-DFT grid.
inline double band_energy_fraction(const std::vector<float>& x, int sample_rate, double lo_hz,
                                   double hi_hz, double step_hz = 20.0) {
  double inside = 0.0, total = 0.0;
  for (double f = step_hz / 2; f < sample_rate / 2.0; f += step_hz) {
    const double p = goertzel_power(x, f, sample_rate);
    total += p;
    if (f >= lo_hz && f <= hi_hz) inside += p;
  }
  return total > 0 ? inside / total : 0.0;
}

inline double rms(const std::vector<float>& x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return x.empty() ? 0.0 : std::sqrt(acc / x.size());
}

inline double mean_square(const std::vector<float>& x) {
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return x.empty() ? 0.0 : acc / x.size();
}

// Naive per-frame mel energy: windowed direct DFT then triangle weights,
// built from first principles (HTK mel scale, Slaney area norm).
struct NaiveMel {
  int sample_rate, win, hop, nfft, n_mels;
  double fmin, fmax;

  static double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
  static double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

  std::vector<double> band_energies_at_frame(const std::vector<float>& x, int frame) const {
    std::vector<double> windowed(nfft, 0.0);
    for (int i = 0; i < win; ++i) {
      const double h = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);
      windowed[i] = x[frame * hop + i] * h;
    }
    const int bins = nfft / 2 + 1;
    std::vector<double> power(bins, 0.0);
    for (int k = 0; k < bins; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (int n = 0; n < nfft; ++n) {
        acc += windowed[n] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * n / nfft));
      }
      power[k] = std::norm(acc);
    }
    std::vector<double> edges(n_mels + 2);
    const double m0 = hz_to_mel(fmin), m1 = hz_to_mel(fmax);
    for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(m0 + (m1 - m0) * i / (n_mels + 1));
    std::vector<double> out(n_mels, 0.0);
    for (int b = 0; b < n_mels; ++b) {
      for (int k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / nfft;
        double w = 0.0;
        if (f >= edges[b] && f <= edges[b + 1]) {
          w = (f - edges[b]) / (edges[b + 1] - edges[b]);
        } else if (f > edges[b + 1] && f <= edges[b + 2]) {
          w = (edges[b + 2] - f) / (edges[b + 2] - edges[b + 1]);
        }
        out[b] += w * 2.0 / (edges[b + 2] - edges[b]) * power[k];
      }
    }
    return out;
  }
};

// Exhaustive maximum bipartite matching by recursion over the left side.
inline int brute_force_matching(const std::vector<std::vector<int>>& adj, int n_right) {
  const int n_left = static_cast<int>(adj.size());
  std::vector<bool> used(n_right, false);
  std::function<int(int)> go = [&](int u) -> int {
    if (u == n_left) return 0;
    int best = go(u + 1);  // leave u unmatched
    for (int v : adj[u]) {
      if (!used[v]) {
        used[v] = true;
        best = std::max(best, 1 + go(u + 1));
        used[v] = false;
      }
    }
    return best;
  };
  return go(0);
}

// Strict local maxima above a threshold; independent of the library rule
// except for sharing the obvious definition.
inline std::vector<int> naive_peaks(const std::vector<float>& v, double tau) {
  std::vector<int> out;
  for (size_t i = 0; i < v.size(); ++i) {
    const double left = i > 0 ? v[i - 1] : -1e300;
    const double right = i + 1 < v.size() ? v[i + 1] : -1e300;
    if (v[i] > left && v[i] > right && v[i] > tau) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace oracle
