#include "rsed/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsed {

namespace {

constexpr int kBins = 80;
constexpr double kLo = -4.0, kHi = 4.0;

struct Accum {
  double sum = 0, sum2 = 0;
  std::int64_t n = 0;
};

void accumulate(const TimeFrequencyMatrix& x, int skip_frames, Accum& a) {
  const int t0 = std::min(skip_frames, x.n_frames);
  for (int t = t0; t < x.n_frames; ++t) {
    for (float v : x.frame(t)) {
      a.sum += v;
      a.sum2 += static_cast<double>(v) * v;
      a.n++;
    }
  }
}

DistributionStats standardized_stats(const TimeFrequencyMatrix& x, int skip_frames, double mu,
                                     double sd) {
  DistributionStats s;
  s.bin_edges.resize(kBins + 1);
  for (int i = 0; i <= kBins; ++i) s.bin_edges[i] = kLo + (kHi - kLo) * i / kBins;
  s.counts.assign(kBins, 0);

  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  const int t0 = std::min(skip_frames, x.n_frames);
  for (int t = t0; t < x.n_frames; ++t) {
    for (float v : x.frame(t)) {
      const double z = (v - mu) / sd;
      m1 += z;
      m2 += z * z;
      m3 += z * z * z;
      m4 += z * z * z * z;
      int bin = static_cast<int>((z - kLo) / (kHi - kLo) * kBins);
      bin = std::clamp(bin, 0, kBins - 1);
      s.counts[bin]++;
      s.n++;
    }
  }
  const double n = static_cast<double>(s.n);
  s.mean = m1 / n;
  s.variance = m2 / n - s.mean * s.mean;
  const double sd_local = std::sqrt(std::max(s.variance, 0.0));
  const double mu_local = s.mean;
  // central moments of the standardized values
  const double c3 = m3 / n - 3 * mu_local * (m2 / n) + 2 * mu_local * mu_local * mu_local;
  const double c4 = m4 / n - 4 * mu_local * (m3 / n) +
                    6 * mu_local * mu_local * (m2 / n) - 3 * std::pow(mu_local, 4);
  s.skewness = c3 / std::pow(sd_local, 3);
  s.excess_kurtosis = c4 / std::pow(sd_local, 4) - 3.0;

  auto it = std::max_element(s.counts.begin(), s.counts.end());
  const int mode_bin = static_cast<int>(it - s.counts.begin());
  s.mode_location = 0.5 * (s.bin_edges[mode_bin] + s.bin_edges[mode_bin + 1]);
  return s;
}

void pooled_moments(const std::vector<const TimeFrequencyMatrix*>& inputs, int skip_frames,
                    double& mu, double& sd) {
  Accum a;
  for (const auto* x : inputs) accumulate(*x, skip_frames, a);
  if (a.n == 0) throw std::invalid_argument("distribution_stats: empty input");
  mu = a.sum / a.n;
  const double var = a.sum2 / a.n - mu * mu;
  if (!(var > 0)) throw std::invalid_argument("degenerate distribution");
  sd = std::sqrt(var);
}

}  // namespace

DistributionStats distribution_stats(const TimeFrequencyMatrix& x, int skip_frames) {
  double mu, sd;
  pooled_moments({&x}, skip_frames, mu, sd);
  return standardized_stats(x, skip_frames, mu, sd);
}

PooledStats pooled_distribution_stats(const std::vector<const TimeFrequencyMatrix*>& inputs,
                                      int skip_frames) {
  if (inputs.empty()) throw std::invalid_argument("distribution_stats: empty input");
  double mu, sd;
  pooled_moments(inputs, skip_frames, mu, sd);
  PooledStats out;
  for (const auto* x : inputs) {
    out.per_input.push_back(standardized_stats(*x, skip_frames, mu, sd));
  }
  // pooled histogram and moments over everything
  DistributionStats& p = out.pooled;
  p = out.per_input[0];
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  p.counts.assign(kBins, 0);
  p.n = 0;
  for (const auto& s : out.per_input) {
    for (int i = 0; i < kBins; ++i) p.counts[i] += s.counts[i];
    p.n += s.n;
    m1 += s.mean * s.n;
    // recover raw standardized moments per input from central ones
    const double mu_i = s.mean;
    const double v_i = s.variance;
    const double sd_i = std::sqrt(std::max(v_i, 0.0));
    const double c3 = s.skewness * sd_i * sd_i * sd_i;
    const double c4 = (s.excess_kurtosis + 3.0) * v_i * v_i;
    const double r2 = v_i + mu_i * mu_i;
    const double r3 = c3 + 3 * mu_i * r2 - 2 * mu_i * mu_i * mu_i;
    const double r4 = c4 + 4 * mu_i * r3 - 6 * mu_i * mu_i * r2 + 3 * std::pow(mu_i, 4);
    m2 += r2 * s.n;
    m3 += r3 * s.n;
    m4 += r4 * s.n;
  }
  const double n = static_cast<double>(p.n);
  p.mean = m1 / n;
  p.variance = m2 / n - p.mean * p.mean;
  const double sd_p = std::sqrt(std::max(p.variance, 0.0));
  const double c3 = m3 / n - 3 * p.mean * (m2 / n) + 2 * std::pow(p.mean, 3);
  const double c4 = m4 / n - 4 * p.mean * (m3 / n) + 6 * p.mean * p.mean * (m2 / n) -
                    3 * std::pow(p.mean, 4);
  p.skewness = c3 / std::pow(sd_p, 3);
  p.excess_kurtosis = c4 / std::pow(sd_p, 4) - 3.0;
  auto it = std::max_element(p.counts.begin(), p.counts.end());
  const int mode_bin = static_cast<int>(it - p.counts.begin());
  p.mode_location = 0.5 * (p.bin_edges[mode_bin] + p.bin_edges[mode_bin + 1]);
  return out;
}

}  // namespace rsed
