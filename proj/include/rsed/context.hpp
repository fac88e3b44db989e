#pragma once

#include <vector>

#include "rsed/frontend.hpp"

namespace rsed {

// Nine order statistics: permille, percentile, decile, quartile, median and
// their upper mirrors.
std::vector<double> default_quantile_levels();

struct ContextConfig {
  double window_seconds = 1800.0;  // T_CA
  double period_seconds = 450.0;   // 8 slices per hour
  int reduce_group = 4;            // input bands pooled per context band
  std::vector<double> quantile_levels = default_quantile_levels();
};

// One temporal frame of the context tensor, quantile-major (n_quantiles x
// n_bands).
struct ContextSlice {
  std::vector<double> values;
  int n_quantiles = 0;
  int n_bands = 0;

  double at(int q, int f) const { return values[static_cast<size_t>(q) * n_bands + f]; }
};

// Long-term quantile summaries, indexed (slice, quantile, band).
struct ContextTensor {
  std::vector<float> values;
  int n_slices = 0;
  int n_quantiles = 0;
  int n_bands = 0;
  std::vector<double> slice_times;  // seconds, one per slice
  std::vector<double> quantile_levels;
  double window_seconds = 1800.0;
  double period_seconds = 450.0;

  float at(int s, int q, int f) const {
    return values[(static_cast<size_t>(s) * n_quantiles + q) * n_bands + f];
  }
};

// Mean-pools groups of `group` consecutive bands.
TimeFrequencyMatrix reduce_bands(const TimeFrequencyMatrix& x, int group = 4);

// Windowed quantiles per band: the slice at time t summarizes frames in
// [t - window, t), truncated at the recording start. Slices are emitted every
// `period` seconds starting at t = period; a recording shorter than one
// period yields a single slice covering everything.
ContextTensor summary_statistics(const TimeFrequencyMatrix& x, double window_seconds,
                                 double period_seconds, const std::vector<double>& levels);

ContextTensor summary_statistics(const TimeFrequencyMatrix& x, const ContextConfig& cfg);

// Most recent slice with slice time <= t; the first slice before that.
ContextSlice context_at(const ContextTensor& c, double t_seconds);

}  // namespace rsed
