#include "rsed/context.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsed {

std::vector<double> default_quantile_levels() {
  return {0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999};
}

TimeFrequencyMatrix reduce_bands(const TimeFrequencyMatrix& x, int group) {
  if (group <= 0) throw std::invalid_argument("group must be positive");
  if (x.n_bands % group != 0) {
    throw std::invalid_argument("band count " + std::to_string(x.n_bands) +
                                " not divisible by " + std::to_string(group));
  }
  TimeFrequencyMatrix out;
  out.n_frames = x.n_frames;
  out.n_bands = x.n_bands / group;
  out.frame_rate = x.frame_rate;
  out.kind = x.kind;
  out.values.resize(static_cast<size_t>(out.n_frames) * out.n_bands);
  if (!x.band_edges.empty()) {
    for (size_t i = 0; i + 1 < x.band_edges.size(); i += group) {
      out.band_edges.push_back(x.band_edges[i]);
    }
    out.band_edges.push_back(x.band_edges.back());
  }
  const double inv = 1.0 / group;
  for (int t = 0; t < x.n_frames; ++t) {
    const float* src = x.values.data() + static_cast<size_t>(t) * x.n_bands;
    float* dst = out.values.data() + static_cast<size_t>(t) * out.n_bands;
    for (int b = 0; b < out.n_bands; ++b) {
      double acc = 0.0;
      for (int j = 0; j < group; ++j) acc += src[b * group + j];
      dst[b] = static_cast<float>(acc * inv);
    }
  }
  return out;
}

namespace {

// Linear interpolation between order statistics (the usual "type 7" rule).
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (n - 1) * p;
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - lo;
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

ContextTensor summary_statistics(const TimeFrequencyMatrix& x, double window_seconds,
                                 double period_seconds, const std::vector<double>& levels) {
  if (!(period_seconds > 0) || window_seconds < period_seconds) {
    throw std::invalid_argument("window must be at least one period");
  }
  if (levels.empty()) throw std::invalid_argument("no quantile levels");
  for (size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0 && levels[i] < 1) || (i > 0 && levels[i] <= levels[i - 1])) {
      throw std::invalid_argument("quantile levels must be sorted and inside (0, 1)");
    }
  }
  if (x.n_frames == 0) throw std::invalid_argument("empty window");

  const double duration = x.n_frames / x.frame_rate;
  std::vector<double> slice_times;
  for (double t = period_seconds; t <= duration + 1e-9; t += period_seconds) {
    slice_times.push_back(t);
  }
  if (slice_times.empty()) slice_times.push_back(duration);

  ContextTensor out;
  out.n_slices = static_cast<int>(slice_times.size());
  out.n_quantiles = static_cast<int>(levels.size());
  out.n_bands = x.n_bands;
  out.slice_times = slice_times;
  out.quantile_levels = levels;
  out.window_seconds = window_seconds;
  out.period_seconds = period_seconds;
  out.values.resize(static_cast<size_t>(out.n_slices) * out.n_quantiles * out.n_bands);

  std::vector<double> column;
  for (int s = 0; s < out.n_slices; ++s) {
    const double ts = slice_times[s];
    int t0 = static_cast<int>(std::ceil((ts - window_seconds) * x.frame_rate - 1e-9));
    int t1 = static_cast<int>(std::ceil(ts * x.frame_rate - 1e-9));
    t0 = std::max(0, t0);
    t1 = std::min(x.n_frames, std::max(t1, t0 + 1));
    for (int f = 0; f < x.n_bands; ++f) {
      column.clear();
      column.reserve(t1 - t0);
      for (int t = t0; t < t1; ++t) column.push_back(x.at(t, f));
      std::sort(column.begin(), column.end());
      for (int q = 0; q < out.n_quantiles; ++q) {
        out.values[(static_cast<size_t>(s) * out.n_quantiles + q) * out.n_bands + f] =
            static_cast<float>(quantile_sorted(column, levels[q]));
      }
    }
  }
  return out;
}

ContextTensor summary_statistics(const TimeFrequencyMatrix& x, const ContextConfig& cfg) {
  return summary_statistics(x, cfg.window_seconds, cfg.period_seconds, cfg.quantile_levels);
}

ContextSlice context_at(const ContextTensor& c, double t_seconds) {
  if (c.n_slices == 0) throw std::invalid_argument("empty context tensor");
  int idx = 0;
  for (int s = 0; s < c.n_slices; ++s) {
    if (c.slice_times[s] <= t_seconds) idx = s;
  }
  ContextSlice slice;
  slice.n_quantiles = c.n_quantiles;
  slice.n_bands = c.n_bands;
  slice.values.resize(static_cast<size_t>(c.n_quantiles) * c.n_bands);
  const size_t off = static_cast<size_t>(idx) * c.n_quantiles * c.n_bands;
  for (size_t i = 0; i < slice.values.size(); ++i) {
    slice.values[i] = c.values[off + i];
  }
  return slice;
}

}  // namespace rsed
