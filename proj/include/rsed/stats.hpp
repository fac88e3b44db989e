#pragma once

#include <cstdint>
#include <vector>

#include "rsed/frontend.hpp"

namespace rsed {

// Moments and histogram of globally standardized magnitudes. The histogram
// spans [-4, 4] in 80 bins; out-of-range values land in the end bins.
struct DistributionStats {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  std::vector<double> bin_edges;
  std::vector<std::int64_t> counts;
  double mode_location = 0.0;  // bin center of the histogram mode, in global SDs
  std::int64_t n = 0;
};

// Stats of one matrix, standardized over its own values. skip_frames drops
// the smoother burn-in at the start.
DistributionStats distribution_stats(const TimeFrequencyMatrix& x, int skip_frames = 0);

// Stats of several matrices under one pooled standardization: per-input stats
// share the pooled mean and variance, so mode locations are comparable.
struct PooledStats {
  DistributionStats pooled;
  std::vector<DistributionStats> per_input;
};
PooledStats pooled_distribution_stats(const std::vector<const TimeFrequencyMatrix*>& inputs,
                                      int skip_frames = 0);

}  // namespace rsed
