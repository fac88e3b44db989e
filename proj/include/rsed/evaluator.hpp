#pragma once

#include <string>
#include <vector>

#include "rsed/detector.hpp"
#include "rsed/events.hpp"

namespace rsed {

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (detected index, reference index)
  int tp = 0, fp = 0, fn = 0;
};

// Maximum-cardinality bipartite matching between detections and references,
// with an edge wherever |t_d - t_r| <= tolerance. Hopcroft-Karp.
MatchResult match_events(const EventList& detected, const EventList& reference,
                         double tolerance = 0.5);

struct Prf {
  double precision = 0.0, recall = 0.0, f_score = 0.0;
};

// Empty denominators yield 0.
Prf prf(const MatchResult& m);

struct PrPoint {
  double threshold = 0.0, precision = 0.0, recall = 0.0;
};

struct PRCurve {
  std::vector<PrPoint> points;  // in threshold order
  double auprc = 0.0;
};

// 100 evenly spaced thresholds in (0, 1).
std::vector<double> default_thresholds(int n = 100);

// Sweeps peak picking over the thresholds. AUPRC is the trapezoid over the
// recall axis with an anchor at (recall 0, precision of the highest
// threshold).
PRCurve pr_curve(const EventDetectionFunction& edf, const EventList& reference, double min_lag,
                 const std::vector<double>& thresholds);

// Same sweep over an existing detection list, filtering by confidence.
// Identical to the EDF sweep when min_lag was 0 at peak-picking time.
PRCurve pr_curve_from_events(const EventList& detections, const EventList& reference,
                             const std::vector<double>& thresholds);

struct RecallCell {
  int segment = 0;
  std::string band;  // "low", "high", or "all" for events without frequency
  double recall = 0.0;
  int n_reference = 0;
};

// Recall per (30-minute segment, frequency band); cells without reference
// events are omitted.
std::vector<RecallCell> recall_timeline(const EventList& detections, const EventList& reference,
                                        double segment_seconds = 1800.0,
                                        double band_split_hz = 5000.0, double tolerance = 0.5);

struct FoldSpec {
  std::string test;
  std::vector<std::string> validation;
  std::vector<std::string> train;
};

// Rotating leave-one-sensor-out folds: fold i tests sensor i, validates on
// the next two, trains on the rest.
std::vector<FoldSpec> make_folds(const std::vector<std::string>& sensor_ids);

}  // namespace rsed
