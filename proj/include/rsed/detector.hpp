#pragma once

#include <string>
#include <vector>

#include "rsed/audio.hpp"
#include "rsed/events.hpp"
#include "rsed/network.hpp"

namespace rsed {

// Probability-of-event series over a continuous recording, 20 frames per
// second. Frame i sits at start_time + i / frame_rate (window centers).
struct EventDetectionFunction {
  std::vector<float> values;
  double frame_rate = 20.0;
  double start_time = 0.075;

  double time_of(int i) const { return start_time + i / frame_rate; }
};

inline constexpr double kEdfWindowSeconds = 0.150;
inline constexpr double kEdfHopSeconds = 0.050;

// Slides a 150 ms window with a 50 ms hop over the recording and runs the
// detector on each patch. Context slices are recomputed from the recording
// itself. n_threads shards the frame range; the result does not depend on it.
EventDetectionFunction compute_edf(const Waveform& recording, const DetectorParams& params,
                                   int n_threads = 1);

// Same sweep over precomputed features. context may be null for the static
// formulation.
EventDetectionFunction compute_edf(const TimeFrequencyMatrix& compressed,
                                   const ContextTensor* context, double duration_seconds,
                                   const DetectorParams& params, int n_threads = 1);

// Extracts one padded patch from a compressed matrix, starting at
// start_frame. Out-of-range frames take the kind's pad value.
std::vector<double> extract_patch(const TimeFrequencyMatrix& x, int start_frame,
                                  int patch_frames);

// Local maxima above tau. A plateau of equal values yields a single event at
// its first frame. With min_lag > 0, conflicts are resolved in descending
// peak height (earlier peak wins ties).
EventList peak_pick(const EventDetectionFunction& edf, double tau, double min_lag_seconds);

// One mono WAV per event, centered on its timestamp, zero-padded at the
// recording edges. Returns the written paths.
std::vector<std::string> export_clips(const Waveform& recording, const EventList& events,
                                      const std::string& out_dir, double half_width = 0.075);

}  // namespace rsed
