#pragma once

#include <string>

#include "rsed/evaluator.hpp"
#include "rsed/events.hpp"

namespace rsed {

// Detections: header `time_sec,confidence`, 3 and 6 decimal places.
void write_detections_csv(const std::string& path, const EventList& events);
EventList read_detections_csv(const std::string& path);

// Reference annotations: header `time_sec[,freq_hz][,sensor_id]`.
void write_reference_csv(const std::string& path, const EventList& events);
EventList read_reference_csv(const std::string& path);

// PR curve: `threshold,precision,recall` rows plus a `# auprc=` footer.
void write_pr_csv(const std::string& path, const PRCurve& curve);
PRCurve read_pr_csv(const std::string& path);

void write_timeline_csv(const std::string& path, const std::vector<RecallCell>& cells);

}  // namespace rsed
