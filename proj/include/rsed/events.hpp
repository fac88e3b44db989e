#pragma once

#include <string>
#include <vector>

namespace rsed {

struct Event {
  double time = 0.0;        // seconds
  double confidence = 1.0;  // (0, 1]
  double freq_hz = 0.0;     // 0 when unknown
};

// Timestamps sorted strictly ascending. Used for detections and references.
struct EventList {
  std::vector<Event> events;
  std::string sensor_id;

  size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

}  // namespace rsed
