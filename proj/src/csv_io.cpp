#include "rsed/csv_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rsed {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

void write_detections_csv(const std::string& path, const EventList& events) {
  std::ofstream out = open_out(path);
  out << "time_sec,confidence\n";
  char buf[64];
  for (const Event& e : events.events) {
    std::snprintf(buf, sizeof(buf), "%.3f,%.6f\n", e.time, e.confidence);
    out << buf;
  }
}

EventList read_detections_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  EventList out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (first) {
      first = false;
      if (line.rfind("time_sec", 0) == 0) continue;
    }
    const auto f = split(line, ',');
    if (f.empty()) continue;
    Event e;
    e.time = std::stod(f[0]);
    e.confidence = f.size() > 1 ? std::stod(f[1]) : 1.0;
    out.events.push_back(e);
  }
  std::sort(out.events.begin(), out.events.end(),
            [](const Event& a, const Event& b) { return a.time < b.time; });
  return out;
}

void write_reference_csv(const std::string& path, const EventList& events) {
  std::ofstream out = open_out(path);
  const bool has_freq =
      std::any_of(events.events.begin(), events.events.end(),
                  [](const Event& e) { return e.freq_hz > 0.0; });
  out << (has_freq ? "time_sec,freq_hz" : "time_sec");
  if (!events.sensor_id.empty()) out << ",sensor_id";
  out << "\n";
  char buf[64];
  for (const Event& e : events.events) {
    std::snprintf(buf, sizeof(buf), "%.3f", e.time);
    out << buf;
    if (has_freq) {
      std::snprintf(buf, sizeof(buf), ",%.1f", e.freq_hz);
      out << buf;
    }
    if (!events.sensor_id.empty()) out << "," << events.sensor_id;
    out << "\n";
  }
}

EventList read_reference_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  EventList out;
  std::string line;
  int time_col = 0, freq_col = -1, sensor_col = -1;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, ',');
    if (first) {
      first = false;
      if (line.rfind("time_sec", 0) == 0) {
        for (size_t i = 0; i < f.size(); ++i) {
          const std::string h = trim(f[i]);
          if (h == "time_sec") time_col = static_cast<int>(i);
          if (h == "freq_hz") freq_col = static_cast<int>(i);
          if (h == "sensor_id") sensor_col = static_cast<int>(i);
        }
        continue;
      }
    }
    Event e;
    e.time = std::stod(f.at(time_col));
    if (freq_col >= 0 && static_cast<size_t>(freq_col) < f.size()) {
      e.freq_hz = std::stod(f[freq_col]);
    }
    if (sensor_col >= 0 && static_cast<size_t>(sensor_col) < f.size()) {
      out.sensor_id = trim(f[sensor_col]);
    }
    out.events.push_back(e);
  }
  std::sort(out.events.begin(), out.events.end(),
            [](const Event& a, const Event& b) { return a.time < b.time; });
  return out;
}

void write_pr_csv(const std::string& path, const PRCurve& curve) {
  std::ofstream out = open_out(path);
  out << "threshold,precision,recall\n";
  char buf[96];
  for (const PrPoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f\n", p.threshold, p.precision, p.recall);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "# auprc=%.6f\n", curve.auprc);
  out << buf;
}

PRCurve read_pr_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  PRCurve curve;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("# auprc=", 0) == 0) {
      curve.auprc = std::stod(line.substr(8));
      continue;
    }
    if (line.rfind("threshold", 0) == 0) continue;
    const auto f = split(line, ',');
    if (f.size() < 3) continue;
    curve.points.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2])});
  }
  return curve;
}

void write_timeline_csv(const std::string& path, const std::vector<RecallCell>& cells) {
  std::ofstream out = open_out(path);
  out << "segment,band,recall,n_reference\n";
  char buf[96];
  for (const RecallCell& c : cells) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%d\n", c.segment, c.band.c_str(), c.recall,
                  c.n_reference);
    out << buf;
  }
}

}  // namespace rsed
