#include "rsed/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

namespace rsed {

namespace {

// Hopcroft-Karp on the implicit interval graph. adj[u] lists reference
// indices within tolerance of detection u.
struct HopcroftKarp {
  const std::vector<std::vector<int>>& adj;
  int n_u, n_v;
  std::vector<int> pair_u, pair_v, dist;

  HopcroftKarp(const std::vector<std::vector<int>>& a, int nv)
      : adj(a), n_u(static_cast<int>(a.size())), n_v(nv), pair_u(n_u, -1), pair_v(nv, -1),
        dist(n_u, 0) {}

  bool bfs() {
    std::queue<int> q;
    bool found = false;
    for (int u = 0; u < n_u; ++u) {
      if (pair_u[u] == -1) {
        dist[u] = 0;
        q.push(u);
      } else {
        dist[u] = -1;
      }
    }
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        const int w = pair_v[v];
        if (w == -1) {
          found = true;
        } else if (dist[w] == -1) {
          dist[w] = dist[u] + 1;
          q.push(w);
        }
      }
    }
    return found;
  }

  bool dfs(int u) {
    for (int v : adj[u]) {
      const int w = pair_v[v];
      if (w == -1 || (dist[w] == dist[u] + 1 && dfs(w))) {
        pair_u[u] = v;
        pair_v[v] = u;
        return true;
      }
    }
    dist[u] = -1;
    return false;
  }

  int run() {
    int matched = 0;
    while (bfs()) {
      for (int u = 0; u < n_u; ++u) {
        if (pair_u[u] == -1 && dfs(u)) matched++;
      }
    }
    return matched;
  }
};

}  // namespace

MatchResult match_events(const EventList& detected, const EventList& reference,
                         double tolerance) {
  const int nd = static_cast<int>(detected.size());
  const int nr = static_cast<int>(reference.size());
  std::vector<std::vector<int>> adj(nd);
  int lo = 0;
  for (int d = 0; d < nd; ++d) {
    const double t = detected.events[d].time;
    while (lo < nr && reference.events[lo].time < t - tolerance) ++lo;
    for (int r = lo; r < nr && reference.events[r].time <= t + tolerance; ++r) {
      adj[d].push_back(r);
    }
  }
  HopcroftKarp hk(adj, nr);
  MatchResult m;
  m.tp = hk.run();
  m.fp = nd - m.tp;
  m.fn = nr - m.tp;
  for (int d = 0; d < nd; ++d) {
    if (hk.pair_u[d] != -1) m.pairs.emplace_back(d, hk.pair_u[d]);
  }
  return m;
}

Prf prf(const MatchResult& m) {
  Prf out;
  if (m.tp + m.fp > 0) out.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
  if (m.tp + m.fn > 0) out.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
  if (out.precision + out.recall > 0) {
    out.f_score = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

std::vector<double> default_thresholds(int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = static_cast<double>(i + 1) / (n + 1);
  return t;
}

namespace {

void check_thresholds(const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw std::invalid_argument("no thresholds");
  for (size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0 && thresholds[i] < 1)) {
      throw std::invalid_argument("thresholds must lie in (0, 1)");
    }
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
      throw std::invalid_argument("thresholds must be strictly increasing");
    }
  }
}

double area_under(std::vector<PrPoint> pts) {
  // anchor: recall 0 at the precision of the most selective threshold
  const PrPoint anchor{0.0, pts.back().precision, 0.0};
  std::stable_sort(pts.begin(), pts.end(),
                   [](const PrPoint& a, const PrPoint& b) { return a.recall < b.recall; });
  double area = 0.0;
  double prev_r = anchor.recall, prev_p = anchor.precision;
  for (const PrPoint& p : pts) {
    if (p.recall > prev_r) area += (p.recall - prev_r) * 0.5 * (p.precision + prev_p);
    prev_r = p.recall;
    prev_p = p.precision;
  }
  return area;
}

}  // namespace

PRCurve pr_curve(const EventDetectionFunction& edf, const EventList& reference, double min_lag,
                 const std::vector<double>& thresholds) {
  if (reference.empty()) throw std::invalid_argument("undefined recall: empty reference");
  check_thresholds(thresholds);
  PRCurve curve;
  for (double tau : thresholds) {
    const EventList det = peak_pick(edf, tau, min_lag);
    const Prf p = prf(match_events(det, reference));
    curve.points.push_back({tau, p.precision, p.recall});
  }
  curve.auprc = area_under(curve.points);
  return curve;
}

PRCurve pr_curve_from_events(const EventList& detections, const EventList& reference,
                             const std::vector<double>& thresholds) {
  if (reference.empty()) throw std::invalid_argument("undefined recall: empty reference");
  check_thresholds(thresholds);
  PRCurve curve;
  for (double tau : thresholds) {
    EventList det;
    for (const Event& e : detections.events) {
      if (e.confidence > tau) det.events.push_back(e);
    }
    const Prf p = prf(match_events(det, reference));
    curve.points.push_back({tau, p.precision, p.recall});
  }
  curve.auprc = area_under(curve.points);
  return curve;
}

std::vector<RecallCell> recall_timeline(const EventList& detections, const EventList& reference,
                                        double segment_seconds, double band_split_hz,
                                        double tolerance) {
  if (!(segment_seconds > 0)) throw std::invalid_argument("segment length must be positive");
  auto band_of = [&](const Event& e) -> std::string {
    if (e.freq_hz <= 0.0) return "all";
    return e.freq_hz < band_split_hz ? "low" : "high";
  };

  std::map<std::pair<int, std::string>, EventList> ref_cells;
  for (const Event& e : reference.events) {
    const int seg = static_cast<int>(e.time / segment_seconds);
    ref_cells[{seg, band_of(e)}].events.push_back(e);
  }

  std::vector<RecallCell> out;
  for (auto& [key, refs] : ref_cells) {
    const double t0 = key.first * segment_seconds;
    const double t1 = t0 + segment_seconds;
    EventList dets;
    for (const Event& e : detections.events) {
      if (e.time >= t0 && e.time < t1) dets.events.push_back(e);
    }
    const MatchResult m = match_events(dets, refs, tolerance);
    RecallCell cell;
    cell.segment = key.first;
    cell.band = key.second;
    cell.n_reference = static_cast<int>(refs.size());
    cell.recall = prf(m).recall;
    out.push_back(cell);
  }
  return out;
}

std::vector<FoldSpec> make_folds(const std::vector<std::string>& sensor_ids) {
  const int n = static_cast<int>(sensor_ids.size());
  if (n < 3) throw std::invalid_argument("need at least 3 sensors for folds");
  std::vector<FoldSpec> folds(n);
  for (int i = 0; i < n; ++i) {
    FoldSpec& f = folds[i];
    f.test = sensor_ids[i];
    f.validation = {sensor_ids[(i + 1) % n], sensor_ids[(i + 2) % n]};
    for (int j = 0; j < n; ++j) {
      if (j != i && j != (i + 1) % n && j != (i + 2) % n) f.train.push_back(sensor_ids[j]);
    }
  }
  return folds;
}

}  // namespace rsed
