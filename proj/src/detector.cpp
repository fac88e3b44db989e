#include "rsed/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <thread>

namespace rsed {

std::vector<double> extract_patch(const TimeFrequencyMatrix& x, int start_frame,
                                  int patch_frames) {
  std::vector<double> patch(static_cast<size_t>(patch_frames) * x.n_bands);
  const double pad = tf_pad_value(x.kind);
  for (int t = 0; t < patch_frames; ++t) {
    const int src = start_frame + t;
    double* dst = patch.data() + static_cast<size_t>(t) * x.n_bands;
    if (src < 0 || src >= x.n_frames) {
      std::fill(dst, dst + x.n_bands, pad);
    } else {
      const float* row = x.values.data() + static_cast<size_t>(src) * x.n_bands;
      for (int f = 0; f < x.n_bands; ++f) dst[f] = row[f];
    }
  }
  return patch;
}

EventDetectionFunction compute_edf(const Waveform& recording, const DetectorParams& params,
                                   int n_threads) {
  const double duration = recording.duration();
  if (duration < kEdfWindowSeconds) throw std::invalid_argument("input too short");

  n_threads = std::max(1, n_threads);
  const TimeFrequencyMatrix energy =
      melspectrogram(recording, params.frontend.spectrogram, n_threads);
  const TimeFrequencyMatrix compressed = compress(energy, params.frontend);

  const bool needs_context = params.formulation() != Formulation::Static;
  ContextTensor context;
  if (needs_context) {
    context = summary_statistics(reduce_bands(compressed, params.context.reduce_group),
                                 params.context);
  }
  return compute_edf(compressed, needs_context ? &context : nullptr, duration, params,
                     n_threads);
}

EventDetectionFunction compute_edf(const TimeFrequencyMatrix& compressed,
                                   const ContextTensor* context, double duration,
                                   const DetectorParams& params, int n_threads) {
  if (duration < kEdfWindowSeconds) throw std::invalid_argument("input too short");
  n_threads = std::max(1, n_threads);
  if (compressed.n_bands != params.geometry.patch_bands) {
    throw std::invalid_argument(
        "dimension mismatch: frontend produces " + std::to_string(compressed.n_bands) +
        " bands, detector expects " + std::to_string(params.geometry.patch_bands));
  }
  const bool needs_context = params.formulation() != Formulation::Static;
  if (needs_context) {
    if (!context) throw std::invalid_argument("context required for adaptive formulations");
    if (context->n_bands != params.geometry.aux_bands ||
        context->n_quantiles != params.geometry.aux_quantiles) {
      throw std::invalid_argument(
          "dimension mismatch: context is " + std::to_string(context->n_quantiles) + "x" +
          std::to_string(context->n_bands) + ", detector expects " +
          std::to_string(params.geometry.aux_quantiles) + "x" +
          std::to_string(params.geometry.aux_bands));
    }
  }

  EventDetectionFunction edf;
  edf.frame_rate = 1.0 / kEdfHopSeconds;
  edf.start_time = kEdfWindowSeconds / 2.0;
  const int n = static_cast<int>(std::floor((duration - kEdfWindowSeconds) / kEdfHopSeconds +
                                            1e-9)) +
                1;
  edf.values.resize(n);

  const double tf_rate = compressed.frame_rate;
  auto run = [&](int i0, int i1) {
    ForwardCache cache;
    ContextSlice slice;
    double slice_until = -1.0;
    for (int i = i0; i < i1; ++i) {
      const int start_frame = static_cast<int>(std::lround(i * kEdfHopSeconds * tf_rate));
      const std::vector<double> patch =
          extract_patch(compressed, start_frame, params.geometry.patch_frames);
      std::span<const double> ctx;
      if (needs_context) {
        const double t = edf.time_of(i);
        if (t >= slice_until || slice.values.empty()) {
          slice = context_at(*context, t);
          // find when the next slice takes over, to avoid refetching per frame
          slice_until = 1e300;
          for (double st : context->slice_times) {
            if (st > t) {
              slice_until = st;
              break;
            }
          }
        }
        ctx = slice.values;
      }
      edf.values[i] = static_cast<float>(forward(params, patch, ctx, cache));
    }
  };

  if (n_threads == 1 || n < 2 * n_threads) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (n + n_threads - 1) / n_threads;
    for (int i = 0; i < n_threads; ++i) {
      const int i0 = i * chunk, i1 = std::min(n, i0 + chunk);
      if (i0 >= i1) break;
      pool.emplace_back(run, i0, i1);
    }
    for (auto& th : pool) th.join();
  }
  return edf;
}

EventList peak_pick(const EventDetectionFunction& edf, double tau, double min_lag_seconds) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must be in (0, 1)");
  const int n = static_cast<int>(edf.values.size());
  struct Peak {
    int frame;
    float height;
  };
  std::vector<Peak> peaks;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && edf.values[j + 1] == edf.values[i]) ++j;
    const double v = edf.values[i];
    const double left = i > 0 ? edf.values[i - 1] : -1e300;
    const double right = j + 1 < n ? edf.values[j + 1] : -1e300;
    if (v > left && v > right && v > tau) peaks.push_back({i, edf.values[i]});
    i = j + 1;
  }

  if (min_lag_seconds > 0.0 && peaks.size() > 1) {
    const int min_gap =
        static_cast<int>(std::ceil(min_lag_seconds * edf.frame_rate - 1e-9));
    std::vector<Peak> order = peaks;
    std::stable_sort(order.begin(), order.end(), [](const Peak& a, const Peak& b) {
      if (a.height != b.height) return a.height > b.height;
      return a.frame < b.frame;
    });
    std::set<int> kept;
    for (const Peak& p : order) {
      auto it = kept.lower_bound(p.frame);
      bool ok = true;
      if (it != kept.end() && *it - p.frame < min_gap) ok = false;
      if (it != kept.begin() && p.frame - *std::prev(it) < min_gap) ok = false;
      if (ok) kept.insert(p.frame);
    }
    peaks.erase(std::remove_if(peaks.begin(), peaks.end(),
                               [&](const Peak& p) { return !kept.count(p.frame); }),
                peaks.end());
  }

  EventList out;
  out.events.reserve(peaks.size());
  for (const Peak& p : peaks) {
    out.events.push_back({edf.time_of(p.frame), p.height, 0.0});
  }
  return out;
}

std::vector<std::string> export_clips(const Waveform& recording, const EventList& events,
                                      const std::string& out_dir, double half_width) {
  const double duration = recording.duration();
  for (const Event& e : events.events) {
    if (e.time < 0.0 || e.time > duration) {
      throw std::invalid_argument("event at " + std::to_string(e.time) +
                                  " s outside the recording");
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + out_dir);

  std::vector<std::string> paths;
  const long len = static_cast<long>(recording.samples.size());
  for (const Event& e : events.events) {
    const double lo = (e.time - half_width) * recording.sample_rate;
    const double hi = (e.time + half_width) * recording.sample_rate;
    const long first = static_cast<long>(std::ceil(lo - 1e-6));
    const long last = static_cast<long>(std::ceil(hi - 1e-6));  // exclusive
    Waveform clip;
    clip.sample_rate = recording.sample_rate;
    clip.samples.resize(last - first, 0.0f);
    for (long s = std::max(first, 0L); s < std::min(last, len); ++s) {
      clip.samples[s - first] = recording.samples[s];
    }
    char name[80];
    std::snprintf(name, sizeof(name), "event_%010.3f_%1.6f.wav", e.time, e.confidence);
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    write_wav(path, clip);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace rsed
