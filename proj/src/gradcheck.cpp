#include "rsed/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rsed {

double batch_loss(const DetectorParams& p, std::span<const TrainExample* const> batch,
                  double l2, std::uint64_t* routing_hash) {
  ForwardCache cache;
  double loss = 0.0;
  std::uint64_t h = 1469598103934665603ULL;
  for (const TrainExample* ex : batch) {
    const double y = forward(p, ex->patch, ex->context, cache);
    loss += bce_loss(y, ex->label, p.main, 0.0) / batch.size();
    h = (h ^ cache.routing_hash) * 1099511628211ULL;
  }
  if (l2 > 0.0) {
    double w2 = 0.0;
    for (double w : p.main.dense_w) w2 += w * w;
    loss += l2 * w2;
  }
  if (routing_hash) *routing_hash = h;
  return loss;
}

GradCheckReport gradient_check(const DetectorParams& params,
                               std::span<const TrainExample* const> batch, double l2, double h,
                               int coords_per_tensor, std::mt19937_64& rng) {
  DetectorParams p = params;
  Gradients grads = zero_gradients(p);
  backward(p, batch, l2, grads);

  auto p_tensors = parameter_tensors(p);
  auto g_tensors = gradient_tensors(grads, p.formulation());

  GradCheckReport report;
  for (size_t ti = 0; ti < p_tensors.size(); ++ti) {
    std::vector<double>& w = *p_tensors[ti].data;
    const std::vector<double>& g = *g_tensors[ti].data;
    std::vector<size_t> coords;
    if (coords_per_tensor <= 0 || static_cast<size_t>(coords_per_tensor) >= w.size()) {
      coords.resize(w.size());
      for (size_t j = 0; j < w.size(); ++j) coords[j] = j;
    } else {
      std::uniform_int_distribution<size_t> dist(0, w.size() - 1);
      for (int j = 0; j < coords_per_tensor; ++j) coords.push_back(dist(rng));
    }
    for (size_t j : coords) {
      const double saved = w[j];
      std::uint64_t hash_p = 0, hash_m = 0;
      w[j] = saved + h;
      const double loss_p = batch_loss(p, batch, l2, &hash_p);
      w[j] = saved - h;
      const double loss_m = batch_loss(p, batch, l2, &hash_m);
      w[j] = saved;
      if (hash_p != hash_m) {
        report.skipped++;
        continue;
      }
      const double fd = (loss_p - loss_m) / (2.0 * h);
      const double rel =
          std::abs(fd - g[j]) / std::max({std::abs(fd), std::abs(g[j]), 1e-4});
      report.max_rel_err = std::max(report.max_rel_err, rel);
      report.checked++;
    }
  }
  return report;
}

TrainExample random_example(const NetworkGeometry& geom, int label, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TrainExample ex;
  ex.patch.resize(static_cast<size_t>(geom.patch_frames) * geom.patch_bands);
  for (auto& v : ex.patch) v = normal(rng);
  ex.context.resize(static_cast<size_t>(geom.aux_quantiles) * geom.aux_bands);
  for (auto& v : ex.context) v = normal(rng);
  ex.label = label;
  return ex;
}

DetectorParams random_params(const NetworkGeometry& geom, Formulation f, std::uint64_t seed) {
  DetectorParams p = init_detector_params(geom, f, FrontendConfig{}, ContextConfig{}, seed);
  // merge tensors that Glorot leaves at zero get small random values so the
  // gradient paths through them are exercised
  std::mt19937_64 rng(seed ^ 0xABCDEF);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  for (auto& v : p.merge.b) v = unif(rng);
  if (f == Formulation::MixtureOfExperts) {
    for (auto& v : p.merge.moe_b_aux) v = unif(rng);
  }
  return p;
}

NetworkGeometry micro_geometry() {
  NetworkGeometry g;
  g.patch_frames = 32;
  g.patch_bands = 32;
  g.conv1_channels = 2;
  g.conv2_channels = 2;
  g.conv3_channels = 3;
  g.pool1_t = 2;
  g.pool1_f = 2;
  g.pool2_t = 2;
  g.pool2_f = 2;
  g.embedding = 8;
  g.aux_quantiles = 9;
  g.aux_bands = 6;
  g.aux_kernels = 2;
  g.experts = 4;
  return g;
}

}  // namespace rsed
