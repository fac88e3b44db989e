#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "rsed/network.hpp"

namespace rsed {

// Batch loss without gradients. routing_hash, when given, accumulates each
// example's discrete routing fingerprint (ReLU states, pool argmax).
double batch_loss(const DetectorParams& p, std::span<const TrainExample* const> batch,
                  double l2, std::uint64_t* routing_hash = nullptr);

struct GradCheckReport {
  double max_rel_err = 0.0;
  long checked = 0;
  long skipped = 0;  // coordinates where +/-h changed the routing pattern
};

// Central finite differences against analytic gradients over one batch.
// coords_per_tensor <= 0 checks every coordinate; otherwise that many random
// coordinates per tensor. Coordinates whose +/-h evaluations change the
// ReLU/pool routing are skipped: the loss is not differentiable there and the
// difference quotient is meaningless. Relative error uses
// |fd - g| / max(|fd|, |g|, 1e-4).
GradCheckReport gradient_check(const DetectorParams& params,
                               std::span<const TrainExample* const> batch, double l2, double h,
                               int coords_per_tensor, std::mt19937_64& rng);

// Random patches, context slices and parameters for self-tests.
TrainExample random_example(const NetworkGeometry& geom, int label, std::mt19937_64& rng);
DetectorParams random_params(const NetworkGeometry& geom, Formulation f, std::uint64_t seed);

// Small geometry where exhaustive finite differences stay cheap.
NetworkGeometry micro_geometry();

}  // namespace rsed
