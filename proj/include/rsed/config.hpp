#pragma once

#include <cstdint>
#include <string>

#include "rsed/context.hpp"
#include "rsed/frontend.hpp"
#include "rsed/network.hpp"
#include "rsed/synthdata.hpp"

namespace rsed {

struct DetectionConfig {
  double tau = 0.5;
  double min_lag_seconds = 0.15;
};

struct EvaluationConfig {
  double tolerance_seconds = 0.5;
  int n_thresholds = 100;
};

// One document per run; every stage derives its randomness from `seed`.
struct PipelineConfig {
  std::uint64_t seed = 42;
  FrontendConfig frontend;
  ContextConfig context;
  NetworkGeometry geometry;
  Formulation formulation = Formulation::AdaptiveThreshold;
  TrainConfig training;
  DetectionConfig detection;
  EvaluationConfig evaluation;
  NightSpec synth;
  ClipDatasetConfig dataset;

  // Full-scale frontend and geometry (128 bands, hop 32), or the reduced
  // CI-speed configuration (64 bands, hop 64, half-width layers).
  static PipelineConfig full_profile();
  static PipelineConfig desk_profile();
};

PipelineConfig load_config(const std::string& path);
void save_config(const std::string& path, const PipelineConfig& cfg);
std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const std::string& text);

// Dotted-path override, e.g. "training.lr=0.01" or "frontend.kind=logmelspec".
void apply_override(PipelineConfig& cfg, const std::string& key_value);

}  // namespace rsed
