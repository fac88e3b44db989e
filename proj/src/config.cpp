#include "rsed/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rsed/json_conv.hpp"

namespace rsed {

namespace {

void to_json(nlohmann::json& j, const SensorProfile& p) {
  j = {{"id", p.id},
       {"shape_gains", p.shape_gains},
       {"insect_center_hz", p.insect_center_hz},
       {"insect_level_db", p.insect_level_db},
       {"spl0_db", p.spl0_db},
       {"decay_db", p.decay_db},
       {"noise_seed", p.noise_seed}};
}

void from_json(const nlohmann::json& j, SensorProfile& p) {
  p.id = j.value("id", p.id);
  p.shape_gains = j.value("shape_gains", p.shape_gains);
  p.insect_center_hz = j.value("insect_center_hz", p.insect_center_hz);
  p.insect_level_db = j.value("insect_level_db", p.insect_level_db);
  p.spl0_db = j.value("spl0_db", p.spl0_db);
  p.decay_db = j.value("decay_db", p.decay_db);
  p.noise_seed = j.value("noise_seed", p.noise_seed);
}

nlohmann::json night_to_json(const NightSpec& s) {
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& p : s.sensors) {
    nlohmann::json jp;
    to_json(jp, p);
    sensors.push_back(jp);
  }
  return {{"duration_seconds", s.duration_seconds},
          {"sensors", sensors},
          {"call_count", s.call_count},
          {"density_slope", s.density_slope},
          {"band_low_lo_hz", s.band_low_lo_hz},
          {"band_low_hi_hz", s.band_low_hi_hz},
          {"band_high_lo_hz", s.band_high_lo_hz},
          {"band_high_hi_hz", s.band_high_hi_hz},
          {"snr_min_db", s.snr_min_db},
          {"snr_max_db", s.snr_max_db},
          {"min_call_gap_seconds", s.min_call_gap_seconds},
          {"sample_rate", s.sample_rate},
          {"seed", s.seed}};
}

void night_from_json(const nlohmann::json& j, NightSpec& s) {
  s.duration_seconds = j.value("duration_seconds", s.duration_seconds);
  if (j.contains("sensors")) {
    s.sensors.clear();
    for (const auto& jp : j.at("sensors")) {
      SensorProfile p;
      from_json(jp, p);
      s.sensors.push_back(p);
    }
  }
  s.call_count = j.value("call_count", s.call_count);
  s.density_slope = j.value("density_slope", s.density_slope);
  s.band_low_lo_hz = j.value("band_low_lo_hz", s.band_low_lo_hz);
  s.band_low_hi_hz = j.value("band_low_hi_hz", s.band_low_hi_hz);
  s.band_high_lo_hz = j.value("band_high_lo_hz", s.band_high_lo_hz);
  s.band_high_hi_hz = j.value("band_high_hi_hz", s.band_high_hi_hz);
  s.snr_min_db = j.value("snr_min_db", s.snr_min_db);
  s.snr_max_db = j.value("snr_max_db", s.snr_max_db);
  s.min_call_gap_seconds = j.value("min_call_gap_seconds", s.min_call_gap_seconds);
  s.sample_rate = j.value("sample_rate", s.sample_rate);
  s.seed = j.value("seed", s.seed);
}

}  // namespace

PipelineConfig PipelineConfig::full_profile() {
  PipelineConfig cfg;
  cfg.geometry = NetworkGeometry::full();
  cfg.synth.sensors = default_sensor_profiles();
  return cfg;
}

PipelineConfig PipelineConfig::desk_profile() {
  PipelineConfig cfg = full_profile();
  cfg.frontend.spectrogram.hop_length = 64;
  cfg.frontend.spectrogram.n_mels = 64;
  cfg.context.reduce_group = 2;
  cfg.geometry = NetworkGeometry::desk();
  return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j = {{"seed", cfg.seed},
                      {"frontend", cfg.frontend},
                      {"context", cfg.context},
                      {"geometry", cfg.geometry},
                      {"formulation", formulation_name(cfg.formulation)},
                      {"training", cfg.training},
                      {"detection",
                       {{"tau", cfg.detection.tau},
                        {"min_lag_seconds", cfg.detection.min_lag_seconds}}},
                      {"evaluation",
                       {{"tolerance_seconds", cfg.evaluation.tolerance_seconds},
                        {"n_thresholds", cfg.evaluation.n_thresholds}}},
                      {"synth", night_to_json(cfg.synth)},
                      {"dataset",
                       {{"negatives_per_positive", cfg.dataset.negatives_per_positive},
                        {"guard_seconds", cfg.dataset.guard_seconds},
                        {"seed", cfg.dataset.seed}}}};
  return j.dump(2);
}

PipelineConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("bad config JSON: ") + e.what());
  }
  PipelineConfig cfg =
      j.value("profile", "full") == "desk" ? PipelineConfig::desk_profile()
                                           : PipelineConfig::full_profile();
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("frontend")) j.at("frontend").get_to(cfg.frontend);
  if (j.contains("context")) j.at("context").get_to(cfg.context);
  if (j.contains("geometry")) j.at("geometry").get_to(cfg.geometry);
  if (j.contains("formulation")) {
    cfg.formulation = parse_formulation(j.at("formulation").get<std::string>());
  }
  if (j.contains("training")) j.at("training").get_to(cfg.training);
  if (j.contains("detection")) {
    cfg.detection.tau = j["detection"].value("tau", cfg.detection.tau);
    cfg.detection.min_lag_seconds =
        j["detection"].value("min_lag_seconds", cfg.detection.min_lag_seconds);
  }
  if (j.contains("evaluation")) {
    cfg.evaluation.tolerance_seconds =
        j["evaluation"].value("tolerance_seconds", cfg.evaluation.tolerance_seconds);
    cfg.evaluation.n_thresholds =
        j["evaluation"].value("n_thresholds", cfg.evaluation.n_thresholds);
  }
  if (j.contains("synth")) night_from_json(j.at("synth"), cfg.synth);
  if (j.contains("dataset")) {
    cfg.dataset.negatives_per_positive =
        j["dataset"].value("negatives_per_positive", cfg.dataset.negatives_per_positive);
    cfg.dataset.guard_seconds = j["dataset"].value("guard_seconds", cfg.dataset.guard_seconds);
    cfg.dataset.seed = j["dataset"].value("seed", cfg.dataset.seed);
  }
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::string& path, const PipelineConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << config_to_json(cfg) << "\n";
}

void apply_override(PipelineConfig& cfg, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override must look like key.path=value: " + key_value);
  }
  const std::string key = key_value.substr(0, eq);
  const std::string value = key_value.substr(eq + 1);

  // route through JSON so every config field stays reachable
  nlohmann::json j = nlohmann::json::parse(config_to_json(cfg));
  nlohmann::json* node = &j;
  size_t pos = 0;
  std::string leaf = key;
  while (true) {
    const size_t dot = leaf.find('.');
    if (dot == std::string::npos) break;
    const std::string head = leaf.substr(0, dot);
    if (!node->contains(head)) (*node)[head] = nlohmann::json::object();
    node = &(*node)[head];
    leaf = leaf.substr(dot + 1);
    pos += dot + 1;
  }
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;  // bare strings
  }
  (*node)[leaf] = parsed;
  cfg = config_from_json(j.dump());
}

}  // namespace rsed
