#pragma once

#include "json.hpp"
#include "rsed/context.hpp"
#include "rsed/frontend.hpp"
#include "rsed/network.hpp"

// JSON bindings for the plain config structs, shared by config files and
// checkpoint manifests.

namespace rsed {

inline void to_json(nlohmann::json& j, const SpectrogramConfig& c) {
  j = {{"sample_rate", c.sample_rate}, {"win_length", c.win_length},
       {"hop_length", c.hop_length},   {"fft_length", c.fft_length},
       {"n_mels", c.n_mels},           {"fmin", c.fmin},
       {"fmax", c.fmax}};
}

inline void from_json(const nlohmann::json& j, SpectrogramConfig& c) {
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.win_length = j.value("win_length", c.win_length);
  c.hop_length = j.value("hop_length", c.hop_length);
  c.fft_length = j.value("fft_length", c.fft_length);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.fmin = j.value("fmin", c.fmin);
  c.fmax = j.value("fmax", c.fmax);
}

inline void to_json(nlohmann::json& j, const PcenParams& p) {
  j = {{"smoother_seconds", p.smoother_seconds},
       {"alpha", p.alpha},
       {"delta", p.delta},
       {"root", p.root},
       {"eps", p.eps}};
}

inline void from_json(const nlohmann::json& j, PcenParams& p) {
  p.smoother_seconds = j.value("smoother_seconds", p.smoother_seconds);
  p.alpha = j.value("alpha", p.alpha);
  p.delta = j.value("delta", p.delta);
  p.root = j.value("root", p.root);
  p.eps = j.value("eps", p.eps);
}

inline void to_json(nlohmann::json& j, const FrontendConfig& c) {
  j = {{"kind", frontend_kind_name(c.kind)},
       {"spectrogram", c.spectrogram},
       {"pcen", c.pcen}};
}

inline void from_json(const nlohmann::json& j, FrontendConfig& c) {
  if (j.contains("kind")) c.kind = parse_frontend_kind(j.at("kind").get<std::string>());
  if (j.contains("spectrogram")) j.at("spectrogram").get_to(c.spectrogram);
  if (j.contains("pcen")) j.at("pcen").get_to(c.pcen);
}

inline void to_json(nlohmann::json& j, const ContextConfig& c) {
  j = {{"window_seconds", c.window_seconds},
       {"period_seconds", c.period_seconds},
       {"reduce_group", c.reduce_group},
       {"quantile_levels", c.quantile_levels}};
}

inline void from_json(const nlohmann::json& j, ContextConfig& c) {
  c.window_seconds = j.value("window_seconds", c.window_seconds);
  c.period_seconds = j.value("period_seconds", c.period_seconds);
  c.reduce_group = j.value("reduce_group", c.reduce_group);
  c.quantile_levels = j.value("quantile_levels", c.quantile_levels);
}

inline void to_json(nlohmann::json& j, const NetworkGeometry& g) {
  j = {{"patch_frames", g.patch_frames}, {"patch_bands", g.patch_bands},
       {"conv1_channels", g.conv1_channels}, {"conv2_channels", g.conv2_channels},
       {"conv3_channels", g.conv3_channels}, {"kernel", g.kernel},
       {"pool1_t", g.pool1_t}, {"pool1_f", g.pool1_f},
       {"pool2_t", g.pool2_t}, {"pool2_f", g.pool2_f},
       {"embedding", g.embedding}, {"aux_quantiles", g.aux_quantiles},
       {"aux_bands", g.aux_bands}, {"aux_kernels", g.aux_kernels},
       {"experts", g.experts}};
}

inline void from_json(const nlohmann::json& j, NetworkGeometry& g) {
  g.patch_frames = j.value("patch_frames", g.patch_frames);
  g.patch_bands = j.value("patch_bands", g.patch_bands);
  g.conv1_channels = j.value("conv1_channels", g.conv1_channels);
  g.conv2_channels = j.value("conv2_channels", g.conv2_channels);
  g.conv3_channels = j.value("conv3_channels", g.conv3_channels);
  g.kernel = j.value("kernel", g.kernel);
  g.pool1_t = j.value("pool1_t", g.pool1_t);
  g.pool1_f = j.value("pool1_f", g.pool1_f);
  g.pool2_t = j.value("pool2_t", g.pool2_t);
  g.pool2_f = j.value("pool2_f", g.pool2_f);
  g.embedding = j.value("embedding", g.embedding);
  g.aux_quantiles = j.value("aux_quantiles", g.aux_quantiles);
  g.aux_bands = j.value("aux_bands", g.aux_bands);
  g.aux_kernels = j.value("aux_kernels", g.aux_kernels);
  g.experts = j.value("experts", g.experts);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
       {"patience", c.patience},     {"lr", c.lr},
       {"beta1", c.beta1},           {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},     {"l2", c.l2},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.l2 = j.value("l2", c.l2);
  c.seed = j.value("seed", c.seed);
}

}  // namespace rsed
