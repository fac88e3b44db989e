#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsed/context.hpp"
#include "rsed/frontend.hpp"

namespace rsed {

enum class Formulation { Static, AdaptiveWeights, AdaptiveThreshold, MixtureOfExperts };

std::string formulation_name(Formulation f);
Formulation parse_formulation(const std::string& name);

// Three 5x5 conv layers with strided max pooling after the first two, one
// dense layer to the embedding, plus a one-layer auxiliary branch over the
// context slice. All convolutions are valid (no padding); pooling stride
// equals the pool window.
struct NetworkGeometry {
  int patch_frames = 104;
  int patch_bands = 128;
  int conv1_channels = 24;
  int conv2_channels = 24;
  int conv3_channels = 48;
  int kernel = 5;
  int pool1_t = 4, pool1_f = 2;
  int pool2_t = 4, pool2_f = 2;
  int embedding = 64;  // N
  int aux_quantiles = 9;
  int aux_bands = 32;
  int aux_kernels = 8;
  int experts = 4;  // K (mixture of experts)

  int conv1_t() const { return patch_frames - kernel + 1; }
  int conv1_f() const { return patch_bands - kernel + 1; }
  int pool1_out_t() const { return conv1_t() / pool1_t; }
  int pool1_out_f() const { return conv1_f() / pool1_f; }
  int conv2_t() const { return pool1_out_t() - kernel + 1; }
  int conv2_f() const { return pool1_out_f() - kernel + 1; }
  int pool2_out_t() const { return conv2_t() / pool2_t; }
  int pool2_out_f() const { return conv2_f() / pool2_f; }
  int conv3_t() const { return pool2_out_t() - kernel + 1; }
  int conv3_f() const { return pool2_out_f() - kernel + 1; }
  int flatten_size() const { return conv3_channels * conv3_t() * conv3_f(); }
  int aux_flat_size() const { return aux_quantiles * aux_kernels; }
  int mixture_size() const { return embedding / experts; }  // M

  void validate() const;

  static NetworkGeometry full();
  static NetworkGeometry desk();
};

struct MainBranchParams {
  std::vector<double> conv1_w, conv1_b;  // [oc][kh][kw], [oc]
  std::vector<double> conv2_w, conv2_b;  // [oc][ic][kh][kw]
  std::vector<double> conv3_w, conv3_b;
  std::vector<double> dense_w, dense_b;  // [embedding][flatten]
};

struct AuxBranchParams {
  std::vector<double> conv_w, conv_b;    // [kernels][aux_bands]
  std::vector<double> dense_w, dense_b;  // [embedding][quantiles*kernels]
};

struct MergeParams {
  Formulation formulation = Formulation::Static;
  std::vector<double> w;          // STATIC / AT / MOE
  std::vector<double> b;          // size 1; STATIC / AW / MOE
  std::vector<double> w_aux;      // AT
  std::vector<double> moe_w_aux;  // [m][k] -> index K*m + k
  std::vector<double> moe_b_aux;  // [k]
};

// Everything a trained detector needs to run on fresh audio.
struct DetectorParams {
  NetworkGeometry geometry;
  FrontendConfig frontend;
  ContextConfig context;
  MainBranchParams main;
  AuxBranchParams aux;
  MergeParams merge;

  Formulation formulation() const { return merge.formulation; }
};

// Gradient tensors, shaped like the parameters they belong to.
struct Gradients {
  MainBranchParams main;
  AuxBranchParams aux;
  MergeParams merge;
};

struct NamedTensor {
  std::string name;
  std::vector<double>* data;
};

// Trainable tensors for a formulation, in a fixed order shared by parameters,
// gradients, Adam state and checkpoints.
std::vector<NamedTensor> parameter_tensors(MainBranchParams& main, AuxBranchParams& aux,
                                           MergeParams& merge, Formulation f);
inline std::vector<NamedTensor> parameter_tensors(DetectorParams& p) {
  return parameter_tensors(p.main, p.aux, p.merge, p.formulation());
}
inline std::vector<NamedTensor> gradient_tensors(Gradients& g, Formulation f) {
  return parameter_tensors(g.main, g.aux, g.merge, f);
}

// Allocates zero tensors of the right shapes.
void allocate_params(const NetworkGeometry& geom, Formulation f, MainBranchParams& main,
                     AuxBranchParams& aux, MergeParams& merge);

DetectorParams init_detector_params(const NetworkGeometry& geom, Formulation f,
                                    const FrontendConfig& frontend, const ContextConfig& context,
                                    std::uint64_t seed);

Gradients zero_gradients(const DetectorParams& p);

// Scratch buffers and cached activations for one forward pass.
struct ForwardCache {
  std::vector<double> conv1_pre, pool1_out, conv2_pre, pool2_out, conv3_pre, conv3_act;
  std::vector<int> pool1_arg, pool2_arg;
  std::vector<double> dense_pre, z;
  std::vector<double> aux_conv_pre, aux_act, aux_dense_pre, z_aux;
  std::vector<double> moe_gates, moe_sums;
  double logit = 0.0;
  double y = 0.5;
  bool clamped = false;
  // Discrete routing fingerprint (ReLU states on active paths, pool argmax).
  // Finite-difference checks use it to detect nondifferentiable points.
  std::uint64_t routing_hash = 0;

  void resize(const NetworkGeometry& geom);
};

double sigmoid(double x);
double sigmoid_inv(double y);

// Main branch: z(t, n). Returns the embedding; fills the cache if given.
std::vector<double> forward_main(const NetworkGeometry& geom, const MainBranchParams& p,
                                 std::span<const double> patch, ForwardCache* cache = nullptr);

// Auxiliary branch: z_aux(t, n) from a quantile-by-band context slice.
std::vector<double> forward_aux(const NetworkGeometry& geom, const AuxBranchParams& p,
                                std::span<const double> slice, ForwardCache* cache = nullptr);

double merge_static(std::span<const double> z, std::span<const double> w, double b);
double merge_aw(std::span<const double> z, std::span<const double> z_aux, double b);
double merge_at(std::span<const double> z, std::span<const double> z_aux,
                std::span<const double> w, std::span<const double> w_aux);
double merge_moe(const NetworkGeometry& geom, const MergeParams& p, std::span<const double> z,
                 std::span<const double> z_aux, std::vector<double>* gates = nullptr,
                 std::vector<double>* expert_sums = nullptr);

// Fixed threshold tau on the adaptive-threshold output, rewritten as a
// time-varying threshold on the static head sigma(w . z).
double equivalent_threshold(double tau, std::span<const double> z_aux,
                            std::span<const double> w_aux);

inline constexpr double kSigmoidClamp = 1e-7;

// Cross-entropy with the output clamped away from {0, 1}, plus the L2 penalty
// on the dense-layer weights of the main branch.
double bce_loss(double y, int y_true, const MainBranchParams& main, double l2);

// Full forward pass: both branches plus the merge. The returned probability
// is clamped to (0, 1).
double forward(const DetectorParams& p, std::span<const double> patch,
               std::span<const double> context_slice, ForwardCache& cache);

double predict(const DetectorParams& p, std::span<const double> patch,
               std::span<const double> context_slice);

struct TrainExample {
  std::vector<double> patch;
  std::vector<double> context;
  int label = 0;
  std::string sensor_id;
  double time = 0.0;    // clip center in the source recording
  double freq_hz = 0.0; // 0 when unknown
};

// Mean loss and gradients over a batch.
double backward(const DetectorParams& p, std::span<const TrainExample* const> batch, double l2,
                Gradients& grads);

struct AdamState {
  long step = 0;
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::vector<double>> m, v;
};

void adam_step(DetectorParams& params, const Gradients& grads, AdamState& state);

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double l2 = 1e-3;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  DetectorParams params;
  std::vector<EpochStats> history;
  int best_epoch = -1;
};

// Fraction of clips with |y - label| < 0.5.
double validation_accuracy(const DetectorParams& p, std::span<const TrainExample> set);

// Mini-batch Adam with class-balanced sampling and early stopping on
// validation accuracy. Returns the snapshot from the best epoch.
// If val_set is empty, the training set doubles as validation.
TrainResult train(std::span<const TrainExample> train_set,
                  std::span<const TrainExample> val_set, const DetectorParams& init,
                  const TrainConfig& cfg);

}  // namespace rsed
