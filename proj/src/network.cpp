#include "rsed/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace rsed {

std::string formulation_name(Formulation f) {
  switch (f) {
    case Formulation::Static: return "STATIC";
    case Formulation::AdaptiveWeights: return "AW";
    case Formulation::AdaptiveThreshold: return "AT";
    case Formulation::MixtureOfExperts: return "MOE";
  }
  return "?";
}

Formulation parse_formulation(const std::string& name) {
  if (name == "STATIC") return Formulation::Static;
  if (name == "AW") return Formulation::AdaptiveWeights;
  if (name == "AT") return Formulation::AdaptiveThreshold;
  if (name == "MOE") return Formulation::MixtureOfExperts;
  throw std::invalid_argument("unknown formulation: " + name);
}

void NetworkGeometry::validate() const {
  if (kernel < 1 || patch_frames < kernel || patch_bands < kernel) {
    throw std::invalid_argument("patch smaller than kernel");
  }
  if (pool1_t < 1 || pool1_f < 1 || pool2_t < 1 || pool2_f < 1) {
    throw std::invalid_argument("pool sizes must be positive");
  }
  if (pool1_out_t() < kernel || pool1_out_f() < kernel || pool2_out_t() < kernel ||
      pool2_out_f() < kernel) {
    throw std::invalid_argument("geometry collapses before the third conv layer");
  }
  if (embedding < 1 || conv1_channels < 1 || conv2_channels < 1 || conv3_channels < 1 ||
      aux_kernels < 1 || aux_quantiles < 1 || aux_bands < 1) {
    throw std::invalid_argument("bad layer widths");
  }
  if (experts < 1 || embedding % experts != 0) {
    throw std::invalid_argument("embedding must be divisible by the expert count");
  }
}

NetworkGeometry NetworkGeometry::full() { return NetworkGeometry{}; }

NetworkGeometry NetworkGeometry::desk() {
  NetworkGeometry g;
  g.patch_frames = 52;
  g.patch_bands = 64;
  g.conv1_channels = 12;
  g.conv2_channels = 12;
  g.conv3_channels = 24;
  g.pool1_t = 2;
  g.pool1_f = 2;
  g.pool2_t = 2;
  g.pool2_f = 2;
  g.aux_kernels = 4;
  return g;
}

std::vector<NamedTensor> parameter_tensors(MainBranchParams& main, AuxBranchParams& aux,
                                           MergeParams& merge, Formulation f) {
  std::vector<NamedTensor> out = {
      {"main.conv1_w", &main.conv1_w}, {"main.conv1_b", &main.conv1_b},
      {"main.conv2_w", &main.conv2_w}, {"main.conv2_b", &main.conv2_b},
      {"main.conv3_w", &main.conv3_w}, {"main.conv3_b", &main.conv3_b},
      {"main.dense_w", &main.dense_w}, {"main.dense_b", &main.dense_b},
  };
  if (f != Formulation::Static) {
    out.push_back({"aux.conv_w", &aux.conv_w});
    out.push_back({"aux.conv_b", &aux.conv_b});
    out.push_back({"aux.dense_w", &aux.dense_w});
    out.push_back({"aux.dense_b", &aux.dense_b});
  }
  switch (f) {
    case Formulation::Static:
      out.push_back({"merge.w", &merge.w});
      out.push_back({"merge.b", &merge.b});
      break;
    case Formulation::AdaptiveWeights:
      out.push_back({"merge.b", &merge.b});
      break;
    case Formulation::AdaptiveThreshold:
      out.push_back({"merge.w", &merge.w});
      out.push_back({"merge.w_aux", &merge.w_aux});
      break;
    case Formulation::MixtureOfExperts:
      out.push_back({"merge.w", &merge.w});
      out.push_back({"merge.b", &merge.b});
      out.push_back({"merge.moe_w_aux", &merge.moe_w_aux});
      out.push_back({"merge.moe_b_aux", &merge.moe_b_aux});
      break;
  }
  return out;
}

void allocate_params(const NetworkGeometry& g, Formulation f, MainBranchParams& main,
                     AuxBranchParams& aux, MergeParams& merge) {
  g.validate();
  const int k2 = g.kernel * g.kernel;
  main.conv1_w.assign(static_cast<size_t>(g.conv1_channels) * k2, 0.0);
  main.conv1_b.assign(g.conv1_channels, 0.0);
  main.conv2_w.assign(static_cast<size_t>(g.conv2_channels) * g.conv1_channels * k2, 0.0);
  main.conv2_b.assign(g.conv2_channels, 0.0);
  main.conv3_w.assign(static_cast<size_t>(g.conv3_channels) * g.conv2_channels * k2, 0.0);
  main.conv3_b.assign(g.conv3_channels, 0.0);
  main.dense_w.assign(static_cast<size_t>(g.embedding) * g.flatten_size(), 0.0);
  main.dense_b.assign(g.embedding, 0.0);
  aux.conv_w.assign(static_cast<size_t>(g.aux_kernels) * g.aux_bands, 0.0);
  aux.conv_b.assign(g.aux_kernels, 0.0);
  aux.dense_w.assign(static_cast<size_t>(g.embedding) * g.aux_flat_size(), 0.0);
  aux.dense_b.assign(g.embedding, 0.0);
  merge.formulation = f;
  merge.w.assign(g.embedding, 0.0);
  merge.b.assign(1, 0.0);
  merge.w_aux.assign(g.embedding, 0.0);
  merge.moe_w_aux.assign(static_cast<size_t>(g.mixture_size()) * g.experts, 0.0);
  merge.moe_b_aux.assign(g.experts, 0.0);
}

namespace {

void glorot_fill(std::vector<double>& w, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : w) v = dist(rng);
}

}  // namespace

DetectorParams init_detector_params(const NetworkGeometry& g, Formulation f,
                                    const FrontendConfig& frontend, const ContextConfig& context,
                                    std::uint64_t seed) {
  DetectorParams p;
  p.geometry = g;
  p.frontend = frontend;
  p.context = context;
  allocate_params(g, f, p.main, p.aux, p.merge);

  std::mt19937_64 rng(seed);
  const int k2 = g.kernel * g.kernel;
  glorot_fill(p.main.conv1_w, k2, k2 * g.conv1_channels, rng);
  glorot_fill(p.main.conv2_w, k2 * g.conv1_channels, k2 * g.conv2_channels, rng);
  glorot_fill(p.main.conv3_w, k2 * g.conv2_channels, k2 * g.conv3_channels, rng);
  glorot_fill(p.main.dense_w, g.flatten_size(), g.embedding, rng);
  if (f != Formulation::Static) {
    glorot_fill(p.aux.conv_w, g.aux_bands, g.aux_kernels, rng);
    glorot_fill(p.aux.dense_w, g.aux_flat_size(), g.embedding, rng);
  }
  switch (f) {
    case Formulation::Static:
      glorot_fill(p.merge.w, g.embedding, 1, rng);
      break;
    case Formulation::AdaptiveWeights:
      break;
    case Formulation::AdaptiveThreshold:
      glorot_fill(p.merge.w, g.embedding, 1, rng);
      glorot_fill(p.merge.w_aux, g.embedding, 1, rng);
      break;
    case Formulation::MixtureOfExperts:
      glorot_fill(p.merge.w, g.embedding, 1, rng);
      glorot_fill(p.merge.moe_w_aux, g.mixture_size(), g.experts, rng);
      break;
  }
  return p;
}

Gradients zero_gradients(const DetectorParams& p) {
  Gradients g;
  allocate_params(p.geometry, p.formulation(), g.main, g.aux, g.merge);
  return g;
}

void ForwardCache::resize(const NetworkGeometry& g) {
  conv1_pre.assign(static_cast<size_t>(g.conv1_channels) * g.conv1_t() * g.conv1_f(), 0.0);
  pool1_out.assign(static_cast<size_t>(g.conv1_channels) * g.pool1_out_t() * g.pool1_out_f(),
                   0.0);
  pool1_arg.assign(pool1_out.size(), -1);
  conv2_pre.assign(static_cast<size_t>(g.conv2_channels) * g.conv2_t() * g.conv2_f(), 0.0);
  pool2_out.assign(static_cast<size_t>(g.conv2_channels) * g.pool2_out_t() * g.pool2_out_f(),
                   0.0);
  pool2_arg.assign(pool2_out.size(), -1);
  conv3_pre.assign(static_cast<size_t>(g.conv3_channels) * g.conv3_t() * g.conv3_f(), 0.0);
  conv3_act.assign(conv3_pre.size(), 0.0);
  dense_pre.assign(g.embedding, 0.0);
  z.assign(g.embedding, 0.0);
  aux_conv_pre.assign(static_cast<size_t>(g.aux_quantiles) * g.aux_kernels, 0.0);
  aux_act.assign(aux_conv_pre.size(), 0.0);
  aux_dense_pre.assign(g.embedding, 0.0);
  z_aux.assign(g.embedding, 0.0);
  moe_gates.assign(g.experts, 0.0);
  moe_sums.assign(g.experts, 0.0);
  routing_hash = 1469598103934665603ULL;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double sigmoid_inv(double y) {
  if (!(y > 0.0 && y < 1.0)) throw std::invalid_argument("sigmoid_inv needs y in (0, 1)");
  return std::log(y / (1.0 - y));
}

namespace {

inline void hash_mix(std::uint64_t& h, std::uint64_t v) {
  h = (h ^ v) * 1099511628211ULL;
}

// out[oc][t][f] = b[oc] + sum_ic sum_kh sum_kw w[oc][ic][kh][kw] in[ic][t+kh][f+kw]
void conv_valid(const double* in, int ic_n, int it_n, int if_n, const double* w, const double* b,
                int oc_n, int k, double* out) {
  const int ot_n = it_n - k + 1;
  const int of_n = if_n - k + 1;
  for (int oc = 0; oc < oc_n; ++oc) {
    double* plane = out + static_cast<size_t>(oc) * ot_n * of_n;
    std::fill(plane, plane + static_cast<size_t>(ot_n) * of_n, b[oc]);
    for (int ic = 0; ic < ic_n; ++ic) {
      const double* in_plane = in + static_cast<size_t>(ic) * it_n * if_n;
      const double* w_base = w + ((static_cast<size_t>(oc) * ic_n + ic) * k) * k;
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          const double wv = w_base[kh * k + kw];
          for (int t = 0; t < ot_n; ++t) {
            const double* src = in_plane + static_cast<size_t>(t + kh) * if_n + kw;
            double* dst = plane + static_cast<size_t>(t) * of_n;
            for (int f = 0; f < of_n; ++f) dst[f] += wv * src[f];
          }
        }
      }
    }
  }
}

// Gradients of conv_valid w.r.t. weights, biases and input.
void conv_backward(const double* in, int ic_n, int it_n, int if_n, const double* w,
                   const double* d_out, int oc_n, int k, double* g_w, double* g_b,
                   double* d_in) {
  const int ot_n = it_n - k + 1;
  const int of_n = if_n - k + 1;
  for (int oc = 0; oc < oc_n; ++oc) {
    const double* d_plane = d_out + static_cast<size_t>(oc) * ot_n * of_n;
    double acc_b = 0.0;
    for (int i = 0; i < ot_n * of_n; ++i) acc_b += d_plane[i];
    g_b[oc] += acc_b;
    for (int ic = 0; ic < ic_n; ++ic) {
      const double* in_plane = in + static_cast<size_t>(ic) * it_n * if_n;
      double* d_in_plane = d_in ? d_in + static_cast<size_t>(ic) * it_n * if_n : nullptr;
      const size_t w_base = ((static_cast<size_t>(oc) * ic_n + ic) * k) * k;
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          const double wv = w[w_base + kh * k + kw];
          double acc = 0.0;
          for (int t = 0; t < ot_n; ++t) {
            const double* src = in_plane + static_cast<size_t>(t + kh) * if_n + kw;
            const double* d_row = d_plane + static_cast<size_t>(t) * of_n;
            if (d_in_plane) {
              double* d_dst = d_in_plane + static_cast<size_t>(t + kh) * if_n + kw;
              for (int f = 0; f < of_n; ++f) {
                acc += d_row[f] * src[f];
                d_dst[f] += wv * d_row[f];
              }
            } else {
              for (int f = 0; f < of_n; ++f) acc += d_row[f] * src[f];
            }
          }
          g_w[w_base + kh * k + kw] += acc;
        }
      }
    }
  }
}

// ReLU followed by non-overlapping max pooling; ties keep the first cell.
void maxpool_relu(const double* pre, int c_n, int t_n, int f_n, int pt, int pf, double* out,
                  int* argmax, std::uint64_t& hash) {
  const int ot_n = t_n / pt;
  const int of_n = f_n / pf;
  for (int c = 0; c < c_n; ++c) {
    const double* plane = pre + static_cast<size_t>(c) * t_n * f_n;
    for (int ot = 0; ot < ot_n; ++ot) {
      for (int of = 0; of < of_n; ++of) {
        double best = -1e300;
        int best_pos = -1;
        for (int dt = 0; dt < pt; ++dt) {
          const double* row = plane + static_cast<size_t>(ot * pt + dt) * f_n + of * pf;
          for (int df = 0; df < pf; ++df) {
            if (row[df] > best) {
              best = row[df];
              best_pos = (c * t_n + ot * pt + dt) * f_n + of * pf + df;
            }
          }
        }
        const size_t o = (static_cast<size_t>(c) * ot_n + ot) * of_n + of;
        out[o] = best > 0.0 ? best : 0.0;
        argmax[o] = best_pos;
        hash_mix(hash, static_cast<std::uint64_t>(best_pos) * 2 + (best > 0.0 ? 1 : 0));
      }
    }
  }
}

void dense_forward(const double* in, int in_n, const double* w, const double* b, int out_n,
                   double* pre) {
  for (int o = 0; o < out_n; ++o) {
    const double* row = w + static_cast<size_t>(o) * in_n;
    double acc = b[o];
    for (int i = 0; i < in_n; ++i) acc += row[i] * in[i];
    pre[o] = acc;
  }
}

void check_size(size_t got, size_t want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + " size mismatch: got " +
                                std::to_string(got) + ", expected " + std::to_string(want));
  }
}

}  // namespace

std::vector<double> forward_main(const NetworkGeometry& g, const MainBranchParams& p,
                                 std::span<const double> patch, ForwardCache* cache) {
  check_size(patch.size(), static_cast<size_t>(g.patch_frames) * g.patch_bands, "patch");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  if (c.conv1_pre.size() !=
      static_cast<size_t>(g.conv1_channels) * g.conv1_t() * g.conv1_f()) {
    c.resize(g);
  }

  conv_valid(patch.data(), 1, g.patch_frames, g.patch_bands, p.conv1_w.data(), p.conv1_b.data(),
             g.conv1_channels, g.kernel, c.conv1_pre.data());
  maxpool_relu(c.conv1_pre.data(), g.conv1_channels, g.conv1_t(), g.conv1_f(), g.pool1_t,
               g.pool1_f, c.pool1_out.data(), c.pool1_arg.data(), c.routing_hash);
  conv_valid(c.pool1_out.data(), g.conv1_channels, g.pool1_out_t(), g.pool1_out_f(),
             p.conv2_w.data(), p.conv2_b.data(), g.conv2_channels, g.kernel,
             c.conv2_pre.data());
  maxpool_relu(c.conv2_pre.data(), g.conv2_channels, g.conv2_t(), g.conv2_f(), g.pool2_t,
               g.pool2_f, c.pool2_out.data(), c.pool2_arg.data(), c.routing_hash);
  conv_valid(c.pool2_out.data(), g.conv2_channels, g.pool2_out_t(), g.pool2_out_f(),
             p.conv3_w.data(), p.conv3_b.data(), g.conv3_channels, g.kernel,
             c.conv3_pre.data());
  for (size_t i = 0; i < c.conv3_pre.size(); ++i) {
    c.conv3_act[i] = c.conv3_pre[i] > 0.0 ? c.conv3_pre[i] : 0.0;
    hash_mix(c.routing_hash, c.conv3_pre[i] > 0.0);
  }
  dense_forward(c.conv3_act.data(), g.flatten_size(), p.dense_w.data(), p.dense_b.data(),
                g.embedding, c.dense_pre.data());
  for (int o = 0; o < g.embedding; ++o) {
    c.z[o] = c.dense_pre[o] > 0.0 ? c.dense_pre[o] : 0.0;
    hash_mix(c.routing_hash, c.dense_pre[o] > 0.0);
  }
  return c.z;
}

std::vector<double> forward_aux(const NetworkGeometry& g, const AuxBranchParams& p,
                                std::span<const double> slice, ForwardCache* cache) {
  check_size(slice.size(), static_cast<size_t>(g.aux_quantiles) * g.aux_bands, "context slice");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  if (c.aux_conv_pre.size() != static_cast<size_t>(g.aux_quantiles) * g.aux_kernels) c.resize(g);

  // One full-width kernel per template: weights are shared across quantiles,
  // not across bands.
  for (int q = 0; q < g.aux_quantiles; ++q) {
    const double* row = slice.data() + static_cast<size_t>(q) * g.aux_bands;
    for (int j = 0; j < g.aux_kernels; ++j) {
      const double* w = p.conv_w.data() + static_cast<size_t>(j) * g.aux_bands;
      double acc = p.conv_b[j];
      for (int f = 0; f < g.aux_bands; ++f) acc += w[f] * row[f];
      const size_t o = static_cast<size_t>(q) * g.aux_kernels + j;
      c.aux_conv_pre[o] = acc;
      c.aux_act[o] = acc > 0.0 ? acc : 0.0;
      hash_mix(c.routing_hash, acc > 0.0);
    }
  }
  dense_forward(c.aux_act.data(), g.aux_flat_size(), p.dense_w.data(), p.dense_b.data(),
                g.embedding, c.aux_dense_pre.data());
  for (int o = 0; o < g.embedding; ++o) {
    c.z_aux[o] = c.aux_dense_pre[o] > 0.0 ? c.aux_dense_pre[o] : 0.0;
    hash_mix(c.routing_hash, c.aux_dense_pre[o] > 0.0);
  }
  return c.z_aux;
}

double merge_static(std::span<const double> z, std::span<const double> w, double b) {
  check_size(w.size(), z.size(), "merge weights");
  double acc = b;
  for (size_t n = 0; n < z.size(); ++n) acc += w[n] * z[n];
  return sigmoid(acc);
}

double merge_aw(std::span<const double> z, std::span<const double> z_aux, double b) {
  check_size(z_aux.size(), z.size(), "adaptive weights");
  double acc = b;
  for (size_t n = 0; n < z.size(); ++n) acc += z_aux[n] * z[n];
  return sigmoid(acc);
}

double merge_at(std::span<const double> z, std::span<const double> z_aux,
                std::span<const double> w, std::span<const double> w_aux) {
  check_size(w.size(), z.size(), "merge weights");
  check_size(w_aux.size(), z_aux.size(), "auxiliary weights");
  double acc = 0.0;
  for (size_t n = 0; n < z_aux.size(); ++n) acc += w_aux[n] * z_aux[n];
  for (size_t n = 0; n < z.size(); ++n) acc += w[n] * z[n];
  return sigmoid(acc);
}

double merge_moe(const NetworkGeometry& g, const MergeParams& p, std::span<const double> z,
                 std::span<const double> z_aux, std::vector<double>* gates,
                 std::vector<double>* expert_sums) {
  const int n = g.embedding, k_n = g.experts;
  if (n % k_n != 0) throw std::invalid_argument("embedding not divisible by expert count");
  check_size(z.size(), n, "z");
  check_size(z_aux.size(), n, "z_aux");
  check_size(p.w.size(), n, "merge weights");
  check_size(p.moe_w_aux.size(), n, "mixture weights");
  check_size(p.moe_b_aux.size(), k_n, "mixture biases");

  std::vector<double> alpha(k_n), sums(k_n, 0.0);
  for (int k = 0; k < k_n; ++k) alpha[k] = p.moe_b_aux[k];
  // n = K*m + k: stride-K reshape of the embedding into (mixture, expert).
  for (int i = 0; i < n; ++i) {
    const int k = i % k_n;
    alpha[k] += p.moe_w_aux[i] * z_aux[i];
    sums[k] += p.w[i] * z[i];
  }
  const double amax = *std::max_element(alpha.begin(), alpha.end());
  double denom = 0.0;
  std::vector<double> gate(k_n);
  for (int k = 0; k < k_n; ++k) {
    gate[k] = std::exp(alpha[k] - amax);
    denom += gate[k];
  }
  double acc = p.b[0];
  for (int k = 0; k < k_n; ++k) {
    gate[k] /= denom;
    acc += gate[k] * sums[k];
  }
  if (gates) *gates = gate;
  if (expert_sums) *expert_sums = sums;
  return sigmoid(acc);
}

double equivalent_threshold(double tau, std::span<const double> z_aux,
                            std::span<const double> w_aux) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must be in (0, 1)");
  check_size(w_aux.size(), z_aux.size(), "auxiliary weights");
  double shift = 0.0;
  for (size_t n = 0; n < z_aux.size(); ++n) shift += w_aux[n] * z_aux[n];
  return sigmoid(sigmoid_inv(tau) - shift);
}

double bce_loss(double y, int y_true, const MainBranchParams& main, double l2) {
  const double yc = std::clamp(y, kSigmoidClamp, 1.0 - kSigmoidClamp);
  double loss = -(y_true * std::log(yc) + (1 - y_true) * std::log(1.0 - yc));
  if (l2 > 0.0) {
    double w2 = 0.0;
    for (double w : main.dense_w) w2 += w * w;
    loss += l2 * w2;
  }
  return loss;
}

double forward(const DetectorParams& p, std::span<const double> patch,
               std::span<const double> context_slice, ForwardCache& cache) {
  const NetworkGeometry& g = p.geometry;
  cache.resize(g);
  forward_main(g, p.main, patch, &cache);
  double a = 0.0;
  switch (p.formulation()) {
    case Formulation::Static: {
      check_size(p.merge.w.size(), g.embedding, "merge weights");
      a = p.merge.b[0];
      for (int n = 0; n < g.embedding; ++n) a += p.merge.w[n] * cache.z[n];
      break;
    }
    case Formulation::AdaptiveWeights: {
      forward_aux(g, p.aux, context_slice, &cache);
      a = p.merge.b[0];
      for (int n = 0; n < g.embedding; ++n) a += cache.z_aux[n] * cache.z[n];
      break;
    }
    case Formulation::AdaptiveThreshold: {
      forward_aux(g, p.aux, context_slice, &cache);
      check_size(p.merge.w.size(), g.embedding, "merge weights");
      check_size(p.merge.w_aux.size(), g.embedding, "auxiliary weights");
      a = 0.0;
      for (int n = 0; n < g.embedding; ++n) a += p.merge.w_aux[n] * cache.z_aux[n];
      for (int n = 0; n < g.embedding; ++n) a += p.merge.w[n] * cache.z[n];
      break;
    }
    case Formulation::MixtureOfExperts: {
      forward_aux(g, p.aux, context_slice, &cache);
      merge_moe(g, p.merge, cache.z, cache.z_aux, &cache.moe_gates, &cache.moe_sums);
      a = p.merge.b[0];
      for (int k = 0; k < g.experts; ++k) a += cache.moe_gates[k] * cache.moe_sums[k];
      break;
    }
  }
  cache.logit = a;
  const double y = sigmoid(a);
  cache.clamped = y < kSigmoidClamp || y > 1.0 - kSigmoidClamp;
  cache.y = std::clamp(y, kSigmoidClamp, 1.0 - kSigmoidClamp);
  return cache.y;
}

double predict(const DetectorParams& p, std::span<const double> patch,
               std::span<const double> context_slice) {
  ForwardCache cache;
  return forward(p, patch, context_slice, cache);
}

namespace {

struct BackwardScratch {
  std::vector<double> dz, dz_aux;
  std::vector<double> d_dense_pre, d_flat, d_conv3_pre, d_pool2, d_conv2_pre, d_pool1,
      d_conv1_pre;
  std::vector<double> d_aux_dense_pre, d_aux_flat, d_aux_conv_pre;

  void resize(const NetworkGeometry& g) {
    dz.assign(g.embedding, 0.0);
    dz_aux.assign(g.embedding, 0.0);
    d_dense_pre.assign(g.embedding, 0.0);
    d_flat.assign(g.flatten_size(), 0.0);
    d_conv3_pre.assign(static_cast<size_t>(g.conv3_channels) * g.conv3_t() * g.conv3_f(), 0.0);
    d_pool2.assign(static_cast<size_t>(g.conv2_channels) * g.pool2_out_t() * g.pool2_out_f(),
                   0.0);
    d_conv2_pre.assign(static_cast<size_t>(g.conv2_channels) * g.conv2_t() * g.conv2_f(), 0.0);
    d_pool1.assign(static_cast<size_t>(g.conv1_channels) * g.pool1_out_t() * g.pool1_out_f(),
                   0.0);
    d_conv1_pre.assign(static_cast<size_t>(g.conv1_channels) * g.conv1_t() * g.conv1_f(), 0.0);
    d_aux_dense_pre.assign(g.embedding, 0.0);
    d_aux_flat.assign(g.aux_flat_size(), 0.0);
    d_aux_conv_pre.assign(static_cast<size_t>(g.aux_quantiles) * g.aux_kernels, 0.0);
  }

  void zero() {
    for (auto* v : {&dz, &dz_aux, &d_dense_pre, &d_flat, &d_conv3_pre, &d_pool2, &d_conv2_pre,
                    &d_pool1, &d_conv1_pre, &d_aux_dense_pre, &d_aux_flat, &d_aux_conv_pre}) {
      std::fill(v->begin(), v->end(), 0.0);
    }
  }
};

// Backpropagates d(loss)/d(logit) through the merge and both branches.
void accumulate_example(const DetectorParams& p, const ForwardCache& c,
                        std::span<const double> patch, std::span<const double> slice,
                        double d_logit, Gradients& g, BackwardScratch& s) {
  const NetworkGeometry& geom = p.geometry;
  const int n = geom.embedding;
  s.zero();
  const bool has_aux = p.formulation() != Formulation::Static;

  switch (p.formulation()) {
    case Formulation::Static:
      g.merge.b[0] += d_logit;
      for (int i = 0; i < n; ++i) {
        g.merge.w[i] += d_logit * c.z[i];
        s.dz[i] = d_logit * p.merge.w[i];
      }
      break;
    case Formulation::AdaptiveWeights:
      g.merge.b[0] += d_logit;
      for (int i = 0; i < n; ++i) {
        s.dz[i] = d_logit * c.z_aux[i];
        s.dz_aux[i] = d_logit * c.z[i];
      }
      break;
    case Formulation::AdaptiveThreshold:
      for (int i = 0; i < n; ++i) {
        g.merge.w[i] += d_logit * c.z[i];
        g.merge.w_aux[i] += d_logit * c.z_aux[i];
        s.dz[i] = d_logit * p.merge.w[i];
        s.dz_aux[i] = d_logit * p.merge.w_aux[i];
      }
      break;
    case Formulation::MixtureOfExperts: {
      const int k_n = geom.experts;
      g.merge.b[0] += d_logit;
      double mix = 0.0;
      for (int k = 0; k < k_n; ++k) mix += c.moe_gates[k] * c.moe_sums[k];
      for (int i = 0; i < n; ++i) {
        const int k = i % k_n;
        const double gk = c.moe_gates[k];
        g.merge.w[i] += d_logit * gk * c.z[i];
        s.dz[i] = d_logit * gk * p.merge.w[i];
      }
      for (int k = 0; k < k_n; ++k) {
        const double d_alpha = d_logit * c.moe_gates[k] * (c.moe_sums[k] - mix);
        g.merge.moe_b_aux[k] += d_alpha;
        for (int m = 0; m < geom.mixture_size(); ++m) {
          const int i = k_n * m + k;
          g.merge.moe_w_aux[i] += d_alpha * c.z_aux[i];
          s.dz_aux[i] += d_alpha * p.merge.moe_w_aux[i];
        }
      }
      break;
    }
  }

  // main dense layer
  const int flat = geom.flatten_size();
  for (int o = 0; o < n; ++o) {
    const double d = c.dense_pre[o] > 0.0 ? s.dz[o] : 0.0;
    s.d_dense_pre[o] = d;
    if (d == 0.0) continue;
    g.main.dense_b[o] += d;
    double* gw = g.main.dense_w.data() + static_cast<size_t>(o) * flat;
    const double* w = p.main.dense_w.data() + static_cast<size_t>(o) * flat;
    const double* act = c.conv3_act.data();
    double* df = s.d_flat.data();
    for (int i = 0; i < flat; ++i) {
      gw[i] += d * act[i];
      df[i] += d * w[i];
    }
  }

  // conv3 (no pooling)
  for (size_t i = 0; i < s.d_conv3_pre.size(); ++i) {
    s.d_conv3_pre[i] = c.conv3_pre[i] > 0.0 ? s.d_flat[i] : 0.0;
  }
  conv_backward(c.pool2_out.data(), geom.conv2_channels, geom.pool2_out_t(), geom.pool2_out_f(),
                p.main.conv3_w.data(), s.d_conv3_pre.data(), geom.conv3_channels, geom.kernel,
                g.main.conv3_w.data(), g.main.conv3_b.data(), s.d_pool2.data());

  // pool2 routes into conv2 ReLU
  for (size_t i = 0; i < s.d_pool2.size(); ++i) {
    const int pos = c.pool2_arg[i];
    if (pos >= 0 && c.conv2_pre[pos] > 0.0) s.d_conv2_pre[pos] += s.d_pool2[i];
  }
  conv_backward(c.pool1_out.data(), geom.conv1_channels, geom.pool1_out_t(), geom.pool1_out_f(),
                p.main.conv2_w.data(), s.d_conv2_pre.data(), geom.conv2_channels, geom.kernel,
                g.main.conv2_w.data(), g.main.conv2_b.data(), s.d_pool1.data());

  for (size_t i = 0; i < s.d_pool1.size(); ++i) {
    const int pos = c.pool1_arg[i];
    if (pos >= 0 && c.conv1_pre[pos] > 0.0) s.d_conv1_pre[pos] += s.d_pool1[i];
  }
  conv_backward(patch.data(), 1, geom.patch_frames, geom.patch_bands, p.main.conv1_w.data(),
                s.d_conv1_pre.data(), geom.conv1_channels, geom.kernel, g.main.conv1_w.data(),
                g.main.conv1_b.data(), nullptr);

  if (!has_aux) return;

  // auxiliary dense layer
  const int aux_flat = geom.aux_flat_size();
  for (int o = 0; o < n; ++o) {
    const double d = c.aux_dense_pre[o] > 0.0 ? s.dz_aux[o] : 0.0;
    if (d == 0.0) continue;
    g.aux.dense_b[o] += d;
    double* gw = g.aux.dense_w.data() + static_cast<size_t>(o) * aux_flat;
    const double* w = p.aux.dense_w.data() + static_cast<size_t>(o) * aux_flat;
    for (int i = 0; i < aux_flat; ++i) {
      gw[i] += d * c.aux_act[i];
      s.d_aux_flat[i] += d * w[i];
    }
  }
  for (int i = 0; i < aux_flat; ++i) {
    s.d_aux_conv_pre[i] = c.aux_conv_pre[i] > 0.0 ? s.d_aux_flat[i] : 0.0;
  }
  for (int q = 0; q < geom.aux_quantiles; ++q) {
    const double* row = slice.data() + static_cast<size_t>(q) * geom.aux_bands;
    for (int j = 0; j < geom.aux_kernels; ++j) {
      const double d = s.d_aux_conv_pre[static_cast<size_t>(q) * geom.aux_kernels + j];
      if (d == 0.0) continue;
      g.aux.conv_b[j] += d;
      double* gw = g.aux.conv_w.data() + static_cast<size_t>(j) * geom.aux_bands;
      for (int f = 0; f < geom.aux_bands; ++f) gw[f] += d * row[f];
    }
  }
}

}  // namespace

double backward(const DetectorParams& p, std::span<const TrainExample* const> batch, double l2,
                Gradients& grads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  ForwardCache cache;
  BackwardScratch scratch;
  scratch.resize(p.geometry);
  const double inv_b = 1.0 / batch.size();
  double loss = 0.0;
  for (const TrainExample* ex : batch) {
    const double y = forward(p, ex->patch, ex->context, cache);
    loss += bce_loss(y, ex->label, p.main, 0.0) * inv_b;
    const double d_logit = cache.clamped ? 0.0 : (cache.y - ex->label) * inv_b;
    accumulate_example(p, cache, ex->patch, ex->context, d_logit, grads, scratch);
  }
  if (l2 > 0.0) {
    double w2 = 0.0;
    for (size_t i = 0; i < p.main.dense_w.size(); ++i) {
      grads.main.dense_w[i] += 2.0 * l2 * p.main.dense_w[i];
      w2 += p.main.dense_w[i] * p.main.dense_w[i];
    }
    loss += l2 * w2;
  }
  return loss;
}

void adam_step(DetectorParams& params, const Gradients& grads, AdamState& state) {
  auto pt = parameter_tensors(params);
  Gradients& g_mut = const_cast<Gradients&>(grads);
  auto gt = gradient_tensors(g_mut, params.formulation());
  if (pt.size() != gt.size()) throw std::invalid_argument("parameter/gradient mismatch");
  if (state.m.empty()) {
    state.m.resize(pt.size());
    state.v.resize(pt.size());
    for (size_t i = 0; i < pt.size(); ++i) {
      state.m[i].assign(pt[i].data->size(), 0.0);
      state.v[i].assign(pt[i].data->size(), 0.0);
    }
  }
  if (state.m.size() != pt.size()) throw std::invalid_argument("Adam state shape mismatch");
  state.step++;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  for (size_t i = 0; i < pt.size(); ++i) {
    std::vector<double>& w = *pt[i].data;
    const std::vector<double>& g = *gt[i].data;
    if (w.size() != g.size() || state.m[i].size() != w.size()) {
      throw std::invalid_argument("Adam state shape mismatch for " + pt[i].name);
    }
    for (size_t j = 0; j < w.size(); ++j) {
      state.m[i][j] = state.beta1 * state.m[i][j] + (1.0 - state.beta1) * g[j];
      state.v[i][j] = state.beta2 * state.v[i][j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = state.m[i][j] / bc1;
      const double vhat = state.v[i][j] / bc2;
      w[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double validation_accuracy(const DetectorParams& p, std::span<const TrainExample> set) {
  if (set.empty()) return 0.0;
  ForwardCache cache;
  int correct = 0;
  for (const auto& ex : set) {
    const double y = forward(p, ex.patch, ex.context, cache);
    if (std::abs(y - ex.label) < 0.5) correct++;
  }
  return static_cast<double>(correct) / set.size();
}

TrainResult train(std::span<const TrainExample> train_set, std::span<const TrainExample> val_set,
                  const DetectorParams& init, const TrainConfig& cfg) {
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  std::vector<const TrainExample*> pos, neg;
  for (const auto& ex : train_set) (ex.label ? pos : neg).push_back(&ex);
  if (pos.empty() || neg.empty()) {
    throw std::invalid_argument("training set must contain both classes");
  }

  TrainResult result;
  result.params = init;
  if (cfg.max_epochs <= 0) return result;

  DetectorParams best = init;
  double best_acc = -1.0;
  int best_epoch = -1;

  AdamState adam;
  adam.lr = cfg.lr;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.adam_eps;

  std::mt19937_64 rng(cfg.seed);
  Gradients grads = zero_gradients(init);
  auto grad_tensors = gradient_tensors(grads, init.formulation());

  const int batch = std::max(2, cfg.batch_size);
  const int half = batch / 2;
  const int steps = static_cast<int>((train_set.size() + batch - 1) / batch);
  const std::span<const TrainExample> val =
      val_set.empty() ? train_set : val_set;

  size_t pos_cursor = 0, neg_cursor = 0;
  std::vector<const TrainExample*> batch_ptrs(batch);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    pos_cursor = neg_cursor = 0;
    double epoch_loss = 0.0;
    for (int step = 0; step < steps; ++step) {
      for (int i = 0; i < half; ++i) {
        batch_ptrs[i] = pos[pos_cursor++ % pos.size()];
        batch_ptrs[half + i] = neg[neg_cursor++ % neg.size()];
      }
      for (int i = 2 * half; i < batch; ++i) {
        batch_ptrs[i] = pos[pos_cursor++ % pos.size()];
      }
      for (auto& t : grad_tensors) std::fill(t.data->begin(), t.data->end(), 0.0);
      epoch_loss += backward(result.params, batch_ptrs, cfg.l2, grads);
      adam_step(result.params, grads, adam);
    }
    const double acc = validation_accuracy(result.params, val);
    result.history.push_back({epoch, epoch_loss / steps, acc});
    if (acc > best_acc) {
      best_acc = acc;
      best = result.params;
      best_epoch = epoch;
    }
    if (epoch - best_epoch >= cfg.patience) break;
  }

  result.params = std::move(best);
  result.best_epoch = best_epoch;
  return result;
}

}  // namespace rsed
