#pragma once

// Training-free accuracy proxies over an instantiated Network. Every score is
// a pure function of (spec, macro, config, seed): all randomness comes from
// streams derived from the config seed, and proxies that perturb parameters
// restore them before returning.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "zeronas/arch.hpp"
#include "zeronas/common.hpp"
#include "zeronas/linalg.hpp"
#include "zeronas/macro.hpp"
#include "zeronas/network.hpp"
#include "zeronas/rng.hpp"
#include "zeronas/tensor.hpp"
#include "zeronas/topology.hpp"

namespace zeronas {

enum class Outcome { ok, ill_conditioned, singular, error };

inline std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::ok: return "ok";
    case Outcome::ill_conditioned: return "ill_conditioned";
    case Outcome::singular: return "singular";
    case Outcome::error: return "error";
  }
  throw Error("invalid Outcome value");
}

struct ProxyConfig {
  int batch = 16;
  std::string input_file;  // optional file-backed input batch (JSON, see README)
  std::uint64_t init_seed = 0;
  double zen_alpha = 0.01;
  int zen_repeats = 8;
  bool zen_reinit = true;  // redraw weights N(0,1) inside zen, as its protocol asks
  int ntk_batch = 8;
  int ntk_seeds = 3;
  double epsilon = 1e-5;      // numeric stabilizer for the covariance spectrum
  double hvp_epsilon = 0.0;   // 0 selects 1e-3 * (1 + max|theta|)
  double loss_sign = 1.0;     // multiplier on the curvature-stage loss (grasp)
  enum class RegionScope { cells, all };
  RegionScope region_scope = RegionScope::cells;

  void validate() const {
    if (batch < 2) throw Error("proxy config: batch must be >= 2");
    if (ntk_batch < 2) throw Error("proxy config: ntk_batch must be >= 2");
    if (ntk_seeds < 1) throw Error("proxy config: ntk_seeds must be >= 1");
    if (zen_alpha <= 0.0) throw Error("proxy config: zen_alpha must be > 0");
    if (zen_repeats < 1) throw Error("proxy config: zen_repeats must be >= 1");
    if (epsilon <= 0.0) throw Error("proxy config: epsilon must be > 0");
    if (loss_sign != 1.0 && loss_sign != -1.0)
      throw Error("proxy config: loss_sign must be +1 or -1");
  }

  std::string fingerprint_text() const {
    std::string s = "b=" + std::to_string(batch);
    s += ";in=" + (input_file.empty() ? std::string("gauss") : input_file);
    s += ";za=" + std::to_string(zen_alpha);
    s += ";zr=" + std::to_string(zen_repeats);
    s += ";zi=" + std::to_string(zen_reinit ? 1 : 0);
    s += ";nm=" + std::to_string(ntk_batch);
    s += ";ne=" + std::to_string(ntk_seeds);
    s += ";eps=" + std::to_string(epsilon);
    s += ";heps=" + std::to_string(hvp_epsilon);
    s += ";ls=" + std::to_string(loss_sign);
    s += ";rs=" + std::string(region_scope == RegionScope::cells ? "cells" : "all");
    return s;
  }
};

struct ProxyScore {
  std::string arch;
  std::int64_t arch_index = -1;
  std::string proxy;
  double value = 0.0;
  Outcome outcome = Outcome::ok;
  std::uint64_t seed = 0;
  std::string fingerprint;
  std::vector<std::string> diagnostics;
  std::string error;

  bool ok() const { return outcome == Outcome::ok; }
};

struct ProxyInfo {
  std::string id;
  bool higher_is_better;
  bool needs_network;  // false for the analytic/topology proxies
};

inline const std::vector<ProxyInfo>& proxy_registry() {
  static const std::vector<ProxyInfo> reg = {
      {"grad_norm", true, true},  {"snip", true, true},      {"synflow", true, true},
      {"grasp", true, true},      {"gradsign", true, true},  {"fisher", true, true},
      {"jacob_cov", true, true},  {"zen", true, true},       {"ntk_cond", false, true},
      {"regions", true, true},    {"logdet", true, true},    {"nn_mass", true, false},
      {"nn_degree", true, false}, {"params", true, false},   {"flops", true, false},
  };
  return reg;
}

inline const ProxyInfo* find_proxy(std::string_view id) {
  for (const auto& p : proxy_registry())
    if (p.id == id) return &p;
  return nullptr;
}

// ---------------------------------------------------------------------------
// input batches and labels

inline TensorPtr load_input_batch(const std::string& path, int batch, const MacroConfig& macro) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input batch file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("input batch file " + path + " is not valid JSON: " + e.what());
  }
  const auto shape = j.at("shape").get<std::vector<int>>();
  if (shape.size() != 4 || shape[1] != macro.input_channels ||
      shape[2] != macro.input_resolution || shape[3] != macro.input_resolution)
    throw Error("input batch file " + path + " shape does not match macro config");
  if (shape[0] < batch)
    throw Error("input batch file " + path + " has " + std::to_string(shape[0]) +
                " samples, need " + std::to_string(batch));
  auto data = j.at("data").get<std::vector<double>>();
  const std::size_t need = static_cast<std::size_t>(batch) * shape[1] * shape[2] * shape[3];
  if (data.size() < need) throw Error("input batch file " + path + " data too short");
  data.resize(need);
  return make_tensor({batch, shape[1], shape[2], shape[3]}, std::move(data));
}

inline TensorPtr make_input_batch(const ProxyConfig& cfg, const MacroConfig& macro,
                                  int batch = 0) {
  if (batch <= 0) batch = cfg.batch;
  if (!cfg.input_file.empty()) return load_input_batch(cfg.input_file, batch, macro);
  RngState rng = RngState(cfg.init_seed).derive("input");
  auto x = make_tensor({batch, macro.input_channels, macro.input_resolution,
                        macro.input_resolution});
  for (double& v : x->data) v = rng.normal();
  return x;
}

inline std::vector<int> make_labels(const ProxyConfig& cfg, const MacroConfig& macro,
                                    int batch = 0) {
  if (batch <= 0) batch = cfg.batch;
  RngState rng = RngState(cfg.init_seed).derive("labels");
  std::vector<int> labels(static_cast<std::size_t>(batch));
  for (int& l : labels)
    l = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(macro.num_classes)));
  return labels;
}

// ---------------------------------------------------------------------------
// gradient-based proxies

namespace detail {

struct CeBackwardResult {
  ForwardTrace trace;
  TensorPtr input;
  std::vector<int> labels;
  double loss = 0.0;
};

// One forward + backward of the seeded cross-entropy loss; leaves gradients
// populated on parameters, activations and (optionally) the input.
inline CeBackwardResult run_ce_backward(const Network& net, const ProxyConfig& cfg,
                                        double loss_scale, bool input_grad) {
  CeBackwardResult r;
  r.input = make_input_batch(cfg, net.macro);
  r.input->requires_grad = input_grad;
  r.labels = make_labels(cfg, net.macro);
  Tape tape;
  r.trace = net.forward(tape, r.input);
  TensorPtr loss = softmax_cross_entropy(tape, r.trace.output, r.labels);
  if (loss_scale != 1.0) loss = scale(tape, loss, loss_scale);
  r.loss = loss->data[0];
  tape.backward(loss);
  return r;
}

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

struct CeFamilyScores {
  double grad_norm = 0.0;
  double snip = 0.0;
  double fisher = 0.0;
  std::vector<std::string> diagnostics;
};

// grad_norm, snip and fisher share one forward/backward pass by definition.
inline CeFamilyScores compute_ce_family(const Network& net, const ProxyConfig& cfg) {
  net.clear_param_grads();
  auto pass = detail::run_ce_backward(net, cfg, 1.0, /*input_grad=*/false);
  CeFamilyScores out;
  out.diagnostics = pass.trace.diagnostics;

  for (const ParamLayer* l : net.conv_linear_layers()) {
    if (!l->weight->has_grad()) continue;  // layer unreachable from the loss
    double norm_sq = 0.0, inner = 0.0;
    for (std::size_t i = 0; i < l->weight->data.size(); ++i) {
      const double g = l->weight->grad[i];
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in layer " + l->name);
      norm_sq += g * g;
      inner += g * l->weight->data[i];
    }
    out.grad_norm += std::sqrt(norm_sq);
    out.snip += std::abs(inner);
  }

  for (const auto& cap : pass.trace.bn) {
    if (!cap.out->has_grad()) {
      out.diagnostics.push_back(net.layers[static_cast<std::size_t>(cap.layer)].name +
                                ": no activation gradient, contributes 0");
      continue;
    }
    const int channels = cap.out->shape[1];
    const int batch = cap.out->shape[0];
    const int plane = cap.out->shape[2] * cap.out->shape[3];
    for (int c = 0; c < channels; ++c) {
      double s = 0.0;
      for (int n = 0; n < batch; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * channels + c) * plane;
        for (int i = 0; i < plane; ++i) s += cap.out->data[base + i] * cap.out->grad[base + i];
      }
      out.fisher += s * s;
    }
  }
  return out;
}

inline double grad_norm(const Network& net, const ProxyConfig& cfg) {
  return compute_ce_family(net, cfg).grad_norm;
}

inline double snip(const Network& net, const ProxyConfig& cfg) {
  return compute_ce_family(net, cfg).snip;
}

inline double fisher(const Network& net, const ProxyConfig& cfg) {
  return compute_ce_family(net, cfg).fisher;
}

// Synflow protocol: every conv/linear weight replaced by its absolute value,
// all-ones single-sample input, batchnorm in pass-through mode, scalar loss =
// sum of raw outputs. Parameters are restored exactly afterwards.
inline double synflow(const Network& net, const ProxyConfig& cfg) {
  (void)cfg;
  const std::vector<TensorPtr> params = net.conv_linear_params();
  const std::vector<double> saved = flatten_values(params);
  for (const auto& p : params)
    for (double& v : p->data) v = std::abs(v);
  net.clear_param_grads();

  double score = 0.0;
  try {
    auto input = make_tensor({1, net.macro.input_channels, net.macro.input_resolution,
                              net.macro.input_resolution});
    std::fill(input->data.begin(), input->data.end(), 1.0);
    Tape tape;
    ForwardOptions opts;
    opts.bn_passthrough = true;
    opts.check_finite = true;
    ForwardTrace trace = net.forward(tape, input, opts);
    if (!trace.first_nonfinite.empty())
      throw NumericError("synflow overflowed to a non-finite value at layer '" +
                         trace.first_nonfinite +
                         "'; rescale layers before scoring networks this deep");
    TensorPtr loss = sum_all(tape, trace.output);
    tape.backward(loss);
    for (const auto& p : params) {
      if (!p->has_grad()) continue;
      for (std::size_t i = 0; i < p->data.size(); ++i) score += p->data[i] * p->grad[i];
    }
  } catch (...) {
    assign_values(params, saved);
    throw;
  }
  assign_values(params, saved);
  if (!std::isfinite(score))
    throw NumericError("synflow score overflowed; rescale layers before scoring");
  return score;
}

// Per-layer signed inner products <theta_i, grad_i> under the synflow
// protocol; used by the conservation checks.
inline std::vector<double> synflow_layer_terms(const Network& net) {
  const std::vector<TensorPtr> params = net.conv_linear_params();
  const std::vector<double> saved = flatten_values(params);
  for (const auto& p : params)
    for (double& v : p->data) v = std::abs(v);
  net.clear_param_grads();
  std::vector<double> terms;
  try {
    auto input = make_tensor({1, net.macro.input_channels, net.macro.input_resolution,
                              net.macro.input_resolution});
    std::fill(input->data.begin(), input->data.end(), 1.0);
    Tape tape;
    ForwardOptions opts;
    opts.bn_passthrough = true;
    ForwardTrace trace = net.forward(tape, input, opts);
    TensorPtr loss = sum_all(tape, trace.output);
    tape.backward(loss);
    for (const auto& p : params) {
      double t = 0.0;
      if (p->has_grad())
        for (std::size_t i = 0; i < p->data.size(); ++i) t += p->data[i] * p->grad[i];
      terms.push_back(t);
    }
  } catch (...) {
    assign_values(params, saved);
    throw;
  }
  assign_values(params, saved);
  return terms;
}

// The GraSP accumulation: -sum_i <(Hg)_i, theta_i> over per-layer blocks.
inline double grasp_score_from(std::span<const TensorPtr> params,
                               std::span<const double> hg) {
  if (static_cast<std::int64_t>(hg.size()) != total_numel(params))
    throw Error("grasp_score_from: Hg length does not match the parameter count");
  double score = 0.0;
  std::size_t off = 0;
  for (const auto& p : params) {
    double inner = 0.0;
    for (std::size_t i = 0; i < p->data.size(); ++i) inner += hg[off + i] * p->data[i];
    score -= inner;
    off += p->data.size();
  }
  return score;
}

// GraSP: -sum_i <H_i g_i, theta_i>. The direction g always comes from the
// unscaled loss; cfg.loss_sign applies to the loss differentiated inside the
// Hessian-vector stage, which makes the score linear in that loss.
inline double grasp(const Network& net, const ProxyConfig& cfg) {
  const std::vector<TensorPtr> params = net.conv_linear_params();
  net.clear_param_grads();
  detail::run_ce_backward(net, cfg, 1.0, /*input_grad=*/false);
  const std::vector<double> direction = flatten_grads(params);

  auto grad_fn = [&]() {
    net.clear_param_grads();
    detail::run_ce_backward(net, cfg, cfg.loss_sign, /*input_grad=*/false);
    return flatten_grads(params);
  };
  const std::vector<double> hg = hvp(grad_fn, params, direction, cfg.hvp_epsilon);
  return grasp_score_from(params, hg);
}

// Gradient magnitudes at or below this are treated as zero when taking
// signs: structurally-cancelled gradients (e.g. batchnorm affine terms whose
// contributions sum to zero analytically) come out as ~1e-18 float residue,
// and sign(0) = 0 must apply to them.
constexpr double kGradSignZeroTolerance = 1e-10;

// GradSign: per-sample gradient sign agreement, summed over all trainable
// parameters. sign(0) = 0 with the residue tolerance above.
inline double gradsign(const Network& net, const ProxyConfig& cfg) {
  const std::vector<TensorPtr> params = net.all_params();
  const std::int64_t total = total_numel(params);
  std::vector<double> sign_sums(static_cast<std::size_t>(total), 0.0);

  TensorPtr batch = make_input_batch(cfg, net.macro);
  const std::vector<int> labels = make_labels(cfg, net.macro);
  const int c = batch->shape[1], h = batch->shape[2], w = batch->shape[3];
  const std::size_t sample_size = static_cast<std::size_t>(c) * h * w;

  for (int s = 0; s < cfg.batch; ++s) {
    auto x = make_tensor({1, c, h, w});
    std::copy(batch->data.begin() + static_cast<std::ptrdiff_t>(s * sample_size),
              batch->data.begin() + static_cast<std::ptrdiff_t>((s + 1) * sample_size),
              x->data.begin());
    for (const auto& p : params) p->clear_grad();
    Tape tape;
    ForwardTrace trace = net.forward(tape, x);
    TensorPtr loss =
        softmax_cross_entropy(tape, trace.output, {labels[static_cast<std::size_t>(s)]});
    tape.backward(loss);
    const std::vector<double> g = flatten_grads(params);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!std::isfinite(g[k]))
        throw NumericError("gradsign: non-finite per-sample gradient (sample " +
                           std::to_string(s) + ")");
      if (std::abs(g[k]) <= kGradSignZeroTolerance) continue;
      sign_sums[k] += g[k] > 0.0 ? 1.0 : -1.0;
    }
  }
  double score = 0.0;
  for (double v : sign_sums) score += std::abs(v);
  return score;
}

// The normalized Jacobian covariance matrix (unit diagonal, batch x batch)
// over input gradients of the scalar output-sum; one backward populates all
// per-sample rows.
inline std::vector<double> jacob_cov_matrix(const Network& net, const ProxyConfig& cfg) {
  net.clear_param_grads();
  TensorPtr input = make_input_batch(cfg, net.macro);
  input->requires_grad = true;
  Tape tape;
  ForwardTrace trace = net.forward(tape, input);
  TensorPtr loss = sum_all(tape, trace.output);
  tape.backward(loss);
  // An input that never receives a gradient means every Jacobian row is zero.
  if (!input->has_grad())
    throw NumericError(
        "jacob_cov: degenerate Jacobian row (sample 0 has zero variance; the output does not "
        "depend on the input)");

  const int b = input->shape[0];
  const std::size_t dim = input->data.size() / static_cast<std::size_t>(b);
  // Row-centered covariance.
  std::vector<double> centered(input->grad);
  for (int i = 0; i < b; ++i) {
    double* row = centered.data() + static_cast<std::size_t>(i) * dim;
    double mean = 0.0;
    for (std::size_t k = 0; k < dim; ++k) mean += row[k];
    mean /= static_cast<double>(dim);
    for (std::size_t k = 0; k < dim; ++k) row[k] -= mean;
  }
  std::vector<double> g(static_cast<std::size_t>(b) * b, 0.0);
  for (int i = 0; i < b; ++i)
    for (int j = i; j < b; ++j) {
      double acc = 0.0;
      const double* ri = centered.data() + static_cast<std::size_t>(i) * dim;
      const double* rj = centered.data() + static_cast<std::size_t>(j) * dim;
      for (std::size_t k = 0; k < dim; ++k) acc += ri[k] * rj[k];
      g[static_cast<std::size_t>(i) * b + j] = acc;
      g[static_cast<std::size_t>(j) * b + i] = acc;
    }
  for (int i = 0; i < b; ++i)
    if (g[static_cast<std::size_t>(i) * b + i] <= 0.0)
      throw NumericError("jacob_cov: degenerate Jacobian row (sample " + std::to_string(i) +
                         " has zero variance)");
  std::vector<double> gamma(g.size());
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j)
      gamma[static_cast<std::size_t>(i) * b + j] =
          g[static_cast<std::size_t>(i) * b + j] /
          std::sqrt(g[static_cast<std::size_t>(i) * b + i] * g[static_cast<std::size_t>(j) * b + j]);
  return gamma;
}

inline double jacob_cov(const Network& net, const ProxyConfig& cfg) {
  const std::vector<double> gamma = jacob_cov_matrix(net, cfg);
  const int b = cfg.batch;
  const std::vector<double> eig = jacobi_eigenvalues(gamma, b);
  double trace_sum = 0.0;
  for (double l : eig) trace_sum += l;
  if (std::abs(trace_sum - b) > 1e-8 * std::max(1.0, static_cast<double>(b)))
    throw NumericError("jacob_cov: eigenvalue sum " + std::to_string(trace_sum) +
                       " deviates from trace " + std::to_string(b));
  double score = 0.0;
  for (double l : eig) score -= (l + cfg.epsilon) + 1.0 / (l + cfg.epsilon);
  return score;
}

// ---------------------------------------------------------------------------
// zen score

using FeatureFn = std::function<TensorPtr(Tape&, const TensorPtr&)>;

// Monte-Carlo mean of ||fe(n) - fe(n + alpha*eps)||_F over `repeats` draws of
// (n, eps); the Gaussian-complexity term of the zen score.
inline double zen_perturbation_mean(const FeatureFn& fe, const std::vector<int>& input_shape,
                                    double alpha, int repeats, RngState rng) {
  double sum = 0.0;
  for (int r = 0; r < repeats; ++r) {
    auto base = make_tensor(input_shape);
    for (double& v : base->data) v = rng.normal();
    auto shifted = make_tensor(input_shape);
    for (std::size_t i = 0; i < shifted->data.size(); ++i)
      shifted->data[i] = base->data[i] + alpha * rng.normal();
    Tape tape;
    TensorPtr f1 = fe(tape, base);
    Tape tape2;
    TensorPtr f2 = fe(tape2, shifted);
    double d = 0.0;
    for (std::size_t i = 0; i < f1->data.size(); ++i) {
      const double diff = f1->data[i] - f2->data[i];
      d += diff * diff;
    }
    sum += std::sqrt(d);
  }
  return sum / repeats;
}

struct ZenResult {
  double value = 0.0;
  double perturbation_term = 0.0;
  double bn_term = 0.0;
  std::vector<std::string> diagnostics;
};

// sum over batchnorm layers of log sqrt(mean_j variance_j).
inline double zen_bn_term(const std::vector<BnCapture>& bns) {
  double term = 0.0;
  for (const auto& cap : bns) {
    double mean_var = 0.0;
    for (double v : cap.variances) mean_var += v;
    mean_var /= static_cast<double>(cap.variances.size());
    term += std::log(std::sqrt(mean_var));
  }
  return term;
}

// log E ||fe(n) - fe(n + alpha*eps)||_F plus, per batchnorm layer of the
// feature extractor, log sqrt(mean_j variance_j) of the batch variances.
inline ZenResult zen_score(const Network& net, const ProxyConfig& cfg) {
  const std::vector<TensorPtr> params = net.all_params();
  const std::vector<double> saved = flatten_values(params);
  ZenResult out;
  try {
    if (cfg.zen_reinit) {
      RngState rng = RngState(cfg.init_seed).derive("zen_reinit");
      net.reinit_gaussian(rng, /*kaiming=*/false);
    }
    const std::vector<int> shape = {cfg.batch, net.macro.input_channels,
                                    net.macro.input_resolution, net.macro.input_resolution};
    ForwardOptions opts;
    opts.feature_extractor_only = true;
    ForwardTrace bn_trace;  // of the first clean pass, for the variance term
    bool captured = false;
    FeatureFn fe = [&](Tape& tape, const TensorPtr& x) {
      ForwardTrace t = net.forward(tape, x, opts);
      if (!captured) {
        bn_trace = t;
        captured = true;
      }
      return t.output;
    };
    const double mean_delta = zen_perturbation_mean(
        fe, shape, cfg.zen_alpha, cfg.zen_repeats, RngState(cfg.init_seed).derive("zen_mc"));
    if (!(mean_delta > 0.0))
      throw NumericError("zen: degenerate feature extractor (perturbation norm is zero)");
    out.perturbation_term = std::log(mean_delta);
    out.bn_term = zen_bn_term(bn_trace.bn);
    out.diagnostics = bn_trace.diagnostics;
    out.value = out.perturbation_term + out.bn_term;
  } catch (...) {
    assign_values(params, saved);
    throw;
  }
  assign_values(params, saved);
  return out;
}

// ---------------------------------------------------------------------------
// NTK condition number

struct NtkResult {
  double value = 0.0;  // mean of lambda_max / lambda_min over seeds
  Outcome outcome = Outcome::ok;
  std::vector<std::string> diagnostics;
};

// Gram matrix K[s][t] = <row_s, row_t> of per-sample Jacobian rows.
inline std::vector<double> ntk_gram(const std::vector<std::vector<double>>& rows) {
  const int m = static_cast<int>(rows.size());
  std::vector<double> gram(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < rows[static_cast<std::size_t>(i)].size(); ++k)
        v += rows[static_cast<std::size_t>(i)][k] * rows[static_cast<std::size_t>(j)][k];
      gram[static_cast<std::size_t>(i) * m + j] = v;
      gram[static_cast<std::size_t>(j) * m + i] = v;
    }
  return gram;
}

struct NtkSeedOutcome {
  double cond = 0.0;
  bool ill_conditioned = false;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

// Spectrum ratio of one seed's Gram; the ill-conditioned sentinel fires when
// the smallest eigenvalue falls below 1e-12 of the largest.
inline NtkSeedOutcome ntk_cond_from_rows(const std::vector<std::vector<double>>& rows) {
  const int m = static_cast<int>(rows.size());
  const std::vector<double> eig = jacobi_eigenvalues(ntk_gram(rows), m);
  NtkSeedOutcome out;
  out.lambda_min = eig.front();
  out.lambda_max = eig.back();
  if (out.lambda_max <= 0.0 || out.lambda_min <= 1e-12 * out.lambda_max) {
    out.ill_conditioned = true;
    return out;
  }
  out.cond = out.lambda_max / out.lambda_min;
  return out;
}

// Gram matrix of per-sample parameter Jacobians of the scalar logit sum,
// averaged spectrum ratio over `ntk_seeds` fresh (input, init) draws. Returns
// the ill-conditioned sentinel when the smallest eigenvalue vanishes.
inline NtkResult ntk_cond(const Network& net, const ProxyConfig& cfg) {
  const std::vector<TensorPtr> params = net.all_params();
  const std::vector<double> saved = flatten_values(params);
  NtkResult out;
  double acc = 0.0;
  try {
    const int m = cfg.ntk_batch;
    for (int e = 0; e < cfg.ntk_seeds; ++e) {
      RngState init_rng = RngState(cfg.init_seed).derive("ntk_init", static_cast<std::uint64_t>(e));
      net.reinit_gaussian(init_rng, /*kaiming=*/true);
      RngState x_rng = RngState(cfg.init_seed).derive("ntk_input", static_cast<std::uint64_t>(e));

      std::vector<std::vector<double>> rows;
      rows.reserve(static_cast<std::size_t>(m));
      for (int s = 0; s < m; ++s) {
        auto x = make_tensor({1, net.macro.input_channels, net.macro.input_resolution,
                              net.macro.input_resolution});
        for (double& v : x->data) v = x_rng.normal();
        net.clear_param_grads();
        Tape tape;
        ForwardTrace trace = net.forward(tape, x);
        TensorPtr loss = sum_all(tape, trace.output);
        tape.backward(loss);
        rows.push_back(flatten_grads(params));
      }
      const NtkSeedOutcome seed_out = ntk_cond_from_rows(rows);
      if (seed_out.ill_conditioned) {
        out.outcome = Outcome::ill_conditioned;
        out.diagnostics.push_back(
            "seed " + std::to_string(e) + ": smallest NTK eigenvalue vanished (lambda_min=" +
            std::to_string(seed_out.lambda_min) + ", lambda_max=" +
            std::to_string(seed_out.lambda_max) + ")");
        break;
      }
      acc += seed_out.cond;
    }
  } catch (...) {
    assign_values(params, saved);
    throw;
  }
  assign_values(params, saved);
  if (out.outcome == Outcome::ok) {
    out.value = acc / cfg.ntk_seeds;
  } else {
    out.value = std::numeric_limits<double>::infinity();
  }
  return out;
}

// ---------------------------------------------------------------------------
// activation-pattern proxies

// Binary ReLU pattern per sample, from the masks in the configured scope.
inline std::vector<std::vector<std::uint8_t>> activation_patterns(const Network& net,
                                                                  const ProxyConfig& cfg) {
  TensorPtr input = make_input_batch(cfg, net.macro);
  const int b = input->shape[0];
  Tape tape;
  ForwardTrace trace = net.forward(tape, input);
  std::vector<std::vector<std::uint8_t>> patterns(static_cast<std::size_t>(b));
  bool any = false;
  for (const auto& cap : trace.relu) {
    if (cfg.region_scope == ProxyConfig::RegionScope::cells && !cap.in_cell) continue;
    any = true;
    const std::size_t per_sample = cap.mask->size() / static_cast<std::size_t>(b);
    for (int s = 0; s < b; ++s) {
      auto& row = patterns[static_cast<std::size_t>(s)];
      row.insert(row.end(), cap.mask->begin() + static_cast<std::ptrdiff_t>(s * per_sample),
                 cap.mask->begin() + static_cast<std::ptrdiff_t>((s + 1) * per_sample));
    }
  }
  if (!any)
    throw Error("activation patterns: network has no ReLU units in the selected scope");
  return patterns;
}

// rho = sum_j 1 / sum_k R_jk with R = 1*1^T - sign[z(1-z)^T + (1-z)z^T].
// Each equality class of size m contributes m * (1/m); the sum is evaluated
// exactly by counting one representative per class, so the result is the
// integer number of distinct activation patterns with no float residue.
inline double regions_from_patterns(const std::vector<std::vector<std::uint8_t>>& z) {
  const int b = static_cast<int>(z.size());
  double rho = 0.0;
  for (int j = 0; j < b; ++j) {
    int first_equal = -1;
    for (int k = 0; k < b; ++k) {
      std::int64_t mismatches = 0;  // z_j (1 - z_k) + (1 - z_j) z_k summed
      for (std::size_t u = 0; u < z[static_cast<std::size_t>(j)].size(); ++u) {
        const int zj = z[static_cast<std::size_t>(j)][u], zk = z[static_cast<std::size_t>(k)][u];
        mismatches += zj * (1 - zk) + (1 - zj) * zk;
      }
      const int r_jk = 1 - (mismatches > 0 ? 1 : 0);
      if (r_jk == 1 && first_equal < 0) first_equal = k;
    }
    if (first_equal == j) rho += 1.0;
  }
  return rho;
}

inline double num_linear_regions(const Network& net, const ProxyConfig& cfg) {
  return regions_from_patterns(activation_patterns(net, cfg));
}

struct LogdetResult {
  double value = 0.0;
  Outcome outcome = Outcome::ok;
};

// H_st = N_A - hamming(c_s, c_t) with N_A the code length; log|det H| via LU.
inline LogdetResult logdet_from_patterns(const std::vector<std::vector<std::uint8_t>>& codes) {
  const int b = static_cast<int>(codes.size());
  const double n_a = static_cast<double>(codes.empty() ? 0 : codes[0].size());
  std::vector<double> h(static_cast<std::size_t>(b) * b, 0.0);
  for (int s = 0; s < b; ++s)
    for (int t = s; t < b; ++t) {
      std::int64_t dist = 0;
      for (std::size_t u = 0; u < codes[static_cast<std::size_t>(s)].size(); ++u)
        dist += codes[static_cast<std::size_t>(s)][u] != codes[static_cast<std::size_t>(t)][u];
      h[static_cast<std::size_t>(s) * b + t] = n_a - static_cast<double>(dist);
      h[static_cast<std::size_t>(t) * b + s] = n_a - static_cast<double>(dist);
    }
  const LogDet d = lu_logdet(std::move(h), b);
  if (d.sign == 0 || d.log_abs < std::log(1e-300)) return {0.0, Outcome::singular};
  return {d.log_abs, Outcome::ok};
}

inline LogdetResult logdet_score(const Network& net, const ProxyConfig& cfg) {
  return logdet_from_patterns(activation_patterns(net, cfg));
}

// ---------------------------------------------------------------------------
// batch evaluation

inline std::string proxy_fingerprint(const CellSpec& spec, const MacroConfig& macro,
                                     const ProxyConfig& cfg, std::string_view proxy_id) {
  std::uint64_t h = fnv1a64(serialize_arch(spec));
  h = fnv1a64(macro.fingerprint_text(), h);
  h = fnv1a64(cfg.fingerprint_text(), h);
  h = fnv1a64(proxy_id, h);
  const std::uint64_t seed = cfg.init_seed;
  h = fnv1a64(&seed, sizeof(seed), h);
  return hex64(h);
}

// Evaluates the requested proxies for one architecture. A forward/backward
// pass is shared where the definitions allow (grad_norm / snip / fisher;
// regions / logdet); protocol proxies run their own passes. Per-proxy errors
// are captured in the score records instead of aborting the batch.
inline std::vector<ProxyScore> evaluate_all(const CellSpec& spec, const MacroConfig& macro,
                                            const ProxyConfig& cfg,
                                            const std::vector<std::string>& proxy_ids) {
  macro.validate();
  cfg.validate();
  std::vector<ProxyScore> out;
  out.reserve(proxy_ids.size());

  bool needs_net = false;
  for (const auto& id : proxy_ids) {
    const ProxyInfo* info = find_proxy(id);
    if (!info) throw Error("unknown proxy '" + id + "'");
    needs_net = needs_net || info->needs_network;
  }
  Network net;
  if (needs_net)
    net = instantiate(spec, macro, RngState(cfg.init_seed).derive("init"));

  // Shared passes, computed lazily.
  bool ce_done = false, pattern_done = false;
  CeFamilyScores ce;
  std::string ce_error;
  std::vector<std::vector<std::uint8_t>> patterns;
  std::string pattern_error;

  auto ce_family = [&]() -> const CeFamilyScores& {
    if (!ce_done) {
      ce_done = true;
      try {
        ce = compute_ce_family(net, cfg);
      } catch (const std::exception& e) {
        ce_error = e.what();
      }
    }
    if (!ce_error.empty()) throw Error(ce_error);
    return ce;
  };
  auto pattern_set = [&]() -> const std::vector<std::vector<std::uint8_t>>& {
    if (!pattern_done) {
      pattern_done = true;
      try {
        patterns = activation_patterns(net, cfg);
      } catch (const std::exception& e) {
        pattern_error = e.what();
      }
    }
    if (!pattern_error.empty()) throw Error(pattern_error);
    return patterns;
  };

  for (const auto& id : proxy_ids) {
    ProxyScore score;
    score.arch = serialize_arch(spec);
    score.arch_index = spec_index(spec);
    score.proxy = id;
    score.seed = cfg.init_seed;
    score.fingerprint = proxy_fingerprint(spec, macro, cfg, id);
    try {
      if (id == "grad_norm") {
        score.value = ce_family().grad_norm;
        score.diagnostics = ce.diagnostics;
      } else if (id == "snip") {
        score.value = ce_family().snip;
      } else if (id == "fisher") {
        score.value = ce_family().fisher;
      } else if (id == "synflow") {
        score.value = synflow(net, cfg);
      } else if (id == "grasp") {
        score.value = grasp(net, cfg);
      } else if (id == "gradsign") {
        score.value = gradsign(net, cfg);
      } else if (id == "jacob_cov") {
        score.value = jacob_cov(net, cfg);
      } else if (id == "zen") {
        ZenResult z = zen_score(net, cfg);
        score.value = z.value;
        score.diagnostics = z.diagnostics;
      } else if (id == "ntk_cond") {
        NtkResult n = ntk_cond(net, cfg);
        score.value = n.value;
        score.outcome = n.outcome;
        score.diagnostics = n.diagnostics;
      } else if (id == "regions") {
        score.value = regions_from_patterns(pattern_set());
      } else if (id == "logdet") {
        LogdetResult l = logdet_from_patterns(pattern_set());
        score.value = l.value;
        score.outcome = l.outcome;
      } else if (id == "nn_mass") {
        TopologyScore t = nn_mass(extract_topologies(spec, macro));
        score.value = t.value;
        score.diagnostics = t.diagnostics;
      } else if (id == "nn_degree") {
        TopologyScore t = nn_degree(extract_topologies(spec, macro));
        score.value = t.value;
        score.diagnostics = t.diagnostics;
      } else if (id == "params") {
        score.value = static_cast<double>(count_params(spec, macro));
      } else if (id == "flops") {
        score.value = static_cast<double>(count_flops(spec, macro));
      } else {
        throw Error("unknown proxy '" + id + "'");
      }
      if (score.outcome == Outcome::ok && !std::isfinite(score.value))
        throw NumericError("proxy '" + id + "' produced a non-finite value");
    } catch (const std::exception& e) {
      score.outcome = Outcome::error;
      score.error = e.what();
      score.value = 0.0;
    }
    out.push_back(std::move(score));
  }
  return out;
}

inline ProxyScore evaluate_proxy(const CellSpec& spec, const MacroConfig& macro,
                                 const ProxyConfig& cfg, const std::string& proxy_id) {
  return evaluate_all(spec, macro, cfg, {proxy_id}).front();
}

}  // namespace zeronas
