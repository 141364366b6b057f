#pragma once

// Instantiates a CellSpec + MacroConfig into a parameterized computation
// graph and interprets it forward on a Tape. Layout:
//
//   stem conv3x3 + BN
//   stage 0 cells ... reduction ... stage 1 cells ... (last stage)
//   global average pool + linear classifier        <- not part of f_e
//
// Cell edges: none -> dropped, skip_connect -> identity,
// conv_{1x1,3x3} -> ReLU-Conv-BN, avg_pool_3x3 -> AvgPool(3, s1, p1).
// No bias terms anywhere.

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "zeronas/arch.hpp"
#include "zeronas/macro.hpp"
#include "zeronas/rng.hpp"
#include "zeronas/tensor.hpp"

namespace zeronas {

struct ParamLayer {
  enum class Kind { conv, linear, batchnorm };
  Kind kind;
  std::string name;
  TensorPtr weight;  // conv OIHW / linear [out, in]
  TensorPtr gamma;   // batchnorm only
  TensorPtr beta;
};

struct EdgeInstance {
  OpKind op = OpKind::none;
  int conv_layer = -1;  // index into Network::layers
  int bn_layer = -1;
};

struct CellInstance {
  int stage = 0;
  int index_in_stage = 0;
  int width = 0;
  std::array<EdgeInstance, kCellEdges> edges{};
};

struct ReductionInstance {
  int in_width = 0;
  int out_width = 0;
  int conv_a = -1, bn_a = -1;
  int conv_b = -1, bn_b = -1;
  int conv_shortcut = -1;  // -1 under the plain policy
};

struct BnCapture {
  int layer = -1;
  bool in_cell = false;
  TensorPtr out;
  std::vector<double> variances;
};

struct ReluCapture {
  int layer = -1;  // the conv layer the activation feeds, -1 for reductions
  bool in_cell = false;
  std::shared_ptr<std::vector<std::uint8_t>> mask;
  double min_abs_input = 0.0;  // distance to the nearest kink (see ReluResult)
};

struct ForwardOptions {
  bool bn_passthrough = false;        // skip normalization entirely
  bool feature_extractor_only = false;  // stop before final pooling + classifier
  bool check_finite = false;          // track the first layer producing inf/nan
};

struct ForwardTrace {
  TensorPtr output;  // logits [B, classes], or the last feature map for f_e
  std::vector<BnCapture> bn;
  std::vector<ReluCapture> relu;
  std::vector<std::string> diagnostics;
  std::string first_nonfinite;  // layer name, when check_finite caught one
};

// Per-cell structural summary feeding the topology proxies. The extraction
// convention for this cell family: depth counts compute edges (convs and
// pools), skip_connect edges are the actual skip links, all 6 edges are
// possible skip links, and each edge consumes `width` input channels.
struct CellTopology {
  double width = 0.0;
  double depth = 0.0;
  double actual_skips = 0.0;
  double possible_skips = 0.0;
  double total_input_channels = 0.0;
};

class Network {
 public:
  CellSpec spec;
  MacroConfig macro;
  std::vector<ParamLayer> layers;
  std::vector<CellInstance> cells;
  std::vector<ReductionInstance> reductions;  // reductions[i] follows stage i
  int stem_conv = -1, stem_bn = -1;
  int classifier = -1;

  // Conv and linear weights, in layer order; the unit of the layer-indexed
  // proxies.
  std::vector<TensorPtr> conv_linear_params() const {
    std::vector<TensorPtr> out;
    for (const auto& l : layers)
      if (l.kind != ParamLayer::Kind::batchnorm) out.push_back(l.weight);
    return out;
  }

  std::vector<const ParamLayer*> conv_linear_layers() const {
    std::vector<const ParamLayer*> out;
    for (const auto& l : layers)
      if (l.kind != ParamLayer::Kind::batchnorm) out.push_back(&l);
    return out;
  }

  // Every trainable tensor including batchnorm affine parameters.
  std::vector<TensorPtr> all_params() const {
    std::vector<TensorPtr> out;
    for (const auto& l : layers) {
      if (l.kind == ParamLayer::Kind::batchnorm) {
        out.push_back(l.gamma);
        out.push_back(l.beta);
      } else {
        out.push_back(l.weight);
      }
    }
    return out;
  }

  std::int64_t num_params() const {
    std::int64_t n = 0;
    for (const auto& p : all_params()) n += p->numel();
    return n;
  }

  void clear_param_grads() const {
    for (const auto& p : all_params()) p->clear_grad();
  }

  // Redraws every parameter: convs/linear from N(0, sigma) with the given
  // sigma rule, batchnorm affine back to (1, 0).
  void reinit_gaussian(RngState& rng, bool kaiming = true) const {
    for (const auto& l : layers) {
      if (l.kind == ParamLayer::Kind::batchnorm) {
        std::fill(l.gamma->data.begin(), l.gamma->data.end(), 1.0);
        std::fill(l.beta->data.begin(), l.beta->data.end(), 0.0);
        continue;
      }
      double std_dev = 1.0;
      if (kaiming) {
        std::int64_t fan_in = 1;
        for (std::size_t d = 1; d < l.weight->shape.size(); ++d)
          fan_in *= l.weight->shape[d];
        std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
      }
      for (double& v : l.weight->data) v = std_dev * rng.normal();
    }
  }

  ForwardTrace forward(Tape& tape, const TensorPtr& input,
                       const ForwardOptions& opts = {}) const {
    ForwardTrace trace;
    if (input->shape.size() != 4 || input->shape[1] != macro.input_channels)
      throw Error("network forward: expected input [N, " +
                  std::to_string(macro.input_channels) + ", H, W]");

    TensorPtr x = conv2d(tape, input, layers[static_cast<std::size_t>(stem_conv)].weight, 1, 1);
    note_nonfinite(trace, opts, x, stem_conv);
    x = apply_bn(tape, trace, stem_bn, x, /*in_cell=*/false, opts);

    std::size_t cell_cursor = 0;
    for (std::size_t s = 0; s < macro.stages.size(); ++s) {
      for (int c = 0; c < macro.stages[s].cells; ++c)
        x = cell_forward(tape, trace, cells[cell_cursor++], x, opts);
      if (s + 1 < macro.stages.size())
        x = reduction_forward(tape, trace, reductions[s], x, opts);
    }

    if (opts.feature_extractor_only) {
      trace.output = x;
      return trace;
    }
    TensorPtr pooled = global_avgpool(tape, x);
    trace.output = linear(tape, pooled, layers[static_cast<std::size_t>(classifier)].weight);
    note_nonfinite(trace, opts, trace.output, classifier);
    return trace;
  }

 private:
  void note_nonfinite(ForwardTrace& trace, const ForwardOptions& opts, const TensorPtr& x,
                      int layer) const {
    if (!opts.check_finite || !trace.first_nonfinite.empty()) return;
    for (double v : x->data) {
      if (!std::isfinite(v)) {
        trace.first_nonfinite = layers[static_cast<std::size_t>(layer)].name;
        return;
      }
    }
  }

  TensorPtr apply_bn(Tape& tape, ForwardTrace& trace, int bn_layer, const TensorPtr& x,
                     bool in_cell, const ForwardOptions& opts) const {
    if (opts.bn_passthrough) return x;
    const auto& l = layers[static_cast<std::size_t>(bn_layer)];
    BatchNormResult r = batchnorm2d(tape, x, l.gamma, l.beta);
    int clamped = 0;
    for (auto f : r.clamped) clamped += f;
    if (clamped > 0)
      trace.diagnostics.push_back(l.name + ": " + std::to_string(clamped) +
                                  " channel(s) clamped to variance floor");
    trace.bn.push_back({bn_layer, in_cell, r.out, std::move(r.variances)});
    return trace.bn.back().out;
  }

  TensorPtr edge_forward(Tape& tape, ForwardTrace& trace, const EdgeInstance& e,
                         const TensorPtr& x, const ForwardOptions& opts) const {
    switch (e.op) {
      case OpKind::skip_connect:
        return x;
      case OpKind::avg_pool_3x3:
        return avgpool2d(tape, x, 3, 1, 1);
      case OpKind::conv_1x1:
      case OpKind::conv_3x3: {
        ReluResult r = relu(tape, x);
        trace.relu.push_back({e.conv_layer, true, r.mask, r.min_abs_input});
        const int pad = e.op == OpKind::conv_3x3 ? 1 : 0;
        TensorPtr y =
            conv2d(tape, r.out, layers[static_cast<std::size_t>(e.conv_layer)].weight, 1, pad);
        note_nonfinite(trace, opts, y, e.conv_layer);
        return apply_bn(tape, trace, e.bn_layer, y, /*in_cell=*/true, opts);
      }
      case OpKind::none:
        break;
    }
    throw Error("edge_forward called on a none edge");
  }

  TensorPtr cell_forward(Tape& tape, ForwardTrace& trace, const CellInstance& cell,
                         const TensorPtr& input, const ForwardOptions& opts) const {
    std::array<TensorPtr, kCellNodes> nodes;
    nodes[0] = input;
    for (int target = 1; target < kCellNodes; ++target) {
      TensorPtr acc;
      for (int e = 0; e < kCellEdges; ++e) {
        if (kEdgeIndex[static_cast<std::size_t>(e)].target != target) continue;
        const auto& edge = cell.edges[static_cast<std::size_t>(e)];
        if (edge.op == OpKind::none) continue;
        TensorPtr term = edge_forward(
            tape, trace, edge, nodes[static_cast<std::size_t>(kEdgeIndex[static_cast<std::size_t>(e)].source)],
            opts);
        acc = acc ? add(tape, acc, term) : term;
      }
      // A node with only none edges passes zero features.
      nodes[static_cast<std::size_t>(target)] = acc ? acc : make_tensor(input->shape);
    }
    return nodes[kCellNodes - 1];
  }

  TensorPtr reduction_forward(Tape& tape, ForwardTrace& trace, const ReductionInstance& red,
                              const TensorPtr& x, const ForwardOptions& opts) const {
    ReluResult r1 = relu(tape, x);
    trace.relu.push_back({red.conv_a, false, r1.mask, r1.min_abs_input});
    TensorPtr main =
        conv2d(tape, r1.out, layers[static_cast<std::size_t>(red.conv_a)].weight, 2, 1);
    note_nonfinite(trace, opts, main, red.conv_a);
    main = apply_bn(tape, trace, red.bn_a, main, /*in_cell=*/false, opts);
    ReluResult r2 = relu(tape, main);
    trace.relu.push_back({red.conv_b, false, r2.mask, r2.min_abs_input});
    main = conv2d(tape, r2.out, layers[static_cast<std::size_t>(red.conv_b)].weight, 1, 1);
    note_nonfinite(trace, opts, main, red.conv_b);
    main = apply_bn(tape, trace, red.bn_b, main, /*in_cell=*/false, opts);
    if (red.conv_shortcut < 0) return main;
    TensorPtr sc = avgpool2d(tape, x, 2, 2, 0);
    sc = conv2d(tape, sc, layers[static_cast<std::size_t>(red.conv_shortcut)].weight, 1, 0);
    note_nonfinite(trace, opts, sc, red.conv_shortcut);
    return add(tape, main, sc);
  }
};

namespace detail {

inline int add_conv(Network& net, const std::string& name, int c_out, int c_in, int k,
                    RngState& rng) {
  ParamLayer l;
  l.kind = ParamLayer::Kind::conv;
  l.name = name;
  l.weight = make_tensor({c_out, c_in, k, k}, /*requires_grad=*/true);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(c_in * k * k));
  for (double& v : l.weight->data) v = std_dev * rng.normal();
  net.layers.push_back(std::move(l));
  return static_cast<int>(net.layers.size()) - 1;
}

inline int add_bn(Network& net, const std::string& name, int channels) {
  ParamLayer l;
  l.kind = ParamLayer::Kind::batchnorm;
  l.name = name;
  l.gamma = make_tensor({channels}, /*requires_grad=*/true);
  l.beta = make_tensor({channels}, /*requires_grad=*/true);
  std::fill(l.gamma->data.begin(), l.gamma->data.end(), 1.0);
  net.layers.push_back(std::move(l));
  return static_cast<int>(net.layers.size()) - 1;
}

inline int add_linear(Network& net, const std::string& name, int out_dim, int in_dim,
                      RngState& rng) {
  ParamLayer l;
  l.kind = ParamLayer::Kind::linear;
  l.name = name;
  l.weight = make_tensor({out_dim, in_dim}, /*requires_grad=*/true);
  const double std_dev = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (double& v : l.weight->data) v = std_dev * rng.normal();
  net.layers.push_back(std::move(l));
  return static_cast<int>(net.layers.size()) - 1;
}

}  // namespace detail

// Kaiming-normal initialization for conv/linear (ReLU gain), batchnorm affine
// at (1, 0). Identical (spec, macro, seed) produce bitwise-identical
// parameters.
inline Network instantiate(const CellSpec& spec, const MacroConfig& macro, RngState rng) {
  macro.validate();
  Network net;
  net.spec = spec;
  net.macro = macro;

  net.stem_conv = detail::add_conv(net, "stem.conv", macro.stem_channels, macro.input_channels,
                                   3, rng);
  net.stem_bn = detail::add_bn(net, "stem.bn", macro.stem_channels);

  for (std::size_t s = 0; s < macro.stages.size(); ++s) {
    const int width = macro.stages[s].width;
    for (int c = 0; c < macro.stages[s].cells; ++c) {
      CellInstance cell;
      cell.stage = static_cast<int>(s);
      cell.index_in_stage = c;
      cell.width = width;
      for (int e = 0; e < kCellEdges; ++e) {
        EdgeInstance edge;
        edge.op = spec.ops[static_cast<std::size_t>(e)];
        if (edge.op == OpKind::conv_1x1 || edge.op == OpKind::conv_3x3) {
          const int k = edge.op == OpKind::conv_3x3 ? 3 : 1;
          const std::string base = "s" + std::to_string(s) + ".c" + std::to_string(c) + ".e" +
                                   std::to_string(e);
          edge.conv_layer = detail::add_conv(net, base + ".conv", width, width, k, rng);
          edge.bn_layer = detail::add_bn(net, base + ".bn", width);
        }
        cell.edges[static_cast<std::size_t>(e)] = edge;
      }
      net.cells.push_back(std::move(cell));
    }
    if (s + 1 < macro.stages.size()) {
      ReductionInstance red;
      red.in_width = width;
      red.out_width = macro.stages[s + 1].width;
      const std::string base = "red" + std::to_string(s);
      red.conv_a = detail::add_conv(net, base + ".conv_a", red.out_width, red.in_width, 3, rng);
      red.bn_a = detail::add_bn(net, base + ".bn_a", red.out_width);
      red.conv_b = detail::add_conv(net, base + ".conv_b", red.out_width, red.out_width, 3, rng);
      red.bn_b = detail::add_bn(net, base + ".bn_b", red.out_width);
      if (macro.reduction == ReductionPolicy::residual)
        red.conv_shortcut =
            detail::add_conv(net, base + ".shortcut", red.out_width, red.in_width, 1, rng);
      net.reductions.push_back(red);
    }
  }

  net.classifier =
      detail::add_linear(net, "head.fc", macro.num_classes, macro.stages.back().width, rng);
  return net;
}

// Trainable-scalar count without instantiation (includes batchnorm affine).
inline std::int64_t count_params(const CellSpec& spec, const MacroConfig& macro) {
  macro.validate();
  auto conv = [](std::int64_t co, std::int64_t ci, std::int64_t k) { return co * ci * k * k; };
  std::int64_t n = conv(macro.stem_channels, macro.input_channels, 3) + 2 * macro.stem_channels;
  const std::int64_t n1 = spec.count(OpKind::conv_1x1);
  const std::int64_t n3 = spec.count(OpKind::conv_3x3);
  for (std::size_t s = 0; s < macro.stages.size(); ++s) {
    const std::int64_t w = macro.stages[s].width;
    n += macro.stages[s].cells * (n1 * (conv(w, w, 1) + 2 * w) + n3 * (conv(w, w, 3) + 2 * w));
    if (s + 1 < macro.stages.size()) {
      const std::int64_t wi = w, wo = macro.stages[s + 1].width;
      n += conv(wo, wi, 3) + 2 * wo + conv(wo, wo, 3) + 2 * wo;
      if (macro.reduction == ReductionPolicy::residual) n += conv(wo, wi, 1);
    }
  }
  n += static_cast<std::int64_t>(macro.num_classes) * macro.stages.back().width;
  return n;
}

// Multiply-accumulate count for one input sample (convs and the classifier;
// pools, batchnorm, relu and adds are not counted).
inline std::int64_t count_flops(const CellSpec& spec, const MacroConfig& macro,
                                int input_resolution = 0) {
  macro.validate();
  if (input_resolution <= 0) input_resolution = macro.input_resolution;
  const std::int64_t n1 = spec.count(OpKind::conv_1x1);
  const std::int64_t n3 = spec.count(OpKind::conv_3x3);
  std::int64_t res = input_resolution;
  std::int64_t macs = static_cast<std::int64_t>(macro.stem_channels) * macro.input_channels * 9 *
                      res * res;
  for (std::size_t s = 0; s < macro.stages.size(); ++s) {
    const std::int64_t w = macro.stages[s].width;
    const std::int64_t plane = res * res;
    macs += macro.stages[s].cells * (n1 * w * w * plane + n3 * w * w * 9 * plane);
    if (s + 1 < macro.stages.size()) {
      const std::int64_t wi = w, wo = macro.stages[s + 1].width;
      res /= 2;
      const std::int64_t rplane = res * res;
      macs += wi * wo * 9 * rplane + wo * wo * 9 * rplane;
      if (macro.reduction == ReductionPolicy::residual) macs += wi * wo * rplane;
    }
  }
  macs += static_cast<std::int64_t>(macro.num_classes) * macro.stages.back().width;
  return macs;
}

// Number of conv + linear layers; the D of the layer-indexed proxies.
inline int count_layers(const CellSpec& spec, const MacroConfig& macro) {
  macro.validate();
  const int per_cell = spec.count(OpKind::conv_1x1) + spec.count(OpKind::conv_3x3);
  int d = 1;  // stem
  for (const auto& st : macro.stages) d += st.cells * per_cell;
  d += macro.num_reductions() * (macro.reduction == ReductionPolicy::residual ? 3 : 2);
  d += 1;  // classifier
  return d;
}

// One CellTopology per cell instance, per the extraction convention in the
// CellTopology doc comment.
inline std::vector<CellTopology> extract_topologies(const CellSpec& spec,
                                                    const MacroConfig& macro) {
  macro.validate();
  const int skips = spec.count(OpKind::skip_connect);
  const int compute_edges = spec.count(OpKind::conv_1x1) + spec.count(OpKind::conv_3x3) +
                            spec.count(OpKind::avg_pool_3x3);
  std::vector<CellTopology> out;
  for (const auto& st : macro.stages) {
    for (int c = 0; c < st.cells; ++c) {
      CellTopology t;
      t.width = st.width;
      t.depth = compute_edges;
      t.actual_skips = skips;
      t.possible_skips = kCellEdges;
      t.total_input_channels = static_cast<double>(kCellEdges) * st.width;
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace zeronas
