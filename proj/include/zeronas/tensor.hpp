#pragma once

// Dense f64 tensors with reverse-mode differentiation over the closed op set
// used by the cell search space. Ops execute eagerly and record their adjoint
// on a Tape; Tape::backward replays the adjoints in reverse topological order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zeronas/common.hpp"

namespace zeronas {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty means "absent"
  bool requires_grad = false;
  bool produced = false;  // set when the tensor is the output of a tape op

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
  }
  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
  void clear_grad() { grad.clear(); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<int> shape, bool requires_grad = false) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  std::int64_t n = 1;
  for (int e : t->shape) {
    if (e <= 0) throw Error("tensor extent must be positive, got " + std::to_string(e));
    n *= e;
  }
  t->data.assign(static_cast<std::size_t>(n), 0.0);
  t->requires_grad = requires_grad;
  return t;
}

inline TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values,
                             bool requires_grad = false) {
  auto t = make_tensor(std::move(shape), requires_grad);
  if (values.size() != t->data.size())
    throw Error("tensor data length " + std::to_string(values.size()) +
                " does not match shape product " + std::to_string(t->data.size()));
  t->data = std::move(values);
  return t;
}

inline TensorPtr make_tensor(std::vector<int> shape, std::initializer_list<double> values,
                             bool requires_grad = false) {
  return make_tensor(std::move(shape), std::vector<double>(values), requires_grad);
}

// True when backward should push adjoints into this tensor. Leaves that do
// not require gradients terminate the chain.
inline bool grad_flows_into(const Tensor& t) {
  return t.produced || t.requires_grad;
}

// C[M,N] += A[M,K] * B[K,N], all row-major.
inline void gemm_acc(double* __restrict__ c, const double* __restrict__ a,
                     const double* __restrict__ b, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T.
inline void gemm_acc_bt(double* __restrict__ c, const double* __restrict__ a,
                        const double* __restrict__ b, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N].
inline void gemm_acc_at(double* __restrict__ c, const double* __restrict__ a,
                        const double* __restrict__ b, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::size_t>(p) * m;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> adjoint;
  };

  void record(std::string op, std::vector<TensorPtr> inputs, TensorPtr output,
              std::function<void()> adjoint) {
    output->produced = true;
    entries_.push_back(Entry{std::move(op), std::move(inputs), std::move(output),
                             std::move(adjoint)});
  }

  std::size_t size() const { return entries_.size(); }
  bool backward_done() const { return backward_done_; }

  // Seeds the scalar root with adjoint 1 and replays all recorded adjoints in
  // reverse order. Tensors never reached from the root keep absent grads.
  void backward(const TensorPtr& root) {
    if (backward_done_)
      throw Error("backward already run on this tape; build a fresh graph to differentiate again");
    if (root->numel() != 1)
      throw NumericError("backward root must be a scalar, got tensor with " +
                         std::to_string(root->numel()) + " elements");
    backward_done_ = true;
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (!it->output->has_grad()) continue;  // unreachable from the root
      it->adjoint();
      for (const auto& in : it->inputs) {
        if (!in->has_grad()) continue;
        for (double g : in->grad) {
          if (!std::isfinite(g))
            throw NumericError("non-finite gradient produced by adjoint of op '" + it->op + "'");
        }
      }
    }
  }

 private:
  std::vector<Entry> entries_;
  bool backward_done_ = false;
};

namespace detail {

inline void accumulate(Tensor& dst, const std::vector<double>& contribution) {
  dst.ensure_grad();
  for (std::size_t i = 0; i < contribution.size(); ++i) dst.grad[i] += contribution[i];
}

inline void im2col(const double* src, int c_in, int h, int w, int kh, int kw,
                   int stride, int pad, int h_out, int w_out, double* col) {
  // col is [c_in*kh*kw, h_out*w_out]
  const int plane = h_out * w_out;
  for (int ci = 0; ci < c_in; ++ci) {
    const double* chan = src + static_cast<std::size_t>(ci) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        double* row = col + (static_cast<std::size_t>(ci) * kh * kw + ki * kw + kj) * plane;
        for (int oh = 0; oh < h_out; ++oh) {
          const int ih = oh * stride + ki - pad;
          if (ih < 0 || ih >= h) {
            std::fill(row + oh * w_out, row + (oh + 1) * w_out, 0.0);
            continue;
          }
          const double* srow = chan + static_cast<std::size_t>(ih) * w;
          for (int ow = 0; ow < w_out; ++ow) {
            const int iw = ow * stride + kj - pad;
            row[oh * w_out + ow] = (iw < 0 || iw >= w) ? 0.0 : srow[iw];
          }
        }
      }
    }
  }
}

inline void col2im_acc(const double* col, int c_in, int h, int w, int kh, int kw,
                       int stride, int pad, int h_out, int w_out, double* dst) {
  const int plane = h_out * w_out;
  for (int ci = 0; ci < c_in; ++ci) {
    double* chan = dst + static_cast<std::size_t>(ci) * h * w;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const double* row = col + (static_cast<std::size_t>(ci) * kh * kw + ki * kw + kj) * plane;
        for (int oh = 0; oh < h_out; ++oh) {
          const int ih = oh * stride + ki - pad;
          if (ih < 0 || ih >= h) continue;
          double* srow = chan + static_cast<std::size_t>(ih) * w;
          for (int ow = 0; ow < w_out; ++ow) {
            const int iw = ow * stride + kj - pad;
            if (iw >= 0 && iw < w) srow[iw] += row[oh * w_out + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// input NCHW, weight OIHW, no bias. Output spatial extents follow the standard
// floor formula.
inline TensorPtr conv2d(Tape& tape, const TensorPtr& input, const TensorPtr& weight,
                        int stride, int padding) {
  if (input->shape.size() != 4 || weight->shape.size() != 4)
    throw Error("conv2d expects 4-d input and weight");
  if (stride < 1) throw Error("conv2d stride must be >= 1, got " + std::to_string(stride));
  if (padding < 0) throw Error("conv2d padding must be >= 0, got " + std::to_string(padding));
  const int n = input->shape[0], c_in = input->shape[1], h = input->shape[2], w = input->shape[3];
  const int c_out = weight->shape[0], wc_in = weight->shape[1], kh = weight->shape[2],
            kw = weight->shape[3];
  if (c_in != wc_in)
    throw Error("conv2d: input channels (" + std::to_string(c_in) +
                ") != weight input channels (" + std::to_string(wc_in) + ")");
  const int h_out = (h + 2 * padding - kh) / stride + 1;
  const int w_out = (w + 2 * padding - kw) / stride + 1;
  if (h_out <= 0 || w_out <= 0)
    throw Error("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                " does not fit input " + std::to_string(h) + "x" + std::to_string(w) +
                " with padding " + std::to_string(padding));

  auto out = make_tensor({n, c_out, h_out, w_out});
  const int kdim = c_in * kh * kw;
  const int plane = h_out * w_out;
  std::vector<double> col(static_cast<std::size_t>(kdim) * plane);
  for (int s = 0; s < n; ++s) {
    detail::im2col(input->data.data() + static_cast<std::size_t>(s) * c_in * h * w, c_in, h, w,
                   kh, kw, stride, padding, h_out, w_out, col.data());
    gemm_acc(out->data.data() + static_cast<std::size_t>(s) * c_out * plane,
             weight->data.data(), col.data(), c_out, kdim, plane);
  }

  tape.record("conv2d", {input, weight}, out, [input, weight, out, stride, padding]() {
    const int n = input->shape[0], c_in = input->shape[1], h = input->shape[2],
              w = input->shape[3];
    const int c_out = weight->shape[0], kh = weight->shape[2], kw = weight->shape[3];
    const int h_out = out->shape[2], w_out = out->shape[3];
    const int kdim = c_in * kh * kw;
    const int plane = h_out * w_out;
    const bool need_dw = grad_flows_into(*weight);
    const bool need_dx = grad_flows_into(*input);
    if (!need_dw && !need_dx) return;
    if (need_dw) weight->ensure_grad();
    if (need_dx) input->ensure_grad();
    std::vector<double> col(static_cast<std::size_t>(kdim) * plane);
    std::vector<double> dcol(static_cast<std::size_t>(kdim) * plane);
    for (int s = 0; s < n; ++s) {
      const double* dout = out->grad.data() + static_cast<std::size_t>(s) * c_out * plane;
      if (need_dw) {
        detail::im2col(input->data.data() + static_cast<std::size_t>(s) * c_in * h * w, c_in, h,
                       w, kh, kw, stride, padding, h_out, w_out, col.data());
        gemm_acc_bt(weight->grad.data(), dout, col.data(), c_out, plane, kdim);
      }
      if (need_dx) {
        std::fill(dcol.begin(), dcol.end(), 0.0);
        gemm_acc_at(dcol.data(), weight->data.data(), dout, kdim, c_out, plane);
        detail::col2im_acc(dcol.data(), c_in, h, w, kh, kw, stride, padding, h_out, w_out,
                           input->grad.data() + static_cast<std::size_t>(s) * c_in * h * w);
      }
    }
  });
  return out;
}

// input [B, in], weight [out, in]; output [B, out]. No bias.
inline TensorPtr linear(Tape& tape, const TensorPtr& input, const TensorPtr& weight) {
  if (input->shape.size() != 2 || weight->shape.size() != 2)
    throw Error("linear expects 2-d input and weight");
  const int b = input->shape[0], in = input->shape[1];
  const int out_dim = weight->shape[0], win = weight->shape[1];
  if (in != win)
    throw Error("linear: input features (" + std::to_string(in) + ") != weight features (" +
                std::to_string(win) + ")");
  auto out = make_tensor({b, out_dim});
  gemm_acc_bt(out->data.data(), input->data.data(), weight->data.data(), b, in, out_dim);
  tape.record("linear", {input, weight}, out, [input, weight, out]() {
    const int b = input->shape[0], in = input->shape[1], out_dim = weight->shape[0];
    if (grad_flows_into(*input)) {
      input->ensure_grad();
      gemm_acc(input->grad.data(), out->grad.data(), weight->data.data(), b, out_dim, in);
    }
    if (grad_flows_into(*weight)) {
      weight->ensure_grad();
      gemm_acc_at(weight->grad.data(), out->grad.data(), input->data.data(), out_dim, b, in);
    }
  });
  return out;
}

struct ReluResult {
  TensorPtr out;
  // 1 where the pre-activation was strictly positive; reused by the
  // activation-pattern proxies.
  std::shared_ptr<std::vector<std::uint8_t>> mask;
  // Smallest nonzero |pre-activation|: the distance to the nearest kink,
  // ignoring structurally-zero inputs. Infinity when every input is zero.
  double min_abs_input = 0.0;
};

inline ReluResult relu(Tape& tape, const TensorPtr& input) {
  auto out = make_tensor(input->shape);
  auto mask = std::make_shared<std::vector<std::uint8_t>>(input->data.size());
  double min_abs = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < input->data.size(); ++i) {
    const bool on = input->data[i] > 0.0;
    (*mask)[i] = on ? 1 : 0;
    out->data[i] = on ? input->data[i] : 0.0;
    const double a = std::abs(input->data[i]);
    if (a != 0.0 && a < min_abs) min_abs = a;
  }
  tape.record("relu", {input}, out, [input, out, mask]() {
    if (!grad_flows_into(*input)) return;
    input->ensure_grad();
    for (std::size_t i = 0; i < input->grad.size(); ++i)
      if ((*mask)[i]) input->grad[i] += out->grad[i];
  });
  return {out, mask, min_abs};
}

// Average pooling over valid (in-bounds) taps only.
inline TensorPtr avgpool2d(Tape& tape, const TensorPtr& input, int kernel, int stride,
                           int padding) {
  if (input->shape.size() != 4) throw Error("avgpool2d expects 4-d input");
  const int n = input->shape[0], c = input->shape[1], h = input->shape[2], w = input->shape[3];
  const int h_out = (h + 2 * padding - kernel) / stride + 1;
  const int w_out = (w + 2 * padding - kernel) / stride + 1;
  if (h_out <= 0 || w_out <= 0)
    throw Error("avgpool2d: window does not fit input " + std::to_string(h) + "x" +
                std::to_string(w));
  auto out = make_tensor({n, c, h_out, w_out});
  for (int s = 0; s < n * c; ++s) {
    const double* src = input->data.data() + static_cast<std::size_t>(s) * h * w;
    double* dst = out->data.data() + static_cast<std::size_t>(s) * h_out * w_out;
    for (int oh = 0; oh < h_out; ++oh) {
      for (int ow = 0; ow < w_out; ++ow) {
        double acc = 0.0;
        int count = 0;
        for (int ki = 0; ki < kernel; ++ki) {
          const int ih = oh * stride + ki - padding;
          if (ih < 0 || ih >= h) continue;
          for (int kj = 0; kj < kernel; ++kj) {
            const int iw = ow * stride + kj - padding;
            if (iw < 0 || iw >= w) continue;
            acc += src[ih * w + iw];
            ++count;
          }
        }
        dst[oh * w_out + ow] = count > 0 ? acc / count : 0.0;
      }
    }
  }
  tape.record("avgpool2d", {input}, out, [input, out, kernel, stride, padding]() {
    if (!grad_flows_into(*input)) return;
    input->ensure_grad();
    const int n = input->shape[0], c = input->shape[1], h = input->shape[2], w = input->shape[3];
    const int h_out = out->shape[2], w_out = out->shape[3];
    for (int s = 0; s < n * c; ++s) {
      double* dx = input->grad.data() + static_cast<std::size_t>(s) * h * w;
      const double* dy = out->grad.data() + static_cast<std::size_t>(s) * h_out * w_out;
      for (int oh = 0; oh < h_out; ++oh) {
        for (int ow = 0; ow < w_out; ++ow) {
          int count = 0;
          for (int ki = 0; ki < kernel; ++ki) {
            const int ih = oh * stride + ki - padding;
            if (ih < 0 || ih >= h) continue;
            for (int kj = 0; kj < kernel; ++kj) {
              const int iw = ow * stride + kj - padding;
              if (iw >= 0 && iw < w) ++count;
            }
          }
          if (count == 0) continue;
          const double g = dy[oh * w_out + ow] / count;
          for (int ki = 0; ki < kernel; ++ki) {
            const int ih = oh * stride + ki - padding;
            if (ih < 0 || ih >= h) continue;
            for (int kj = 0; kj < kernel; ++kj) {
              const int iw = ow * stride + kj - padding;
              if (iw >= 0 && iw < w) dx[ih * w + iw] += g;
            }
          }
        }
      }
    }
  });
  return out;
}

// [N, C, H, W] -> [N, C], mean over the spatial plane.
inline TensorPtr global_avgpool(Tape& tape, const TensorPtr& input) {
  if (input->shape.size() != 4) throw Error("global_avgpool expects 4-d input");
  const int n = input->shape[0], c = input->shape[1];
  const int plane = input->shape[2] * input->shape[3];
  auto out = make_tensor({n, c});
  for (int s = 0; s < n * c; ++s) {
    const double* src = input->data.data() + static_cast<std::size_t>(s) * plane;
    double acc = 0.0;
    for (int i = 0; i < plane; ++i) acc += src[i];
    out->data[static_cast<std::size_t>(s)] = acc / plane;
  }
  tape.record("global_avgpool", {input}, out, [input, out, plane]() {
    if (!grad_flows_into(*input)) return;
    input->ensure_grad();
    const int nc = input->shape[0] * input->shape[1];
    for (int s = 0; s < nc; ++s) {
      const double g = out->grad[static_cast<std::size_t>(s)] / plane;
      double* dx = input->grad.data() + static_cast<std::size_t>(s) * plane;
      for (int i = 0; i < plane; ++i) dx[i] += g;
    }
  });
  return out;
}

inline TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) throw Error("add: operand shapes differ");
  auto out = make_tensor(a->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  tape.record("add", {a, b}, out, [a, b, out]() {
    for (const TensorPtr& t : {a, b}) {
      if (!grad_flows_into(*t)) continue;
      t->ensure_grad();
      for (std::size_t i = 0; i < t->grad.size(); ++i) t->grad[i] += out->grad[i];
    }
  });
  return out;
}

inline TensorPtr scale(Tape& tape, const TensorPtr& input, double factor) {
  auto out = make_tensor(input->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = factor * input->data[i];
  tape.record("scale", {input}, out, [input, out, factor]() {
    if (!grad_flows_into(*input)) return;
    input->ensure_grad();
    for (std::size_t i = 0; i < input->grad.size(); ++i)
      input->grad[i] += factor * out->grad[i];
  });
  return out;
}

inline TensorPtr sum_all(Tape& tape, const TensorPtr& input) {
  auto out = make_tensor({1});
  out->data[0] = std::accumulate(input->data.begin(), input->data.end(), 0.0);
  tape.record("sum_all", {input}, out, [input, out]() {
    if (!grad_flows_into(*input)) return;
    input->ensure_grad();
    const double g = out->grad[0];
    for (double& v : input->grad) v += g;
  });
  return out;
}

constexpr double kBatchNormVarianceFloor = 1e-5;

struct BatchNormResult {
  TensorPtr out;
  // Per-channel batch variances after the numeric floor; consumed by the
  // expressivity proxy.
  std::vector<double> variances;
  std::vector<std::uint8_t> clamped;  // per-channel floor-hit flag
};

// Batch-statistics normalization with affine parameters; there are no running
// averages because the networks are never trained. Channels whose batch
// variance falls below the floor are normalized with the floor value and the
// variance term is treated as constant in the adjoint.
inline BatchNormResult batchnorm2d(Tape& tape, const TensorPtr& input, const TensorPtr& gamma,
                                   const TensorPtr& beta) {
  if (input->shape.size() != 4) throw Error("batchnorm2d expects 4-d input");
  const int n = input->shape[0], c = input->shape[1], h = input->shape[2], w = input->shape[3];
  if (gamma->numel() != c || beta->numel() != c)
    throw Error("batchnorm2d: affine parameter length (" + std::to_string(gamma->numel()) +
                ") != channel count (" + std::to_string(c) + ")");
  const int plane = h * w;
  const std::int64_t m = static_cast<std::int64_t>(n) * plane;

  auto mean = std::make_shared<std::vector<double>>(c, 0.0);
  auto invstd = std::make_shared<std::vector<double>>(c, 0.0);
  auto clamped = std::make_shared<std::vector<std::uint8_t>>(c, 0);
  std::vector<double> variances(c, 0.0);

  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (int s = 0; s < n; ++s) {
      const double* src = input->data.data() + (static_cast<std::size_t>(s) * c + ch) * plane;
      for (int i = 0; i < plane; ++i) acc += src[i];
    }
    const double mu = acc / static_cast<double>(m);
    double var = 0.0;
    for (int s = 0; s < n; ++s) {
      const double* src = input->data.data() + (static_cast<std::size_t>(s) * c + ch) * plane;
      for (int i = 0; i < plane; ++i) {
        const double d = src[i] - mu;
        var += d * d;
      }
    }
    var /= static_cast<double>(m);
    if (var < kBatchNormVarianceFloor) {
      var = kBatchNormVarianceFloor;
      (*clamped)[ch] = 1;
    }
    (*mean)[ch] = mu;
    (*invstd)[ch] = 1.0 / std::sqrt(var);
    variances[static_cast<std::size_t>(ch)] = var;
  }

  auto out = make_tensor(input->shape);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const double* src = input->data.data() + (static_cast<std::size_t>(s) * c + ch) * plane;
      double* dst = out->data.data() + (static_cast<std::size_t>(s) * c + ch) * plane;
      const double mu = (*mean)[ch], is = (*invstd)[ch];
      const double g = gamma->data[static_cast<std::size_t>(ch)];
      const double b = beta->data[static_cast<std::size_t>(ch)];
      for (int i = 0; i < plane; ++i) dst[i] = g * (src[i] - mu) * is + b;
    }
  }

  tape.record("batchnorm2d", {input, gamma, beta}, out,
              [input, gamma, beta, out, mean, invstd, clamped]() {
    const int n = input->shape[0], c = input->shape[1];
    const int plane = input->shape[2] * input->shape[3];
    const double m = static_cast<double>(n) * plane;
    const bool need_dx = grad_flows_into(*input);
    if (need_dx) input->ensure_grad();
    const bool need_dg = grad_flows_into(*gamma);
    if (need_dg) gamma->ensure_grad();
    const bool need_db = grad_flows_into(*beta);
    if (need_db) beta->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      const double mu = (*mean)[ch], is = (*invstd)[ch];
      const double g = gamma->data[static_cast<std::size_t>(ch)];
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int s = 0; s < n; ++s) {
        const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * plane;
        for (int i = 0; i < plane; ++i) {
          const double dy = out->grad[base + i];
          const double xhat = (input->data[base + i] - mu) * is;
          sum_dy += dy;
          sum_dy_xhat += dy * xhat;
        }
      }
      if (need_dg) gamma->grad[static_cast<std::size_t>(ch)] += sum_dy_xhat;
      if (need_db) beta->grad[static_cast<std::size_t>(ch)] += sum_dy;
      if (!need_dx) continue;
      const bool var_fixed = (*clamped)[ch] != 0;
      for (int s = 0; s < n; ++s) {
        const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * plane;
        for (int i = 0; i < plane; ++i) {
          const double dy = out->grad[base + i];
          const double xhat = (input->data[base + i] - mu) * is;
          double dx = dy - sum_dy / m;
          if (!var_fixed) dx -= xhat * (sum_dy_xhat / m);
          input->grad[base + i] += g * is * dx;
        }
      }
    }
  });
  return {out, std::move(variances), std::vector<std::uint8_t>(clamped->begin(), clamped->end())};
}

// Mean cross-entropy of softmax(logits) against integer labels.
inline TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits,
                                       const std::vector<int>& labels) {
  if (logits->shape.size() != 2) throw Error("softmax_cross_entropy expects 2-d logits");
  const int b = logits->shape[0], k = logits->shape[1];
  if (static_cast<int>(labels.size()) != b)
    throw Error("softmax_cross_entropy: label count (" + std::to_string(labels.size()) +
                ") != batch size (" + std::to_string(b) + ")");
  auto probs = std::make_shared<std::vector<double>>(logits->data.size());
  auto out = make_tensor({1});
  double loss = 0.0;
  for (int s = 0; s < b; ++s) {
    const int y = labels[static_cast<std::size_t>(s)];
    if (y < 0 || y >= k)
      throw Error("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                  std::to_string(k) + ")");
    const double* row = logits->data.data() + static_cast<std::size_t>(s) * k;
    double* prow = probs->data() + static_cast<std::size_t>(s) * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < k; ++j) prow[j] = std::exp(row[j] - lse);
    loss += lse - row[y];
  }
  out->data[0] = loss / b;
  auto labels_copy = std::make_shared<std::vector<int>>(labels);
  tape.record("softmax_cross_entropy", {logits}, out, [logits, out, probs, labels_copy]() {
    if (!grad_flows_into(*logits)) return;
    logits->ensure_grad();
    const int b = logits->shape[0], k = logits->shape[1];
    const double g = out->grad[0] / b;
    for (int s = 0; s < b; ++s) {
      const int y = (*labels_copy)[static_cast<std::size_t>(s)];
      double* drow = logits->grad.data() + static_cast<std::size_t>(s) * k;
      const double* prow = probs->data() + static_cast<std::size_t>(s) * k;
      for (int j = 0; j < k; ++j) drow[j] += g * (prow[j] - (j == y ? 1.0 : 0.0));
    }
  });
  return out;
}

// --- flat parameter-vector helpers -----------------------------------------

inline std::int64_t total_numel(std::span<const TensorPtr> params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p->numel();
  return n;
}

inline std::vector<double> flatten_values(std::span<const TensorPtr> params) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(total_numel(params)));
  for (const auto& p : params) flat.insert(flat.end(), p->data.begin(), p->data.end());
  return flat;
}

// Gradients flattened in parameter order; tensors with absent grads contribute
// zeros.
inline std::vector<double> flatten_grads(std::span<const TensorPtr> params) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(total_numel(params)));
  for (const auto& p : params) {
    if (p->has_grad())
      flat.insert(flat.end(), p->grad.begin(), p->grad.end());
    else
      flat.insert(flat.end(), p->data.size(), 0.0);
  }
  return flat;
}

inline void assign_values(std::span<const TensorPtr> params, std::span<const double> flat) {
  std::size_t off = 0;
  for (const auto& p : params) {
    std::copy(flat.begin() + off, flat.begin() + off + p->data.size(), p->data.begin());
    off += p->data.size();
  }
}

inline void clear_grads(std::span<const TensorPtr> params) {
  for (const auto& p : params) p->clear_grad();
}

// Hessian-vector product by central finite differences of gradients:
// (grad(theta + eps*v) - grad(theta - eps*v)) / (2*eps). grad_fn must evaluate
// the loss gradient over `params` at their current values. Parameters are
// restored exactly afterwards. epsilon <= 0 selects 1e-3 * (1 + max|theta|).
inline std::vector<double> hvp(const std::function<std::vector<double>()>& grad_fn,
                               std::span<const TensorPtr> params,
                               std::span<const double> direction, double epsilon = 0.0) {
  const std::int64_t total = total_numel(params);
  if (static_cast<std::int64_t>(direction.size()) != total)
    throw Error("hvp: direction length (" + std::to_string(direction.size()) +
                ") != total parameter count (" + std::to_string(total) + ")");
  const std::vector<double> saved = flatten_values(params);
  if (epsilon <= 0.0) {
    double mx = 0.0;
    for (double v : saved) mx = std::max(mx, std::abs(v));
    epsilon = 1e-3 * (1.0 + mx);
  }

  std::vector<double> shifted(saved.size());
  for (std::size_t i = 0; i < saved.size(); ++i) shifted[i] = saved[i] + epsilon * direction[i];
  assign_values(params, shifted);
  const std::vector<double> g_plus = grad_fn();

  for (std::size_t i = 0; i < saved.size(); ++i) shifted[i] = saved[i] - epsilon * direction[i];
  assign_values(params, shifted);
  const std::vector<double> g_minus = grad_fn();

  assign_values(params, saved);

  if (g_plus.size() != saved.size() || g_minus.size() != saved.size())
    throw Error("hvp: grad_fn returned a vector of unexpected length");
  std::vector<double> hv(saved.size());
  for (std::size_t i = 0; i < hv.size(); ++i) {
    hv[i] = (g_plus[i] - g_minus[i]) / (2.0 * epsilon);
    if (!std::isfinite(hv[i]))
      throw NumericError("hvp produced a non-finite component at index " + std::to_string(i));
  }
  return hv;
}

}  // namespace zeronas
