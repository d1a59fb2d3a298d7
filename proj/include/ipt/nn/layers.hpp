#pragma once

// Layer vocabulary with hand-written forward and backward passes. A layer is
// a plain value (spec + shapes + parameter tensors); dispatch is by kind.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/nn/random.hpp"
#include "ipt/nn/tensor.hpp"

namespace ipt::nn {

enum class LayerKind { CONV2D, MAXPOOL2X2, DROPOUT, DENSE, RELU, FLATTEN, BILSTM, SOFTMAX };
enum class Padding { SAME, VALID };

inline std::string_view layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::CONV2D: return "CONV2D";
    case LayerKind::MAXPOOL2X2: return "MAXPOOL2X2";
    case LayerKind::DROPOUT: return "DROPOUT";
    case LayerKind::DENSE: return "DENSE";
    case LayerKind::RELU: return "RELU";
    case LayerKind::FLATTEN: return "FLATTEN";
    case LayerKind::BILSTM: return "BILSTM";
    case LayerKind::SOFTMAX: return "SOFTMAX";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::RELU;
  std::size_t filters = 0;  // CONV2D
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  Padding padding = Padding::SAME;
  std::size_t units = 0;    // DENSE
  double rate = 0.0;        // DROPOUT
  std::size_t hidden = 0;   // BILSTM, per direction
  double clip_norm = 5.0;   // BILSTM gradient clipping, 0 disables

  static LayerSpec conv2d(std::size_t filters, std::size_t kh, std::size_t kw, Padding pad = Padding::SAME) {
    LayerSpec s;
    s.kind = LayerKind::CONV2D;
    s.filters = filters;
    s.kernel_h = kh;
    s.kernel_w = kw;
    s.padding = pad;
    return s;
  }
  static LayerSpec maxpool2x2() { return with_kind(LayerKind::MAXPOOL2X2); }
  static LayerSpec dropout(double rate) {
    LayerSpec s = with_kind(LayerKind::DROPOUT);
    s.rate = rate;
    return s;
  }
  static LayerSpec dense(std::size_t units) {
    LayerSpec s = with_kind(LayerKind::DENSE);
    s.units = units;
    return s;
  }
  static LayerSpec relu() { return with_kind(LayerKind::RELU); }
  static LayerSpec flatten() { return with_kind(LayerKind::FLATTEN); }
  static LayerSpec bilstm(std::size_t hidden, double clip_norm = 5.0) {
    LayerSpec s = with_kind(LayerKind::BILSTM);
    s.hidden = hidden;
    s.clip_norm = clip_norm;
    return s;
  }
  static LayerSpec softmax() { return with_kind(LayerKind::SOFTMAX); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;

 private:
  static LayerSpec with_kind(LayerKind k) {
    LayerSpec s;
    s.kind = k;
    return s;
  }
};

struct Layer {
  LayerSpec spec;
  Shape input_shape;
  Shape output_shape;
  std::vector<Tensor> params;
};

/// Activations kept from a forward pass for the matching backward pass.
struct LayerCache {
  Tensor input;
  Tensor output;
  std::vector<double> aux;          // im2col columns, dropout mask, LSTM gates
  std::vector<std::size_t> index;   // maxpool argmax positions
};

struct ForwardContext {
  bool training = false;
  std::uint64_t noise_key = 0;  // seeds dropout masks
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] inline void shape_error(std::size_t layer_index, const LayerSpec& spec, const std::string& what) {
  fail(Errc::shape, "layer " + std::to_string(layer_index) + " (" + std::string(layer_kind_name(spec.kind)) + "): " + what);
}

struct ConvGeometry {
  std::size_t c, h, w, f, kh, kw, pad_top, pad_left, out_h, out_w;
  std::size_t k() const { return c * kh * kw; }
  std::size_t p() const { return out_h * out_w; }
};

inline ConvGeometry conv_geometry(const LayerSpec& s, const Shape& in) {
  ConvGeometry g{};
  g.c = in[0];
  g.h = in[1];
  g.w = in[2];
  g.f = s.filters;
  g.kh = s.kernel_h;
  g.kw = s.kernel_w;
  if (s.padding == Padding::SAME) {
    g.pad_top = (g.kh - 1) / 2;
    g.pad_left = (g.kw - 1) / 2;
    g.out_h = g.h;
    g.out_w = g.w;
  } else {
    g.out_h = g.h - g.kh + 1;
    g.out_w = g.w - g.kw + 1;
  }
  return g;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/// Output shape of a layer for a given input shape; throws a shape error
/// naming `layer_index` when the input does not fit.
inline Shape infer_output_shape(const LayerSpec& s, const Shape& in, std::size_t layer_index = 0) {
  switch (s.kind) {
    case LayerKind::CONV2D: {
      if (in.size() != 3) detail::shape_error(layer_index, s, "expects CxHxW input, got " + shape_string(in));
      if (s.filters == 0 || s.kernel_h == 0 || s.kernel_w == 0) detail::shape_error(layer_index, s, "empty kernel");
      if (s.kernel_h > in[1] || s.kernel_w > in[2])
        detail::shape_error(layer_index, s, "kernel larger than input " + shape_string(in));
      const auto g = detail::conv_geometry(s, in);
      return {g.f, g.out_h, g.out_w};
    }
    case LayerKind::MAXPOOL2X2:
      if (in.size() != 3 || in[1] < 2 || in[2] < 2)
        detail::shape_error(layer_index, s, "expects CxHxW input with H,W >= 2, got " + shape_string(in));
      return {in[0], in[1] / 2, in[2] / 2};
    case LayerKind::DROPOUT:
      if (!(s.rate >= 0.0 && s.rate < 1.0)) detail::shape_error(layer_index, s, "rate must lie in [0, 1)");
      return in;
    case LayerKind::RELU:
      return in;
    case LayerKind::DENSE:
      if (in.size() != 1) detail::shape_error(layer_index, s, "expects a vector input, got " + shape_string(in));
      if (s.units == 0) detail::shape_error(layer_index, s, "zero units");
      return {s.units};
    case LayerKind::FLATTEN:
      return {shape_size(in)};
    case LayerKind::BILSTM: {
      if (in.size() < 2) detail::shape_error(layer_index, s, "expects ...xFxT input, got " + shape_string(in));
      const std::size_t lead = shape_size(in) / (in[in.size() - 2] * in.back());
      if (lead != 1) detail::shape_error(layer_index, s, "expects a single sequence, got " + shape_string(in));
      if (s.hidden == 0) detail::shape_error(layer_index, s, "zero hidden size");
      return {2 * s.hidden};
    }
    case LayerKind::SOFTMAX:
      if (in.size() != 1) detail::shape_error(layer_index, s, "expects a vector input, got " + shape_string(in));
      return in;
  }
  detail::shape_error(layer_index, s, "unknown kind");
}

/// Builds a layer with fan-in scaled uniform weights and zero biases
/// (LSTM forget-gate biases start at one).
inline Layer make_layer(const LayerSpec& spec, const Shape& in, Rng& rng, std::size_t layer_index = 0) {
  Layer layer{spec, in, infer_output_shape(spec, in, layer_index), {}};
  auto uniform_tensor = [&](Shape shape, double limit) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
    return t;
  };
  switch (spec.kind) {
    case LayerKind::CONV2D: {
      const double fan_in = static_cast<double>(in[0] * spec.kernel_h * spec.kernel_w);
      layer.params.push_back(uniform_tensor({spec.filters, in[0], spec.kernel_h, spec.kernel_w}, std::sqrt(6.0 / fan_in)));
      layer.params.emplace_back(Shape{spec.filters}, 0.0);
      break;
    }
    case LayerKind::DENSE: {
      const double fan_in = static_cast<double>(in[0]);
      layer.params.push_back(uniform_tensor({spec.units, in[0]}, std::sqrt(6.0 / fan_in)));
      layer.params.emplace_back(Shape{spec.units}, 0.0);
      break;
    }
    case LayerKind::BILSTM: {
      const std::size_t features = in[in.size() - 2];
      const std::size_t h = spec.hidden;
      const double limit = 1.0 / std::sqrt(static_cast<double>(h));
      for (int dir = 0; dir < 2; ++dir) {
        layer.params.push_back(uniform_tensor({4 * h, features}, limit));
        layer.params.push_back(uniform_tensor({4 * h, h}, limit));
        Tensor b(Shape{4 * h}, 0.0);
        for (std::size_t j = h; j < 2 * h; ++j) b[j] = 1.0;
        layer.params.push_back(std::move(b));
      }
      break;
    }
    default:
      break;
  }
  return layer;
}

namespace detail {

inline Tensor conv_forward(const Layer& L, const Tensor& x, LayerCache& cache) {
  const auto g = conv_geometry(L.spec, x.shape());
  const std::size_t K = g.k(), P = g.p();
  cache.aux.assign(K * P, 0.0);
  double* col = cache.aux.data();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = col + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const double* src = x.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + j) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            row[oy * g.out_w + ox] = src[ix];
          }
        }
      }
    }
  }
  Tensor y(Shape{g.f, g.out_h, g.out_w});
  CMapMat W(L.params[0].data(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(K));
  CMapMat Col(col, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
  MapMat Y(y.data(), static_cast<Eigen::Index>(g.f), static_cast<Eigen::Index>(P));
  Y.noalias() = W * Col;
  Y.colwise() += CMapVec(L.params[1].data(), static_cast<Eigen::Index>(g.f));
  return y;
}

inline Tensor conv_backward(const Layer& L, const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) {
  const auto g = conv_geometry(L.spec, cache.input.shape());
  const std::size_t K = g.k(), P = g.p();
  const auto F = static_cast<Eigen::Index>(g.f);
  CMapMat dY(dy.data(), F, static_cast<Eigen::Index>(P));
  CMapMat Col(cache.aux.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
  CMapMat W(L.params[0].data(), F, static_cast<Eigen::Index>(K));
  MapMat dW(grads[0].data(), F, static_cast<Eigen::Index>(K));
  dW.noalias() += dY * Col.transpose();
  MapVec db(grads[1].data(), F);
  db += dY.rowwise().sum();

  RowMat dCol = W.transpose() * dY;
  Tensor dx(cache.input.shape(), 0.0);
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = dCol.data() + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy + i) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = dx.data() + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox + j) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[ix] += row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
  return dx;
}

inline Tensor maxpool_forward(const Tensor& x, LayerCache& cache) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t oh = H / 2, ow = W / 2;
  Tensor y(Shape{C, oh, ow});
  cache.index.assign(C * oh * ow, 0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (c * H + 2 * oy) * W + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * H + 2 * oy + dy) * W + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;  // strict: first maximum wins
          }
        }
        const std::size_t o = (c * oh + oy) * ow + ox;
        y[o] = x[best];
        cache.index[o] = best;
      }
    }
  }
  return y;
}

inline Tensor dense_forward(const Layer& L, const Tensor& x) {
  const auto U = static_cast<Eigen::Index>(L.spec.units);
  const auto N = static_cast<Eigen::Index>(x.size());
  Tensor y(Shape{L.spec.units});
  CMapMat W(L.params[0].data(), U, N);
  MapVec(y.data(), U).noalias() = W * CMapVec(x.data(), N) + CMapVec(L.params[1].data(), U);
  return y;
}

inline Tensor dense_backward(const Layer& L, const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) {
  const auto U = static_cast<Eigen::Index>(L.spec.units);
  const auto N = static_cast<Eigen::Index>(cache.input.size());
  CMapVec g(dy.data(), U);
  CMapVec x(cache.input.data(), N);
  MapMat(grads[0].data(), U, N).noalias() += g * x.transpose();
  MapVec(grads[1].data(), U) += g;
  Tensor dx(cache.input.shape());
  MapVec(dx.data(), N).noalias() = CMapMat(L.params[0].data(), U, N).transpose() * g;
  return dx;
}

// LSTM gate layout per step in the cache: i, f, g, o, c, h (each `hidden`).
inline Tensor bilstm_forward(const Layer& L, const Tensor& x, LayerCache& cache) {
  const std::size_t H = L.spec.hidden;
  const std::size_t F = x.dim(x.rank() - 2), T = x.dim(x.rank() - 1);
  cache.aux.assign(2 * T * 6 * H, 0.0);
  Tensor y(Shape{2 * H});
  CMapMat X(x.data(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(T));
  for (std::size_t dir = 0; dir < 2; ++dir) {
    CMapMat Wx(L.params[3 * dir].data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(F));
    CMapMat Wh(L.params[3 * dir + 1].data(), static_cast<Eigen::Index>(4 * H), static_cast<Eigen::Index>(H));
    CMapVec b(L.params[3 * dir + 2].data(), static_cast<Eigen::Index>(4 * H));
    const RowMat AX = Wx * X;  // 4H x T
    Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(H));
    Eigen::VectorXd c_prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(H));
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = dir == 0 ? s : T - 1 - s;
      Eigen::VectorXd a = AX.col(static_cast<Eigen::Index>(t)) + Wh * h_prev + b;
      double* st = cache.aux.data() + (dir * T + s) * 6 * H;
      for (std::size_t k = 0; k < H; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        const double ig = sigmoid(a[ki]);
        const double fg = sigmoid(a[ki + static_cast<Eigen::Index>(H)]);
        const double gg = std::tanh(a[ki + static_cast<Eigen::Index>(2 * H)]);
        const double og = sigmoid(a[ki + static_cast<Eigen::Index>(3 * H)]);
        const double c = fg * c_prev[ki] + ig * gg;
        const double h = og * std::tanh(c);
        st[k] = ig;
        st[H + k] = fg;
        st[2 * H + k] = gg;
        st[3 * H + k] = og;
        st[4 * H + k] = c;
        st[5 * H + k] = h;
        c_prev[ki] = c;
        h_prev[ki] = h;
      }
    }
    for (std::size_t k = 0; k < H; ++k) y[dir * H + k] = h_prev[static_cast<Eigen::Index>(k)];
  }
  return y;
}

inline Tensor bilstm_backward(const Layer& L, const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads) {
  const std::size_t H = L.spec.hidden;
  const Tensor& x = cache.input;
  const std::size_t F = x.dim(x.rank() - 2), T = x.dim(x.rank() - 1);
  const auto eH = static_cast<Eigen::Index>(H), eF = static_cast<Eigen::Index>(F), eT = static_cast<Eigen::Index>(T);
  CMapMat X(x.data(), eF, eT);
  Tensor dx(x.shape(), 0.0);
  MapMat dX(dx.data(), eF, eT);

  std::vector<Tensor> local;
  for (std::size_t p = 0; p < L.params.size(); ++p) local.push_back(zeros_like(L.params[p]));

  for (std::size_t dir = 0; dir < 2; ++dir) {
    CMapMat Wx(L.params[3 * dir].data(), 4 * eH, eF);
    CMapMat Wh(L.params[3 * dir + 1].data(), 4 * eH, eH);
    RowMat dA = RowMat::Zero(4 * eH, eT);
    Eigen::VectorXd dh(eH), dc = Eigen::VectorXd::Zero(eH);
    for (std::size_t k = 0; k < H; ++k) dh[static_cast<Eigen::Index>(k)] = dy[dir * H + k];
    MapMat dWh(local[3 * dir + 1].data(), 4 * eH, eH);
    MapVec db(local[3 * dir + 2].data(), 4 * eH);
    for (std::size_t s = T; s-- > 0;) {
      const std::size_t t = dir == 0 ? s : T - 1 - s;
      const double* st = cache.aux.data() + (dir * T + s) * 6 * H;
      const double* prev = s > 0 ? cache.aux.data() + (dir * T + s - 1) * 6 * H : nullptr;
      Eigen::VectorXd da(4 * eH);
      for (std::size_t k = 0; k < H; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        const double ig = st[k], fg = st[H + k], gg = st[2 * H + k], og = st[3 * H + k], c = st[4 * H + k];
        const double c_prev = prev ? prev[4 * H + k] : 0.0;
        const double tc = std::tanh(c);
        const double d_o = dh[ki] * tc;
        const double dck = dc[ki] + dh[ki] * og * (1.0 - tc * tc);
        da[ki] = dck * gg * ig * (1.0 - ig);
        da[ki + eH] = dck * c_prev * fg * (1.0 - fg);
        da[ki + 2 * eH] = dck * ig * (1.0 - gg * gg);
        da[ki + 3 * eH] = d_o * og * (1.0 - og);
        dc[ki] = dck * fg;
      }
      dA.col(static_cast<Eigen::Index>(t)) = da;
      db += da;
      if (prev) {
        CMapVec h_prev(prev + 5 * H, eH);
        dWh.noalias() += da * h_prev.transpose();
      }
      dh = Wh.transpose() * da;
    }
    MapMat(local[3 * dir].data(), 4 * eH, eF).noalias() += dA * X.transpose();
    dX.noalias() += Wx.transpose() * dA;
  }

  if (L.spec.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor& g : local) sq += g.squared_norm();
    const double norm = std::sqrt(sq);
    if (norm > L.spec.clip_norm)
      for (Tensor& g : local) g *= L.spec.clip_norm / norm;
  }
  for (std::size_t p = 0; p < local.size(); ++p) grads[p] += local[p];
  return dx;
}

}  // namespace detail

inline Tensor layer_forward(const Layer& L, const Tensor& x, LayerCache& cache, const ForwardContext& ctx,
                            std::size_t layer_index = 0) {
  if (x.shape() != L.input_shape)
    detail::shape_error(layer_index, L.spec, "expected input " + shape_string(L.input_shape) + ", got " + shape_string(x.shape()));
  cache.input = x;
  cache.aux.clear();
  cache.index.clear();
  Tensor y;
  switch (L.spec.kind) {
    case LayerKind::CONV2D: y = detail::conv_forward(L, x, cache); break;
    case LayerKind::MAXPOOL2X2: y = detail::maxpool_forward(x, cache); break;
    case LayerKind::DROPOUT: {
      y = x;
      if (ctx.training && L.spec.rate > 0.0) {
        const double keep = 1.0 - L.spec.rate;
        Rng rng(mix_keys(ctx.noise_key, layer_index));
        cache.aux.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          cache.aux[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
          y[i] *= cache.aux[i];
        }
      }
      break;
    }
    case LayerKind::DENSE: y = detail::dense_forward(L, x); break;
    case LayerKind::RELU:
      y = x;
      for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
      break;
    case LayerKind::FLATTEN:
      y = x;
      y.reshape({x.size()});
      break;
    case LayerKind::BILSTM: y = detail::bilstm_forward(L, x, cache); break;
    case LayerKind::SOFTMAX: {
      y = x;
      const double m = *std::max_element(y.values().begin(), y.values().end());
      double sum = 0.0;
      for (double& v : y.values()) sum += (v = std::exp(v - m));
      for (double& v : y.values()) v /= sum;
      break;
    }
  }
  cache.output = y;
  return y;
}

/// Propagates `dy` through the layer, accumulating parameter gradients into
/// `grads` (same order and shapes as `L.params`), and returns d/dinput.
inline Tensor layer_backward(const Layer& L, const Tensor& dy, const LayerCache& cache, std::span<Tensor> grads,
                             std::size_t layer_index = 0) {
  if (cache.input.shape() != L.input_shape || dy.shape() != L.output_shape || cache.output.shape() != L.output_shape)
    fail(Errc::stale_cache, "layer " + std::to_string(layer_index) + " (" + std::string(layer_kind_name(L.spec.kind)) +
                                "): cache or gradient does not match the layer shapes");
  if (grads.size() != L.params.size()) fail(Errc::stale_cache, "gradient slots do not match layer parameters");
  switch (L.spec.kind) {
    case LayerKind::CONV2D: return detail::conv_backward(L, dy, cache, grads);
    case LayerKind::MAXPOOL2X2: {
      if (cache.index.size() != dy.size()) fail(Errc::stale_cache, "maxpool routing missing");
      Tensor dx(cache.input.shape(), 0.0);
      for (std::size_t o = 0; o < dy.size(); ++o) dx[cache.index[o]] += dy[o];
      return dx;
    }
    case LayerKind::DROPOUT: {
      Tensor dx = dy;
      if (!cache.aux.empty())
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= cache.aux[i];
      return dx;
    }
    case LayerKind::DENSE: return detail::dense_backward(L, dy, cache, grads);
    case LayerKind::RELU: {
      Tensor dx = dy;
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(cache.input[i] > 0.0)) dx[i] = 0.0;
      return dx;
    }
    case LayerKind::FLATTEN: {
      Tensor dx = dy;
      dx.reshape(cache.input.shape());
      return dx;
    }
    case LayerKind::BILSTM: return detail::bilstm_backward(L, dy, cache, grads);
    case LayerKind::SOFTMAX: {
      const Tensor& y = cache.output;
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += dy[i] * y[i];
      Tensor dx(y.shape());
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
      return dx;
    }
  }
  return {};
}

}  // namespace ipt::nn
