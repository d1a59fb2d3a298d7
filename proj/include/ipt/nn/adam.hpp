#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/nn/tensor.hpp"

namespace ipt::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Decoupled weight decay followed by a bias-corrected Adam update.
/// Moments are allocated on the first call. Non-finite gradients raise a
/// divergence error before any parameter is touched.
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
                      const AdamConfig& cfg = {}) {
  if (params.size() != grads.size()) fail(Errc::shape, "gradient count does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape())
      fail(Errc::shape, "gradient " + std::to_string(i) + " has shape " + shape_string(grads[i].shape()) +
                            ", parameter has " + shape_string(params[i]->shape()));
    if (!grads[i].all_finite()) fail(Errc::divergence, "non-finite gradient in parameter tensor " + std::to_string(i));
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(zeros_like(*p));
      state.v.push_back(zeros_like(*p));
    }
  }
  if (state.m.size() != params.size()) fail(Errc::shape, "optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] -= cfg.lr * cfg.weight_decay * p[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace ipt::nn
