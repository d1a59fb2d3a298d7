#pragma once

// Central finite-difference verification of analytic gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/nn/random.hpp"
#include "ipt/nn/tensor.hpp"

namespace ipt::nn {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t samples_per_tensor = 64;  // 0 checks every entry
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  bool passed = true;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

/// Perturbs a random subsample of each tensor in `params` by +-step, evaluates
/// `loss`, and compares the central difference to `analytic`. Parameters are
/// restored exactly afterwards.
inline GradCheckReport check_gradients(const std::vector<Tensor*>& params, const std::vector<std::string>& names,
                                       const std::vector<Tensor>& analytic, const std::function<double()>& loss,
                                       const GradCheckOptions& opts = {}) {
  if (params.size() != analytic.size()) fail(Errc::shape, "analytic gradient count does not match parameters");
  Rng rng(opts.seed);
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    if (analytic[t].size() != p.size()) fail(Errc::shape, "analytic gradient shape mismatch");
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.samples_per_tensor > 0 && idx.size() > opts.samples_per_tensor) {
      for (std::size_t i = 0; i < opts.samples_per_tensor; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
      idx.resize(opts.samples_per_tensor);
    }
    GradCheckEntry entry{t < names.size() ? names[t] : std::to_string(t), idx.size(), 0.0};
    for (std::size_t k : idx) {
      const double saved = p[k];
      p[k] = saved + opts.step;
      const double up = loss();
      p[k] = saved - opts.step;
      const double down = loss();
      p[k] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      entry.max_relative_error = std::max(entry.max_relative_error, relative_error(analytic[t][k], numeric));
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_relative_error < opts.tolerance;
  return report;
}

}  // namespace ipt::nn
