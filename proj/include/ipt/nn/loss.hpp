#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "ipt/core/error.hpp"
#include "ipt/nn/tensor.hpp"

namespace ipt::nn {

/// Mean Euclidean norm of per-row errors for N x 2 tensors. When `grad` is
/// given it receives d loss / d pred, using sqrt(d^2 + 1e-12) in place of
/// the norm so the gradient is defined at zero error.
inline double l2_displacement_loss(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr) {
  if (pred.shape() != target.shape()) fail(Errc::shape, "prediction and target shapes differ");
  if (pred.size() == 0) fail(Errc::empty_batch, "displacement loss over an empty batch");
  if (pred.size() % 2 != 0) fail(Errc::shape, "displacement tensors must hold (dx, dy) pairs");
  const std::size_t n = pred.size() / 2;
  if (grad) *grad = Tensor(pred.shape(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pred[2 * i] - target[2 * i];
    const double dy = pred[2 * i + 1] - target[2 * i + 1];
    const double sq = dx * dx + dy * dy;
    total += std::sqrt(sq);
    if (grad) {
      const double smooth = std::sqrt(sq + 1e-12);
      (*grad)[2 * i] = dx / (smooth * static_cast<double>(n));
      (*grad)[2 * i + 1] = dy / (smooth * static_cast<double>(n));
    }
  }
  return total / static_cast<double>(n);
}

/// Softmax of a vector of logits.
inline Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  const double m = *std::max_element(p.values().begin(), p.values().end());
  double sum = 0.0;
  for (double& v : p.values()) sum += (v = std::exp(v - m));
  for (double& v : p.values()) v /= sum;
  return p;
}

/// Mean of -log softmax(logits)[label] over N rows of a N x C tensor.
inline double cross_entropy_loss(const Tensor& logits, std::span<const int> labels, Tensor* grad = nullptr) {
  if (labels.empty() || logits.size() == 0) fail(Errc::empty_batch, "cross entropy over an empty batch");
  if (logits.size() % labels.size() != 0) fail(Errc::shape, "logits do not divide into the label count");
  const std::size_t n = labels.size();
  const std::size_t c = logits.size() / n;
  if (grad) *grad = Tensor(logits.shape(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      fail(Errc::range, "class label " + std::to_string(labels[i]) + " out of range");
    const double* row = logits.data() + i * c;
    const double m = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += std::exp(row[k] - m);
    const double lse = m + std::log(sum);
    total += lse - row[labels[i]];
    if (grad) {
      for (std::size_t k = 0; k < c; ++k) {
        const double p = std::exp(row[k] - lse);
        (*grad)[i * c + k] = (p - (static_cast<std::size_t>(labels[i]) == k ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
  }
  return total / static_cast<double>(n);
}

inline double total_loss(double regr, double ce, double alpha = 1.0) { return regr + alpha * ce; }

}  // namespace ipt::nn
