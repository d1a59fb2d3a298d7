#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ipt/core/error.hpp"

namespace ipt {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Population standard deviation.
inline double stddev(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

/// Quantile by linear interpolation between order statistics: position
/// q * (n - 1) in the sorted sample.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) fail(Errc::empty_input, "quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + (xs[hi] - xs[lo]) * frac;
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

/// Centered moving average with `width` samples; the window shrinks at the
/// edges instead of padding.
inline std::vector<double> moving_average(std::span<const double> xs, std::size_t width) {
  const std::size_t n = xs.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  width = std::max<std::size_t>(width, 1);
  const std::size_t half = width / 2;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + xs[i];
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + (width - half));
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

/// Unwraps an angle sequence (radians) so consecutive samples never jump by
/// more than pi.
inline std::vector<double> unwrap_angles(std::span<const double> angles) {
  std::vector<double> out(angles.begin(), angles.end());
  constexpr double two_pi = 2.0 * M_PI;
  for (std::size_t i = 1; i < out.size(); ++i) {
    double d = out[i] - out[i - 1];
    const double k = std::round(d / two_pi);
    out[i] -= k * two_pi;
  }
  return out;
}

inline double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

/// Piecewise-linear interpolation of (ts, vs) at t, clamped at the ends.
/// `ts` must be sorted ascending.
inline double interpolate(std::span<const double> ts, std::span<const double> vs, double t) {
  if (ts.empty()) fail(Errc::empty_input, "interpolation over an empty series");
  if (t <= ts.front()) return vs.front();
  if (t >= ts.back()) return vs.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  const std::size_t lo = hi - 1;
  const double span = ts[hi] - ts[lo];
  if (span <= 0.0) return vs[hi];
  return vs[lo] + (vs[hi] - vs[lo]) * ((t - ts[lo]) / span);
}

}  // namespace ipt
