#pragma once

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/text.hpp"
#include "ipt/ingest.hpp"
#include "ipt/tracking.hpp"

namespace ipt::bench {

/// Linear interpolation between order statistics (position q * (n - 1)).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) fail(Errc::empty_input, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

struct ErrorReport {
  double mae = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double q90 = 0.0;
  std::vector<double> errors;  // per truth point, metres
  std::size_t floor_errors = 0;
};

inline ErrorReport summarize_errors(std::vector<double> errors, std::size_t floor_errors = 0) {
  if (errors.empty()) fail(Errc::empty_input, "no errors to summarize");
  ErrorReport r;
  double sum = 0.0;
  for (double e : errors) sum += e;
  r.mae = sum / static_cast<double>(errors.size());
  r.q50 = quantile(errors, 0.50);
  r.q75 = quantile(errors, 0.75);
  r.q90 = quantile(errors, 0.90);
  r.errors = std::move(errors);
  r.floor_errors = floor_errors;
  return r;
}

/// Position at each truth time by interpolating the predicted grid; the
/// error adds `floor_penalty` metres per floor of mismatch.
inline ErrorReport evaluate_track(const FusedTrack& predicted, const std::vector<Landmark>& truth, double floor_penalty = 15.0) {
  if (truth.empty()) fail(Errc::empty_input, "no truth points");
  const auto& pts = predicted.points;
  std::vector<std::string> outside;
  for (const auto& l : truth)
    if (pts.empty() || l.timestamp < pts.front().timestamp - 1e-9 || l.timestamp > pts.back().timestamp + 1e-9)
      outside.push_back(text::format_double(l.timestamp));
  if (!outside.empty()) {
    std::string list;
    for (std::size_t i = 0; i < outside.size() && i < 20; ++i) list += (i ? ", " : "") + outside[i];
    if (outside.size() > 20) list += ", ...";
    fail(Errc::coverage, std::to_string(outside.size()) + " truth timestamps outside the predicted span: " + list);
  }
  std::vector<double> errors;
  std::size_t floor_errors = 0;
  for (const auto& l : truth) {
    auto it = std::lower_bound(pts.begin(), pts.end(), l.timestamp,
                               [](const FusedPoint& p, double t) { return p.timestamp < t; });
    Vec2 xy;
    int floor;
    if (it == pts.begin()) {
      xy = it->xy, floor = it->floor;
    } else if (it == pts.end()) {
      xy = pts.back().xy, floor = pts.back().floor;
    } else {
      const FusedPoint& a = *(it - 1);
      const FusedPoint& b = *it;
      const double w = (l.timestamp - a.timestamp) / (b.timestamp - a.timestamp);
      xy = a.xy + (b.xy - a.xy) * w;
      floor = w < 0.5 ? a.floor : b.floor;
    }
    const int df = std::abs(floor - l.floor);
    if (df) ++floor_errors;
    errors.push_back(std::sqrt((xy - Vec2{l.x, l.y}).squared_norm()) + floor_penalty * df);
  }
  return summarize_errors(std::move(errors), floor_errors);
}

inline nlohmann::json report_to_json(const ErrorReport& r) {
  return {{"mae", r.mae}, {"q50", r.q50}, {"q75", r.q75}, {"q90", r.q90}, {"n", r.errors.size()},
          {"floor_errors", r.floor_errors}, {"errors", r.errors}};
}

}  // namespace ipt::bench
