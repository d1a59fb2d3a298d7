#pragma once

// Activity, step, turn and floor-change detectors, and the landmark
// interpolation that turns sparse ground truth into per-window displacement
// targets.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/geometry.hpp"
#include "ipt/core/stats.hpp"
#include "ipt/features.hpp"
#include "ipt/ingest.hpp"

namespace ipt {

enum class Activity { STILL = 0, WALKING = 1 };
enum class Provenance { GROUND_TRUTH, PSEUDO };

inline std::string_view activity_name(Activity a) { return a == Activity::STILL ? "STILL" : "WALKING"; }
inline std::string_view provenance_name(Provenance p) { return p == Provenance::PSEUDO ? "PSEUDO" : "GROUND_TRUTH"; }

struct ActivitySegment {
  double t_start = 0.0;
  double t_end = 0.0;
  Activity activity = Activity::STILL;
};

struct StepEvent {
  double timestamp = 0.0;
  double strength = 0.0;  // peak prominence, m/s^2
};

struct FloorChange {
  double timestamp = 0.0;
  int floor_delta = 0;
};

struct LabelConfig {
  double activity_window = 1.0;       // s
  double still_threshold = 0.35;      // std of acce_mag, m/s^2
  double min_segment = 1.0;           // s
  double step_smoothing = 0.33;       // moving-average length, s
  double step_prominence = 0.8;       // m/s^2
  double step_refractory = 0.25;      // s
  double turn_threshold = M_PI / 4;   // rad
  double turn_span = 2.0;             // s
  double turn_separation = 3.0;       // s
  double pressure_smoothing = 5.0;    // s
  double pressure_window = 30.0;      // s
  double pressure_trigger = 0.35;     // hPa
  double pressure_gradient = 0.12;    // hPa per metre
  double floor_height = 3.5;          // m
  double floor_separation = 20.0;     // s
};

/// Adds a yaw channel by integrating gyro_z when the stream has none.
inline SensorStream ensure_yaw(const SensorStream& stream) {
  if (stream.has(channel::yaw)) return stream;
  const auto& gz = stream.channel(channel::gyro_z);
  std::vector<double> yaw(gz.size(), 0.0);
  const double dt = 1.0 / stream.rate();
  for (std::size_t i = 1; i < gz.size(); ++i) yaw[i] = yaw[i - 1] + 0.5 * (gz[i - 1] + gz[i]) * dt;
  SensorStream out = stream;
  out.set_channel(channel::yaw, std::move(yaw));
  return out;
}

/// Labels 1 s windows STILL when the std of acce_mag is below the threshold,
/// merges equal neighbours and absorbs segments shorter than min_segment.
inline std::vector<ActivitySegment> detect_activity(const SensorStream& stream, const LabelConfig& cfg = {}) {
  const auto& mag = stream.channel(channel::acce_mag);
  std::vector<ActivitySegment> segs;
  if (mag.empty()) return segs;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.activity_window * stream.rate())));
  for (std::size_t start = 0; start < mag.size(); start += n) {
    const std::size_t end = std::min(mag.size(), start + n);
    const double s = stddev(std::span<const double>(mag.data() + start, end - start));
    const Activity a = s < cfg.still_threshold ? Activity::STILL : Activity::WALKING;
    const double t0 = stream.time(start), t1 = stream.time(end);
    if (!segs.empty() && segs.back().activity == a)
      segs.back().t_end = t1;
    else
      segs.push_back({t0, t1, a});
  }
  // Absorb short segments into their predecessor (or successor for the first).
  bool changed = true;
  while (changed && segs.size() > 1) {
    changed = false;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (segs[i].t_end - segs[i].t_start >= cfg.min_segment - 1e-9) continue;
      if (i > 0)
        segs[i - 1].t_end = segs[i].t_end;
      else
        segs[1].t_start = segs[0].t_start;
      segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(i));
      changed = true;
      break;
    }
    for (std::size_t i = 1; i < segs.size();) {
      if (segs[i].activity == segs[i - 1].activity) {
        segs[i - 1].t_end = segs[i].t_end;
        segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
      } else {
        ++i;
      }
    }
  }
  return segs;
}

inline Activity activity_at(const std::vector<ActivitySegment>& segs, double t) {
  for (const auto& s : segs)
    if (t >= s.t_start && t < s.t_end) return s.activity;
  if (!segs.empty() && t >= segs.back().t_end) return segs.back().activity;
  if (!segs.empty()) return segs.front().activity;
  return Activity::WALKING;
}

namespace detail {

/// Topographic prominence of the peak at index i.
inline double prominence(const std::vector<double>& x, std::size_t i) {
  double left_min = x[i];
  for (std::size_t j = i; j-- > 0;) {
    if (x[j] > x[i]) break;
    left_min = std::min(left_min, x[j]);
  }
  double right_min = x[i];
  for (std::size_t j = i + 1; j < x.size(); ++j) {
    if (x[j] > x[i]) break;
    right_min = std::min(right_min, x[j]);
  }
  return x[i] - std::max(left_min, right_min);
}

}  // namespace detail

/// Peaks of the low-passed acce_mag inside WALKING segments.
inline std::vector<StepEvent> detect_steps(const SensorStream& stream, const LabelConfig& cfg = {}) {
  const auto& mag = stream.channel(channel::acce_mag);
  auto width = static_cast<std::size_t>(std::lround(cfg.step_smoothing * stream.rate()));
  width = std::max<std::size_t>(1, width | 1u);
  const std::vector<double> f = moving_average(mag, width);
  const auto segs = detect_activity(stream, cfg);

  std::vector<std::pair<std::size_t, double>> candidates;
  for (std::size_t i = 1; i + 1 < f.size(); ++i) {
    if (!(f[i] > f[i - 1] && f[i] >= f[i + 1])) continue;
    if (activity_at(segs, stream.time(i)) != Activity::WALKING) continue;
    const double p = detail::prominence(f, i);
    if (p >= cfg.step_prominence) candidates.emplace_back(i, p);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<StepEvent> kept;
  for (const auto& [i, p] : candidates) {
    const double t = stream.time(i);
    const bool clash = std::any_of(kept.begin(), kept.end(), [&](const StepEvent& s) {
      return std::abs(s.timestamp - t) < cfg.step_refractory;
    });
    if (!clash) kept.push_back({t, p});
  }
  std::sort(kept.begin(), kept.end(), [](const StepEvent& a, const StepEvent& b) { return a.timestamp < b.timestamp; });
  return kept;
}

/// Times where the unwrapped yaw changes by at least turn_threshold over a
/// centered turn_span window; each burst reports its midpoint and bursts
/// closer than turn_separation are merged.
inline std::vector<double> detect_landmark_turns(const SensorStream& stream, const LabelConfig& cfg = {}) {
  const SensorStream with_yaw = ensure_yaw(stream);
  const std::vector<double> yaw = unwrap_angles(with_yaw.channel(channel::yaw));
  const std::size_t n = yaw.size();
  std::vector<double> out;
  if (n == 0) return out;
  const auto half = static_cast<std::size_t>(std::lround(cfg.turn_span * stream.rate() / 2.0));

  struct Burst {
    double start, end;
    double mid() const { return 0.5 * (start + end); }
  };
  std::vector<Burst> bursts;
  bool in_burst = false;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    const bool marked = std::abs(yaw[hi] - yaw[lo]) >= cfg.turn_threshold - 1e-12;
    const double t = stream.time(i);
    if (marked && !in_burst) bursts.push_back({t, t});
    if (marked) bursts.back().end = t;
    in_burst = marked;
  }
  std::vector<Burst> merged;
  for (const Burst& b : bursts) {
    if (!merged.empty() && b.mid() - merged.back().mid() < cfg.turn_separation)
      merged.back().end = b.end;
    else
      merged.push_back(b);
  }
  for (const Burst& b : merged) out.push_back(b.mid());
  return out;
}

/// Barometric floor changes: a lagged difference of the smoothed pressure
/// exceeding the trigger marks a transition; its extreme value gives the
/// height change via the pressure gradient.
inline std::vector<FloorChange> detect_floor_changes(const SensorStream& stream, const LabelConfig& cfg = {}) {
  const auto& p = stream.channel(channel::pressure);
  std::vector<FloorChange> events;
  if (p.size() < 2) return events;
  const auto smooth_n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.pressure_smoothing * stream.rate())));
  const std::vector<double> ps = moving_average(p, smooth_n);
  const auto lag = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.pressure_window * stream.rate())));

  auto emit = [&](std::size_t run_start, std::size_t run_end, double extreme) {
    const double mid = 0.5 * (stream.time(run_start) + stream.time(run_end));
    const double t = std::max(stream.t0(), mid - cfg.pressure_window / 2.0);
    const double dh = -extreme / cfg.pressure_gradient;
    const int floors = static_cast<int>(std::lround(dh / cfg.floor_height));
    if (floors == 0) return;
    if (!events.empty() && t - events.back().timestamp < cfg.floor_separation) return;
    events.push_back({t, floors});
  };

  bool in_run = false;
  int run_sign = 0;
  std::size_t run_start = 0;
  double extreme = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double d = ps[i] - ps[i >= lag ? i - lag : 0];
    const int sign = d >= cfg.pressure_trigger ? 1 : (d <= -cfg.pressure_trigger ? -1 : 0);
    if (in_run && sign != run_sign) {
      emit(run_start, i - 1, extreme);
      in_run = false;
    }
    if (sign != 0 && !in_run) {
      in_run = true;
      run_sign = sign;
      run_start = i;
      extreme = d;
    }
    if (in_run && std::abs(d) > std::abs(extreme)) extreme = d;
  }
  if (in_run) emit(run_start, ps.size() - 1, extreme);
  return events;
}

// ---------------------------------------------------------------------------
// Pseudo labels

struct PseudoLabelConfig {
  double kappa = 1.0;               // smoothing mass of the time term
  double anchor_radius = 0.5;       // s, windows this close to a landmark are GROUND_TRUTH
  double still_tolerance = 0.05;    // m
};

/// Position between consecutive landmarks A -> B as A + (B - A) w(t), where
/// w(t) = (steps in (t_A, t] + kappa * walk(t)) / (steps in (t_A, t_B] + kappa)
/// and walk(t) is the fraction of the segment's WALKING time elapsed by t.
/// Steps inside STILL segments are ignored, so w is frozen while still.
class PseudoTrajectory {
 public:
  PseudoTrajectory(std::vector<Landmark> landmarks, std::vector<StepEvent> steps,
                   std::vector<ActivitySegment> activity, double kappa = 1.0)
      : landmarks_(std::move(landmarks)), activity_(std::move(activity)), kappa_(kappa) {
    if (landmarks_.size() < 2) fail(Errc::insufficient_data, "pseudo labels need at least 2 landmarks");
    for (std::size_t i = 1; i < landmarks_.size(); ++i)
      if (!(landmarks_[i].timestamp > landmarks_[i - 1].timestamp))
        fail(Errc::ordering, "landmark timestamps must be strictly increasing (index " + std::to_string(i) + ")");
    if (kappa_ < 0.0) fail(Errc::config, "kappa must be non-negative");
    for (const StepEvent& s : steps)
      if (activity_.empty() || activity_at(activity_, s.timestamp) == Activity::WALKING) step_times_.push_back(s.timestamp);
    std::sort(step_times_.begin(), step_times_.end());
  }

  double t_begin() const { return landmarks_.front().timestamp; }
  double t_end() const { return landmarks_.back().timestamp; }
  bool covers(double t) const { return t >= t_begin() && t <= t_end(); }
  const std::vector<Landmark>& landmarks() const { return landmarks_; }

  /// Interpolation weight within the segment starting at landmark k.
  double weight(std::size_t k, double t) const {
    const Landmark& a = landmarks_[k];
    const Landmark& b = landmarks_[k + 1];
    if (t <= a.timestamp) return 0.0;
    if (t >= b.timestamp) return 1.0;
    const double total_steps = static_cast<double>(count_steps(a.timestamp, b.timestamp));
    const double steps = static_cast<double>(count_steps(a.timestamp, t));
    const double walk_total = walking_time(a.timestamp, b.timestamp);
    const double frac = walk_total > 0.0 ? walking_time(a.timestamp, t) / walk_total
                                         : (t - a.timestamp) / (b.timestamp - a.timestamp);
    const double denom = total_steps + kappa_;
    if (denom <= 0.0) return frac;
    return (steps + kappa_ * frac) / denom;
  }

  FloorPoint position(double t) const {
    if (t <= t_begin()) return point(landmarks_.front());
    if (t >= t_end()) return point(landmarks_.back());
    const auto it = std::upper_bound(landmarks_.begin(), landmarks_.end(), t,
                                     [](double v, const Landmark& l) { return v < l.timestamp; });
    const auto k = static_cast<std::size_t>(it - landmarks_.begin()) - 1;
    const Landmark& a = landmarks_[k];
    const Landmark& b = landmarks_[k + 1];
    if (t == a.timestamp) return point(a);
    const double w = weight(k, t);
    return {Vec2{a.x + (b.x - a.x) * w, a.y + (b.y - a.y) * w}, a.floor};
  }

 private:
  static FloorPoint point(const Landmark& l) { return {Vec2{l.x, l.y}, l.floor}; }

  std::size_t count_steps(double from, double to) const {
    const auto lo = std::upper_bound(step_times_.begin(), step_times_.end(), from);
    const auto hi = std::upper_bound(step_times_.begin(), step_times_.end(), to);
    return static_cast<std::size_t>(hi - lo);
  }

  double walking_time(double from, double to) const {
    if (activity_.empty()) return to - from;
    double acc = 0.0;
    for (const auto& s : activity_) {
      if (s.activity != Activity::WALKING) continue;
      acc += std::max(0.0, std::min(to, s.t_end) - std::max(from, s.t_start));
    }
    return acc;
  }

  std::vector<Landmark> landmarks_;
  std::vector<ActivitySegment> activity_;
  std::vector<double> step_times_;
  double kappa_;
};

struct PseudoLabeledSample {
  SensorWindow window;
  Vec2 delta;  // displacement across the window span, metres
  Activity activity = Activity::WALKING;
  Provenance provenance = Provenance::PSEUDO;
};

/// Pairs each window lying inside the landmark span with the interpolated
/// displacement across its time span [t_offset, t_offset + width / rate).
inline std::vector<PseudoLabeledSample> generate_pseudo_labels(const SensorStream& stream,
                                                               const std::vector<Landmark>& landmarks,
                                                               const std::vector<StepEvent>& steps,
                                                               const std::vector<ActivitySegment>& activity,
                                                               const std::vector<SensorWindow>& windows,
                                                               const PseudoLabelConfig& cfg = {}) {
  constexpr double tol = 1e-9;
  for (const Landmark& l : landmarks)
    if (l.timestamp < stream.t0() - tol || l.timestamp > stream.end_time() + tol)
      fail(Errc::range, "landmark at t=" + text::format_double(l.timestamp) + " lies outside the stream");
  const PseudoTrajectory traj(landmarks, steps, activity, cfg.kappa);

  std::vector<PseudoLabeledSample> out;
  for (const SensorWindow& w : windows) {
    const double ta = stream.time(w.offset);
    const double tb = stream.time(w.offset + w.cols);
    if (ta < traj.t_begin() - tol || tb > traj.t_end() + tol) continue;
    PseudoLabeledSample s;
    s.window = w;
    s.delta = traj.position(tb).xy - traj.position(ta).xy;
    s.activity = activity.empty() ? Activity::WALKING : activity_at(activity, w.t_center);
    // A window straddling motion cannot be labelled still.
    if (s.activity == Activity::STILL && s.delta.norm() >= cfg.still_tolerance) s.activity = Activity::WALKING;
    const bool anchored = std::any_of(landmarks.begin(), landmarks.end(), [&](const Landmark& l) {
      return std::abs(l.timestamp - w.t_center) <= cfg.anchor_radius;
    });
    s.provenance = anchored ? Provenance::GROUND_TRUTH : Provenance::PSEUDO;
    out.push_back(std::move(s));
  }
  return out;
}

/// CSV index `track,window_offset,dx,dy,activity,provenance`.
inline std::string pseudo_label_index_csv(const std::vector<PseudoLabeledSample>& samples) {
  std::ostringstream out;
  out << "track,window_offset,dx,dy,activity,provenance\n";
  for (const auto& s : samples)
    out << s.window.source_track << ',' << s.window.offset << ',' << text::format_double(s.delta.x) << ','
        << text::format_double(s.delta.y) << ',' << activity_name(s.activity) << ','
        << provenance_name(s.provenance) << '\n';
  return out.str();
}

}  // namespace ipt
