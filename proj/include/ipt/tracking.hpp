#pragma once

// Position-only linear Kalman filter fusing PDR steps with WiFi fixes, a
// discrete floor side-channel, and the map-free weighted neighbourhood
// projection.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/geometry.hpp"
#include "ipt/core/text.hpp"
#include "ipt/pdr.hpp"
#include "ipt/wifi.hpp"

namespace ipt {

struct KalmanState {
  Vec2 mean;
  Mat2 cov = Mat2::identity();
  int floor = 0;
  double timestamp = 0.0;
};

inline Mat2 symmetrized(const Mat2& m) {
  const double off = 0.5 * (m.b + m.c);
  return {m.a, off, off, m.d};
}

/// Control step: the PDR delta moves the mean, Q widens the covariance.
inline KalmanState kf_predict(KalmanState s, Vec2 delta, const Mat2& q, std::optional<double> t = std::nullopt) {
  if (!std::isfinite(delta.x) || !std::isfinite(delta.y)) fail(Errc::input, "non-finite PDR delta");
  s.mean += delta;
  s.cov = symmetrized(s.cov + q);
  if (t) s.timestamp = *t;
  return s;
}

/// Identity measurement model: K = P (P + R)^-1.
inline KalmanState kf_update(KalmanState s, Vec2 z, const Mat2& r) {
  const Mat2 sum = s.cov + r;
  const double det = sum.determinant();
  const double scale = std::max({std::abs(sum.a), std::abs(sum.d), 1e-300});
  if (!std::isfinite(det) || std::abs(det) <= 1e-15 * scale * scale) fail(Errc::numeric, "singular innovation covariance");
  const Mat2 inv{sum.d / det, -sum.b / det, -sum.c / det, sum.a / det};
  const Mat2 k = s.cov * inv;
  s.mean += k * (z - s.mean);
  s.cov = symmetrized((Mat2::identity() - k) * s.cov);
  return s;
}

// ---------------------------------------------------------------------------
// Fusion

struct FloorEvent {
  double timestamp = 0.0;
  int delta = 0;
};

struct FusionConfig {
  double sigma0 = 5.0;      // initial position std, m
  double sigma_pdr = 0.1;   // process noise per PDR delta, m
  double grid_step = 0.5;   // output spacing, s
  bool adaptive_r = true;   // R from each fix's sigma; otherwise fixed_sigma
  double fixed_sigma = 3.0;
  std::optional<FloorPoint> start;  // initial position, used instead of the first fix
  std::optional<double> start_time;
  std::optional<double> t_begin;  // output span; defaults to the events' span
  std::optional<double> t_end;
  bool wifi_floor_votes = true;
  std::size_t floor_vote_count = 3;  // consecutive agreeing fixes needed to move the floor
  double barometer_hold = 30.0;      // s after a barometer event during which votes are ignored
};

struct FusedPoint {
  double timestamp = 0.0;
  Vec2 xy;
  int floor = 0;
  double ptrace = 0.0;
  bool extrapolated = false;  // before the filter was initialized
};

struct FusedTrack {
  std::vector<FusedPoint> points;
};

/// Collects PDR steps, WiFi fixes and floor events in any number of batches
/// and runs the filter over all of them in timestamp order. At equal
/// timestamps floor events come first, then PDR steps, then fixes; ties
/// within a kind keep insertion order.
class TrackFuser {
 public:
  explicit TrackFuser(FusionConfig cfg = {}) : cfg_(std::move(cfg)) {}

  void add_pdr(const std::vector<DisplacementPrediction>& steps) {
    for (const auto& s : steps) push(s.t_center, Kind::pdr, pdr_.size()), pdr_.push_back(s);
  }
  void add_fixes(const std::vector<WifiFix>& fixes) {
    for (const auto& f : fixes) push(f.timestamp, Kind::fix, fixes_.size()), fixes_.push_back(f);
  }
  void add_floor_events(const std::vector<FloorEvent>& events) {
    for (const auto& e : events) push(e.timestamp, Kind::floor, floors_.size()), floors_.push_back(e);
  }

  FusedTrack finish() const {
    if (pdr_.empty()) fail(Errc::empty_input, "fusion needs at least one PDR step");
    std::vector<Event> order = events_;
    std::stable_sort(order.begin(), order.end(), [](const Event& a, const Event& b) {
      return a.t != b.t ? a.t < b.t : static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    if (!cfg_.start && fixes_.empty()) fail(Errc::cannot_initialize, "no start position and no WiFi fix");

    const Mat2 q = Mat2::identity(cfg_.sigma_pdr * cfg_.sigma_pdr);
    std::vector<Snapshot> hist;
    std::vector<std::pair<double, Vec2>> pre_init;  // PDR steps consumed before initialization
    std::optional<KalmanState> state;
    double last_baro = -std::numeric_limits<double>::infinity();
    int pending_floor = 0;  // floor events before initialization
    std::vector<int> votes;

    if (cfg_.start) {
      KalmanState s;
      s.mean = cfg_.start->xy;
      s.floor = cfg_.start->floor;
      s.cov = Mat2::identity(cfg_.sigma0 * cfg_.sigma0);
      s.timestamp = cfg_.start_time.value_or(order.front().t);
      state = s;
      hist.push_back({s.timestamp, s.mean, s.floor, s.cov.trace()});
    }
    for (const Event& e : order) {
      if (state && e.t < state->timestamp) {
        // Events before an explicit start time only feed the back-fill.
        if (e.kind == Kind::pdr) pre_init.emplace_back(e.t, pdr_[e.index].delta);
        continue;
      }
      switch (e.kind) {
        case Kind::floor:
          last_baro = e.t;
          votes.clear();
          if (state) {
            state->floor += floors_[e.index].delta;
            state->timestamp = e.t;
          } else {
            pending_floor += floors_[e.index].delta;
          }
          break;
        case Kind::pdr:
          if (!state) {
            pre_init.emplace_back(e.t, pdr_[e.index].delta);
            continue;
          }
          *state = kf_predict(*state, pdr_[e.index].delta, q, e.t);
          break;
        case Kind::fix: {
          const WifiFix& f = fixes_[e.index];
          const double sigma = cfg_.adaptive_r ? f.sigma : cfg_.fixed_sigma;
          if (!state) {
            KalmanState s;
            s.mean = f.position;
            s.floor = f.floor + pending_floor;
            s.cov = Mat2::identity(cfg_.sigma0 * cfg_.sigma0);
            s.timestamp = e.t;
            state = s;
          } else {
            *state = kf_update(*state, f.position, Mat2::identity(sigma * sigma));
            state->timestamp = e.t;
          }
          if (cfg_.wifi_floor_votes && e.t - last_baro >= cfg_.barometer_hold) {
            votes.push_back(f.floor);
            if (votes.size() > cfg_.floor_vote_count) votes.erase(votes.begin());
            if (votes.size() == cfg_.floor_vote_count &&
                std::all_of(votes.begin(), votes.end(), [&](int v) { return v == votes.front(); }))
              state->floor = votes.front();
          }
          break;
        }
      }
      if (!state) continue;
      if (!hist.empty() && hist.back().t == e.t)
        hist.back() = {e.t, state->mean, state->floor, state->cov.trace()};
      else
        hist.push_back({e.t, state->mean, state->floor, state->cov.trace()});
    }
    const double t_init = hist.front().t;

    // Back-fill by integrating the early PDR steps in reverse from the first state.
    std::vector<Snapshot> back;
    {
      Vec2 pos = hist.front().mean;
      double trace = hist.front().ptrace;
      for (auto it = pre_init.rbegin(); it != pre_init.rend(); ++it) {
        back.push_back({it->first, pos, hist.front().floor, trace});
        pos -= it->second;
        trace += q.trace();
      }
      const double t0 = cfg_.t_begin.value_or(order.front().t);
      if (t0 < (pre_init.empty() ? t_init : pre_init.front().first)) back.push_back({t0, pos, hist.front().floor, trace});
      std::reverse(back.begin(), back.end());
      // A step exactly at t_init already ends at the first state.
      while (!back.empty() && back.back().t >= t_init) back.pop_back();
    }
    std::vector<Snapshot> all = back;
    all.insert(all.end(), hist.begin(), hist.end());

    const double t_begin = cfg_.t_begin.value_or(std::min(order.front().t, all.front().t));
    const double t_end = cfg_.t_end.value_or(std::max(order.back().t, all.back().t));
    const double step = cfg_.grid_step;
    FusedTrack out;
    const auto k0 = static_cast<long>(std::ceil(t_begin / step - 1e-9));
    const auto k1 = static_cast<long>(std::floor(t_end / step + 1e-9));
    std::size_t j = 0;
    for (long k = k0; k <= k1; ++k) {
      const double t = static_cast<double>(k) * step;
      while (j + 1 < all.size() && all[j + 1].t <= t) ++j;
      FusedPoint p;
      p.timestamp = t;
      p.extrapolated = t < t_init;
      if (t <= all.front().t) {
        p.xy = all.front().mean, p.floor = all.front().floor, p.ptrace = all.front().ptrace;
      } else if (j + 1 >= all.size()) {
        p.xy = all.back().mean, p.floor = all.back().floor, p.ptrace = all.back().ptrace;
      } else {
        const Snapshot& a = all[j];
        const Snapshot& b = all[j + 1];
        const double w = (t - a.t) / (b.t - a.t);
        p.xy = a.mean + (b.mean - a.mean) * w;
        p.floor = a.floor;
        p.ptrace = a.ptrace;
      }
      out.points.push_back(p);
    }
    return out;
  }

 private:
  enum class Kind { floor = 0, pdr = 1, fix = 2 };
  struct Event {
    double t;
    Kind kind;
    std::size_t index;
  };
  struct Snapshot {
    double t;
    Vec2 mean;
    int floor;
    double ptrace;
  };

  void push(double t, Kind kind, std::size_t index) {
    if (!std::isfinite(t)) fail(Errc::input, "non-finite event timestamp");
    events_.push_back({t, kind, index});
  }

  FusionConfig cfg_;
  std::vector<Event> events_;
  std::vector<DisplacementPrediction> pdr_;
  std::vector<WifiFix> fixes_;
  std::vector<FloorEvent> floors_;
};

inline FusedTrack fuse_track(const std::vector<DisplacementPrediction>& pdr, const std::vector<WifiFix>& fixes,
                             const std::vector<FloorEvent>& floor_events, const FusionConfig& cfg = {}) {
  TrackFuser f(cfg);
  f.add_pdr(pdr);
  f.add_fixes(fixes);
  f.add_floor_events(floor_events);
  return f.finish();
}

/// Barometric floor changes as fusion events.
inline std::vector<FloorEvent> floor_events_from(const std::vector<FloorChange>& changes) {
  std::vector<FloorEvent> out;
  for (const auto& c : changes) out.push_back({c.timestamp, c.floor_delta});
  return out;
}

inline std::string fused_track_to_csv(const FusedTrack& track) {
  std::ostringstream out;
  out << "t,x,y,floor,ptrace\n";
  for (const auto& p : track.points)
    out << text::format_double(p.timestamp) << ',' << text::format_double(p.xy.x) << ',' << text::format_double(p.xy.y)
        << ',' << p.floor << ',' << text::format_double(p.ptrace) << '\n';
  return out.str();
}

inline FusedTrack fused_track_from_csv(std::string_view content) {
  FusedTrack track;
  std::size_t line_no = 0;
  for (std::string_view line : text::lines(content)) {
    ++line_no;
    line = text::trim(line);
    if (line_no == 1 || line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() < 5) fail(Errc::parse, "line " + std::to_string(line_no) + ": expected t,x,y,floor,ptrace");
    FusedPoint p;
    p.timestamp = detail::parse_field(f[0], line_no, "t");
    p.xy = {detail::parse_field(f[1], line_no, "x"), detail::parse_field(f[2], line_no, "y")};
    p.floor = static_cast<int>(std::lround(detail::parse_field(f[3], line_no, "floor")));
    p.ptrace = detail::parse_field(f[4], line_no, "ptrace");
    track.points.push_back(p);
  }
  return track;
}

// ---------------------------------------------------------------------------
// Weighted neighbourhood projection

struct ProjectionIndex {
  std::vector<FloorPoint> points;
  std::size_t n_r = 5;
  double snap = 0.01;  // m

  ProjectionIndex() = default;
  ProjectionIndex(std::vector<FloorPoint> pts, std::size_t n = 5, double snap_distance = 0.01)
      : points(std::move(pts)), n_r(n), snap(snap_distance) {
    if (n_r == 0) fail(Errc::config, "N_r must be at least 1");
    for (const auto& p : points)
      if (!std::isfinite(p.xy.x) || !std::isfinite(p.xy.y)) fail(Errc::input, "non-finite reference point");
  }
};

/// Reference set: landmarks plus labeled fingerprint positions.
inline ProjectionIndex projection_index_from(const std::vector<Landmark>& landmarks, const RadioMap* map,
                                             std::size_t n_r = 5, double snap = 0.01) {
  std::vector<FloorPoint> pts;
  for (const auto& l : landmarks) pts.push_back({{l.x, l.y}, l.floor});
  if (map)
    for (const auto& f : map->fingerprints)
      if (f.position) pts.push_back(*f.position);
  return ProjectionIndex(std::move(pts), n_r, snap);
}

/// The N_r nearest reference points, restricted to p's floor when it has
/// enough of them. Ties break by (x, y, floor).
inline std::vector<FloorPoint> projection_neighbours(const ProjectionIndex& index, const FloorPoint& p) {
  if (index.points.empty()) fail(Errc::index, "empty projection index");
  const auto same = static_cast<std::size_t>(std::count_if(index.points.begin(), index.points.end(),
                                                           [&](const FloorPoint& r) { return r.floor == p.floor; }));
  const bool floor_only = same >= index.n_r;
  std::vector<std::pair<double, const FloorPoint*>> cand;
  for (const auto& r : index.points)
    if (!floor_only || r.floor == p.floor) cand.emplace_back((r.xy - p.xy).squared_norm(), &r);
  const std::size_t n = std::min(index.n_r, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(n), cand.end(), [](auto& a, auto& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.second->xy.x != b.second->xy.x) return a.second->xy.x < b.second->xy.x;
    if (a.second->xy.y != b.second->xy.y) return a.second->xy.y < b.second->xy.y;
    return a.second->floor < b.second->floor;
  });
  std::vector<FloorPoint> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(*cand[i].second);
  return out;
}

/// Inverse-distance average of the neighbours, or the nearest one when it is
/// within the snap distance. Floor = neighbour majority, ties to the nearest.
inline FloorPoint project_prediction(const ProjectionIndex& index, const FloorPoint& p) {
  const auto nb = projection_neighbours(index, p);
  if (std::sqrt((nb.front().xy - p.xy).squared_norm()) < index.snap) return nb.front();
  Vec2 acc{};
  double wsum = 0.0;
  std::map<int, std::size_t> counts;
  for (const auto& r : nb) {
    const double w = 1.0 / std::sqrt((r.xy - p.xy).squared_norm());
    acc += r.xy * w;
    wsum += w;
    ++counts[r.floor];
  }
  int floor = nb.front().floor;
  std::size_t best = counts[floor];
  for (const auto& [f, c] : counts)
    if (c > best) floor = f, best = c;
  return {acc * (1.0 / wsum), floor};
}

inline FusedTrack project_track(const ProjectionIndex& index, FusedTrack track) {
  for (auto& p : track.points) {
    const FloorPoint q = project_prediction(index, {p.xy, p.floor});
    p.xy = q.xy;
    p.floor = q.floor;
  }
  return track;
}

}  // namespace ipt
