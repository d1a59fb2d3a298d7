#pragma once

// Synthetic walker: piecewise-linear route with dwell stops and in-place
// turns, emitting logfile text plus the exact ground truth.

#include <cmath>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/geometry.hpp"
#include "ipt/core/text.hpp"
#include "ipt/ingest.hpp"
#include "ipt/nn/random.hpp"

namespace ipt::bench {

struct SimWaypoint {
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
  double dwell = 0.0;  // s spent standing on arrival
};

struct SimAccessPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  int floor = 0;
  double tx_power = -40.0;  // dBm at 1 m
};

struct SimNoise {
  double acce = 0.3;         // m/s^2
  double gyro = 0.02;        // rad/s
  double magn = 1.0;         // uT
  double pressure = 0.02;    // hPa
  double rss = 4.0;          // dBm shadowing
  double yaw = 0.01;         // rad, white noise on the AHRS yaw
  double yaw_walk = 0.002;   // rad/sqrt(s), random walk on the AHRS yaw
  double yaw_drift = 0.001;  // rad/s, std of the per-track constant drift rate
  double yaw_bias = 0.05;    // rad, std of the initial AHRS offset
};

struct SimScenario {
  std::vector<SimWaypoint> waypoints;
  double speed = 1.0;           // m/s
  double step_frequency = 2.0;  // Hz
  double step_amplitude = 2.0;  // m/s^2
  double turn_rate = M_PI / 2;  // rad/s
  double rate = 50.0;           // IMU/AHRS sample rate, Hz
  double pressure_rate = 10.0;  // Hz
  double wifi_interval = 4.0;   // s
  double wifi_sensitivity = -95.0;  // dBm, weaker readings are not reported
  double path_loss_exponent = 2.0;
  double floor_height = 3.5;  // m
  std::vector<SimAccessPoint> ap_layout;
  SimNoise noise;
  bool emit_landmarks = true;
  bool emit_ahrs = true;
  std::uint64_t seed = 0;
};

inline double mean_rss(const SimAccessPoint& ap, Vec2 p, int floor, double exponent, double floor_height) {
  const double dz = floor_height * static_cast<double>(ap.floor - floor);
  const double d = std::sqrt((Vec2{ap.x, ap.y} - p).squared_norm() + dz * dz);
  return ap.tx_power - 10.0 * exponent * std::log10(std::max(d, 1.0));
}

/// One piece of the schedule: standing, turning in place, or walking.
struct SimPhase {
  enum Kind { DWELL, TURN, WALK } kind = DWELL;
  double t0 = 0.0, t1 = 0.0;
  Vec2 p0, p1;
  double yaw0 = 0.0, yaw1 = 0.0;
  double z0 = 0.0, z1 = 0.0;  // height in floors, fractional on stairs
};

struct TruthSample {
  double t = 0.0;
  Vec2 xy;
  int floor = 0;
  double yaw = 0.0;
};

/// Exact ground truth of a simulated walk.
class SimTruth {
 public:
  SimTruth() = default;
  explicit SimTruth(std::vector<SimPhase> phases) : phases_(std::move(phases)) {}

  double t_end() const { return phases_.empty() ? 0.0 : phases_.back().t1; }
  const std::vector<SimPhase>& phases() const { return phases_; }

  TruthSample at(double t) const {
    const SimPhase& ph = phase(t);
    const double u = ph.t1 > ph.t0 ? std::clamp((t - ph.t0) / (ph.t1 - ph.t0), 0.0, 1.0) : 1.0;
    TruthSample s;
    s.t = t;
    s.xy = ph.p0 + (ph.p1 - ph.p0) * u;
    s.yaw = ph.yaw0 + (ph.yaw1 - ph.yaw0) * u;
    s.floor = static_cast<int>(std::lround(ph.z0 + (ph.z1 - ph.z0) * u));
    return s;
  }
  double height(double t) const {
    const SimPhase& ph = phase(t);
    const double u = ph.t1 > ph.t0 ? std::clamp((t - ph.t0) / (ph.t1 - ph.t0), 0.0, 1.0) : 1.0;
    return ph.z0 + (ph.z1 - ph.z0) * u;
  }
  bool walking(double t) const { return phase(t).kind == SimPhase::WALK; }
  double yaw_rate(double t) const {
    const SimPhase& ph = phase(t);
    return ph.kind == SimPhase::TURN && ph.t1 > ph.t0 ? (ph.yaw1 - ph.yaw0) / (ph.t1 - ph.t0) : 0.0;
  }

  /// Ground truth every `step` seconds as landmarks, for evaluation.
  std::vector<Landmark> sampled(double step, double t_from = 0.0) const {
    std::vector<Landmark> out;
    for (long k = 0;; ++k) {
      const double t = t_from + static_cast<double>(k) * step;
      if (t > t_end() + 1e-9) break;
      const TruthSample s = at(t);
      out.push_back({t, s.xy.x, s.xy.y, s.floor});
    }
    return out;
  }

 private:
  const SimPhase& phase(double t) const {
    if (phases_.empty()) fail(Errc::empty_input, "empty simulation schedule");
    const auto it = std::upper_bound(phases_.begin(), phases_.end(), t, [](double v, const SimPhase& p) { return v < p.t1; });
    return it == phases_.end() ? phases_.back() : *it;
  }

  std::vector<SimPhase> phases_;
};

inline void validate(const SimScenario& sc) {
  if (sc.waypoints.empty()) fail(Errc::config, "scenario needs at least one waypoint");
  if (!(sc.speed > 0.0)) fail(Errc::config, "speed must be positive");
  if (!(sc.rate > 0.0) || !(sc.pressure_rate > 0.0) || !(sc.wifi_interval > 0.0) || !(sc.turn_rate > 0.0))
    fail(Errc::config, "rates and intervals must be positive");
  for (std::size_t i = 1; i < sc.waypoints.size(); ++i) {
    const auto& a = sc.waypoints[i - 1];
    const auto& b = sc.waypoints[i];
    if (a.x == b.x && a.y == b.y && a.floor == b.floor)
      fail(Errc::config, "waypoints " + std::to_string(i - 1) + " and " + std::to_string(i) + " coincide");
  }
}

/// Dwell at each waypoint, turn in place toward the next leg, walk it.
/// A closed route ends with a turn back to the first leg's heading.
inline SimTruth build_schedule(const SimScenario& sc) {
  validate(sc);
  const auto& w = sc.waypoints;
  auto leg_yaw = [&](std::size_t i) { return std::atan2(w[i + 1].y - w[i].y, w[i + 1].x - w[i].x); };
  auto wrap = [](double a) { return std::remainder(a, 2.0 * M_PI); };
  std::vector<SimPhase> ph;
  double t = 0.0;
  double yaw = w.size() > 1 ? leg_yaw(0) : 0.0;
  auto add = [&](SimPhase::Kind k, double dur, Vec2 p0, Vec2 p1, double y0, double y1, double z0, double z1) {
    if (dur <= 0.0) return;
    ph.push_back({k, t, t + dur, p0, p1, y0, y1, z0, z1});
    t += dur;
  };
  auto turn_to = [&](Vec2 p, double z, double target) {
    const double d = wrap(target - yaw);
    add(SimPhase::TURN, std::abs(d) / sc.turn_rate, p, p, yaw, yaw + d, z, z);
    yaw += d;
  };
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vec2 p{w[i].x, w[i].y};
    const double z = w[i].floor;
    add(SimPhase::DWELL, w[i].dwell, p, p, yaw, yaw, z, z);
    if (i + 1 < w.size()) {
      turn_to(p, z, leg_yaw(i));
      const Vec2 q{w[i + 1].x, w[i + 1].y};
      const double len = std::sqrt((q - p).squared_norm());
      add(SimPhase::WALK, len / sc.speed, p, q, yaw, yaw, z, w[i + 1].floor);
    } else if (w.size() > 2 && w.front().x == w.back().x && w.front().y == w.back().y) {
      turn_to(p, z, leg_yaw(0));
    }
  }
  if (ph.empty()) ph.push_back({SimPhase::DWELL, 0.0, 0.0, Vec2{w[0].x, w[0].y}, Vec2{w[0].x, w[0].y}, yaw, yaw, 0.0, 0.0});
  return SimTruth(std::move(ph));
}

/// Arrival time at each waypoint.
inline std::vector<double> waypoint_times(const SimTruth& truth) {
  std::vector<double> out{0.0};
  for (const auto& p : truth.phases())
    if (p.kind == SimPhase::WALK) out.push_back(p.t1);
  return out;
}

struct SimTrack {
  std::string logfile;
  SimTruth truth;
  std::vector<Landmark> landmarks;  // ground truth at waypoint arrivals
};

inline SimTrack simulate_track(const SimScenario& sc) {
  SimTrack out;
  out.truth = build_schedule(sc);
  const SimTruth& truth = out.truth;
  nn::Rng rng(sc.seed);
  const SimNoise& nz = sc.noise;
  const double yaw_bias = rng.normal(0.0, nz.yaw_bias);
  const double drift = rng.normal(0.0, nz.yaw_drift);

  const auto times = waypoint_times(truth);
  for (std::size_t i = 0; i < sc.waypoints.size() && i < times.size(); ++i)
    out.landmarks.push_back({times[i], sc.waypoints[i].x, sc.waypoints[i].y, sc.waypoints[i].floor});

  std::vector<RawRecord> recs;
  const double t_end = truth.t_end();
  const auto n = static_cast<std::size_t>(std::floor(t_end * sc.rate + 1e-9)) + 1;
  const double dt = 1.0 / sc.rate;
  double phase = 0.0;  // walking phase, cycles
  double yaw_walk = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    const TruthSample s = truth.at(t);
    const bool walking = truth.walking(t);
    if (i > 0 && truth.walking(t - 0.5 * dt)) phase += sc.step_frequency * dt;
    const double bounce = walking ? sc.step_amplitude * std::sin(2.0 * M_PI * phase) : 0.0;
    recs.push_back({RecordKind::ACCE, t, t, {rng.normal(0.0, nz.acce), rng.normal(0.0, nz.acce), 9.81 + bounce + rng.normal(0.0, nz.acce)}, {}});
    recs.push_back({RecordKind::GYRO, t, t, {rng.normal(0.0, nz.gyro), rng.normal(0.0, nz.gyro), truth.yaw_rate(t) + rng.normal(0.0, nz.gyro)}, {}});
    const Vec2 m = rotate(Vec2{45.0, 0.0}, -s.yaw);
    recs.push_back({RecordKind::MAGN, t, t, {m.x + rng.normal(0.0, nz.magn), m.y + rng.normal(0.0, nz.magn), rng.normal(0.0, nz.magn)}, {}});
    if (sc.emit_ahrs) {
      if (i > 0) yaw_walk += rng.normal(0.0, nz.yaw_walk * std::sqrt(dt));
      const double ahrs = std::remainder(s.yaw + yaw_bias + drift * t + yaw_walk + rng.normal(0.0, nz.yaw), 2.0 * M_PI);
      recs.push_back({RecordKind::AHRS, t, t, {ahrs, 0.0, 0.0}, {}});
    }
  }
  const auto n_pres = static_cast<std::size_t>(std::floor(t_end * sc.pressure_rate + 1e-9)) + 1;
  for (std::size_t i = 0; i < n_pres; ++i) {
    const double t = static_cast<double>(i) / sc.pressure_rate;
    const double p = 1013.25 - 0.12 * (sc.floor_height * truth.height(t)) + rng.normal(0.0, nz.pressure);
    recs.push_back({RecordKind::PRES, t, t, {p}, {}});
  }
  for (double t = sc.wifi_interval; t <= t_end + 1e-9; t += sc.wifi_interval) {
    const TruthSample s = truth.at(t);
    double offset = 0.0;
    for (const auto& ap : sc.ap_layout) {
      const double rss = mean_rss(ap, s.xy, s.floor, sc.path_loss_exponent, sc.floor_height) + rng.normal(0.0, nz.rss);
      if (rss < sc.wifi_sensitivity) continue;
      recs.push_back({RecordKind::WIFI, t + offset, t + offset, {std::round(std::min(rss, kRssCeiling))}, ap.id});
      offset += 0.01;
    }
  }
  if (sc.emit_landmarks)
    for (const auto& l : out.landmarks)
      recs.push_back({RecordKind::POSI, l.timestamp, l.timestamp, {l.x, l.y, static_cast<double>(l.floor)}, {}});
  std::stable_sort(recs.begin(), recs.end(), [](const RawRecord& a, const RawRecord& b) { return a.app_timestamp < b.app_timestamp; });
  out.logfile = serialize_records(recs);
  return out;
}

// ---------------------------------------------------------------------------
// Scenario S1: a 30 x 20 m corridor loop with a U-shaped notch.

inline const std::vector<Vec2>& s1_loop() {
  static const std::vector<Vec2> loop{{0, 0}, {30, 0}, {30, 20}, {20, 20}, {20, 10}, {10, 10}, {10, 20}, {0, 20}};
  return loop;
}

/// Twenty access points shared by every track of one building seed.
inline std::vector<SimAccessPoint> s1_access_points(std::uint64_t building_seed, std::size_t count = 20) {
  nn::Rng rng(nn::mix_keys(building_seed, 0x415053ULL));
  std::vector<SimAccessPoint> aps;
  for (std::size_t i = 0; i < count; ++i) {
    char id[24];
    std::snprintf(id, sizeof id, "ap%02zu", i);
    aps.push_back({id, rng.uniform(-5.0, 35.0), rng.uniform(-5.0, 25.0), 0, rng.uniform(-45.0, -35.0)});
  }
  return aps;
}

/// About five minutes around the loop: two laps plus two legs, a 3 s dwell
/// at start and end and a 4 s stop at the notch every lap. Walking speed
/// varies per track, with the step frequency tracking it (0.5 m strides).
inline SimScenario s1_scenario(std::uint64_t building_seed, std::uint64_t track) {
  SimScenario sc;
  sc.seed = nn::mix_keys(building_seed, 1000 + track);
  nn::Rng rng(nn::mix_keys(sc.seed, 0x5350454544ULL));
  sc.speed = rng.uniform(0.9, 1.1);
  sc.step_frequency = 2.0 * sc.speed;
  sc.ap_layout = s1_access_points(building_seed);
  const auto& loop = s1_loop();
  for (std::size_t k = 0; k < 2 * loop.size() + 3; ++k) {
    const Vec2 p = loop[k % loop.size()];
    sc.waypoints.push_back({p.x, p.y, 0, k % loop.size() == 4 ? 4.0 : 0.0});
  }
  sc.waypoints.front().dwell = 3.0;
  sc.waypoints.back().dwell = 3.0;
  return sc;
}

// ---------------------------------------------------------------------------
// Scenario JSON

inline SimScenario scenario_from_json(const nlohmann::json& j) {
  SimScenario sc;
  try {
    if (j.contains("preset")) {
      if (j.at("preset").get<std::string>() != "s1") fail(Errc::config, "unknown scenario preset");
      sc = s1_scenario(j.value("building_seed", std::uint64_t{0}), j.value("track", std::uint64_t{0}));
    }
    if (j.contains("waypoints")) {
      sc.waypoints.clear();
      for (const auto& w : j.at("waypoints"))
        sc.waypoints.push_back({w.at("x").get<double>(), w.at("y").get<double>(), w.value("floor", 0), w.value("dwell", 0.0)});
    }
    if (j.contains("ap_layout")) {
      sc.ap_layout.clear();
      for (const auto& a : j.at("ap_layout"))
        sc.ap_layout.push_back({a.at("id").get<std::string>(), a.at("x").get<double>(), a.at("y").get<double>(),
                                a.value("floor", 0), a.value("tx_power", -40.0)});
    }
    sc.speed = j.value("speed", sc.speed);
    sc.step_frequency = j.value("step_frequency", sc.step_frequency);
    sc.step_amplitude = j.value("step_amplitude", sc.step_amplitude);
    sc.turn_rate = j.value("turn_rate", sc.turn_rate);
    sc.rate = j.value("rate", sc.rate);
    sc.pressure_rate = j.value("pressure_rate", sc.pressure_rate);
    sc.wifi_interval = j.value("wifi_interval", sc.wifi_interval);
    sc.wifi_sensitivity = j.value("wifi_sensitivity", sc.wifi_sensitivity);
    sc.path_loss_exponent = j.value("path_loss_exponent", sc.path_loss_exponent);
    sc.floor_height = j.value("floor_height", sc.floor_height);
    sc.emit_landmarks = j.value("emit_landmarks", sc.emit_landmarks);
    sc.emit_ahrs = j.value("emit_ahrs", sc.emit_ahrs);
    sc.seed = j.value("seed", sc.seed);
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      SimNoise& z = sc.noise;
      z.acce = n.value("acce", z.acce);
      z.gyro = n.value("gyro", z.gyro);
      z.magn = n.value("magn", z.magn);
      z.pressure = n.value("pressure", z.pressure);
      z.rss = n.value("rss", z.rss);
      z.yaw = n.value("yaw", z.yaw);
      z.yaw_walk = n.value("yaw_walk", z.yaw_walk);
      z.yaw_drift = n.value("yaw_drift", z.yaw_drift);
      z.yaw_bias = n.value("yaw_bias", z.yaw_bias);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad scenario: ") + e.what());
  }
  validate(sc);
  return sc;
}

}  // namespace ipt::bench
