#pragma once

// Logfile ingestion: parsing `KIND;app_ts;sensor_ts;values...` records,
// grouping WiFi bursts into scans, and resampling IMU channels onto a
// uniform clock.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/stats.hpp"
#include "ipt/core/text.hpp"

namespace ipt {

enum class RecordKind { ACCE, GYRO, MAGN, PRES, WIFI, POSI, AHRS };

inline std::string_view kind_name(RecordKind k) {
  switch (k) {
    case RecordKind::ACCE: return "ACCE";
    case RecordKind::GYRO: return "GYRO";
    case RecordKind::MAGN: return "MAGN";
    case RecordKind::PRES: return "PRES";
    case RecordKind::WIFI: return "WIFI";
    case RecordKind::POSI: return "POSI";
    case RecordKind::AHRS: return "AHRS";
  }
  return "?";
}

inline std::optional<RecordKind> kind_from_name(std::string_view s) {
  static constexpr std::array<RecordKind, 7> all{RecordKind::ACCE, RecordKind::GYRO, RecordKind::MAGN,
                                                 RecordKind::PRES, RecordKind::WIFI, RecordKind::POSI,
                                                 RecordKind::AHRS};
  for (RecordKind k : all)
    if (kind_name(k) == s) return k;
  return std::nullopt;
}

/// Number of numeric payload values a record of this kind carries. WIFI
/// carries an access-point id plus one RSS value.
inline std::size_t payload_arity(RecordKind k) {
  switch (k) {
    case RecordKind::ACCE:
    case RecordKind::GYRO:
    case RecordKind::MAGN:
    case RecordKind::AHRS:
    case RecordKind::POSI: return 3;
    case RecordKind::PRES:
    case RecordKind::WIFI: return 1;
  }
  return 0;
}

/// One logfile line. `values` holds SI readings (m/s^2, rad/s, uT), hPa for
/// PRES, RSS dBm for WIFI, (x, y, floor) for POSI and (yaw, pitch, roll) in
/// radians for AHRS.
struct RawRecord {
  RecordKind kind = RecordKind::ACCE;
  double app_timestamp = 0.0;
  double sensor_timestamp = 0.0;
  std::vector<double> values;
  std::string ap_id;  // WIFI only

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

struct WifiScan {
  double timestamp = 0.0;
  std::map<std::string, double, std::less<>> readings;  // AP id -> RSS dBm

  friend bool operator==(const WifiScan&, const WifiScan&) = default;
};

inline constexpr double kRssFloor = -110.0;
inline constexpr double kRssCeiling = 0.0;

struct Landmark {
  double timestamp = 0.0;
  double x = 0.0;
  double y = 0.0;
  int floor = 0;

  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct ParsedLog {
  std::vector<RawRecord> records;
  std::vector<WifiScan> scans;
  std::vector<Landmark> landmarks;
  std::size_t skipped_unknown = 0;  // lines with an unrecognised KIND
};

struct ParseOptions {
  double wifi_burst_gap = 0.5;  // seconds between WIFI lines of one scan
};

namespace detail {

[[noreturn]] inline void parse_failure(std::size_t line_no, const std::string& what) {
  fail(Errc::parse, "line " + std::to_string(line_no) + ": " + what);
}

inline double parse_field(std::string_view field, std::size_t line_no, const char* name) {
  double v = 0.0;
  if (!text::parse_double(field, v) || !std::isfinite(v))
    parse_failure(line_no, std::string("malformed ") + name + " '" + std::string(field) + "'");
  return v;
}

}  // namespace detail

/// Groups time-sorted WIFI records into scans: consecutive lines closer than
/// `gap` seconds belong to the same burst. Duplicate APs keep the strongest
/// reading; RSS is clamped to [-110, 0] dBm.
inline std::vector<WifiScan> group_wifi_scans(const std::vector<RawRecord>& records, double gap) {
  std::vector<WifiScan> scans;
  double last_t = 0.0;
  bool open = false;
  for (const RawRecord& r : records) {
    if (r.kind != RecordKind::WIFI) continue;
    if (!open || r.app_timestamp - last_t >= gap) {
      scans.push_back(WifiScan{r.app_timestamp, {}});
      open = true;
    }
    last_t = r.app_timestamp;
    const double rss = std::clamp(r.values.at(0), kRssFloor, kRssCeiling);
    auto [it, inserted] = scans.back().readings.emplace(r.ap_id, rss);
    if (!inserted) it->second = std::max(it->second, rss);
  }
  return scans;
}

/// Parses logfile text. Lines starting with `%` and blank lines are ignored;
/// lines with an unknown KIND are skipped and counted.
inline ParsedLog parse_log_text(std::string_view content, const ParseOptions& opts = {}) {
  ParsedLog log;
  std::size_t line_no = 0;
  for (std::string_view raw : text::lines(content)) {
    ++line_no;
    const std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '%') continue;
    const auto fields = text::split(line, ';');
    const auto kind = kind_from_name(text::trim(fields[0]));
    if (!kind) {
      ++log.skipped_unknown;
      continue;
    }
    if (fields.size() < 3) detail::parse_failure(line_no, "missing timestamps");
    RawRecord rec;
    rec.kind = *kind;
    rec.app_timestamp = detail::parse_field(fields[1], line_no, "app timestamp");
    rec.sensor_timestamp = detail::parse_field(fields[2], line_no, "sensor timestamp");
    if (rec.app_timestamp < 0.0) detail::parse_failure(line_no, "negative app timestamp");

    std::size_t first_value = 3;
    if (*kind == RecordKind::WIFI) {
      if (fields.size() < 5) detail::parse_failure(line_no, "WIFI needs an AP id and an RSS value");
      rec.ap_id = std::string(text::trim(fields[3]));
      if (rec.ap_id.empty()) detail::parse_failure(line_no, "empty access-point id");
      first_value = 4;
    }
    const std::size_t arity = payload_arity(*kind);
    if (fields.size() < first_value + arity)
      detail::parse_failure(line_no, std::string(kind_name(*kind)) + " needs " + std::to_string(arity) + " values");
    // Trailing fields (sensor accuracy and the like) are ignored.
    for (std::size_t i = 0; i < arity; ++i)
      rec.values.push_back(detail::parse_field(fields[first_value + i], line_no, "value"));
    if (*kind == RecordKind::POSI && rec.values[2] != std::round(rec.values[2]))
      detail::parse_failure(line_no, "floor must be an integer");
    log.records.push_back(std::move(rec));
  }
  if (log.records.empty()) fail(Errc::empty_input, "no valid records");

  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.app_timestamp < b.app_timestamp; });
  log.scans = group_wifi_scans(log.records, opts.wifi_burst_gap);
  for (const RawRecord& r : log.records) {
    if (r.kind == RecordKind::POSI)
      log.landmarks.push_back(Landmark{r.app_timestamp, r.values[0], r.values[1], static_cast<int>(r.values[2])});
  }
  return log;
}

inline ParsedLog parse_logfile(const std::string& path, const ParseOptions& opts = {}) {
  return parse_log_text(text::read_file(path), opts);
}

/// Writes records back in logfile syntax with round-trip exact numbers.
inline std::string serialize_records(const std::vector<RawRecord>& records) {
  std::string out;
  out.reserve(records.size() * 48);
  for (const RawRecord& r : records) {
    out += kind_name(r.kind);
    out += ';';
    out += text::format_double(r.app_timestamp);
    out += ';';
    out += text::format_double(r.sensor_timestamp);
    if (r.kind == RecordKind::WIFI) {
      out += ';';
      out += r.ap_id;
    }
    for (double v : r.values) {
      out += ';';
      out += text::format_double(v);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uniform streams

namespace channel {
inline constexpr std::string_view acce_x = "acce_x", acce_y = "acce_y", acce_z = "acce_z";
inline constexpr std::string_view gyro_x = "gyro_x", gyro_y = "gyro_y", gyro_z = "gyro_z";
inline constexpr std::string_view magn_x = "magn_x", magn_y = "magn_y", magn_z = "magn_z";
inline constexpr std::string_view pressure = "pressure", yaw = "yaw";
inline constexpr std::string_view acce_mag = "acce_mag", gyro_mag = "gyro_mag", magn_mag = "magn_mag";

/// Canonical export order.
inline constexpr std::array<std::string_view, 14> canonical{acce_x, acce_y, acce_z, gyro_x, gyro_y,
                                                           gyro_z, magn_x, magn_y, magn_z, pressure,
                                                           yaw,    acce_mag, gyro_mag, magn_mag};
}  // namespace channel

/// Multichannel samples on a uniform grid: sample i is at t0 + i / rate.
/// The stream covers [t0, t0 + length / rate).
class SensorStream {
 public:
  SensorStream() = default;
  SensorStream(double rate, double t0) : rate_(rate), t0_(t0) {}

  double rate() const { return rate_; }
  double t0() const { return t0_; }
  std::size_t length() const { return length_; }
  double time(std::size_t i) const { return t0_ + static_cast<double>(i) / rate_; }
  double end_time() const { return t0_ + static_cast<double>(length_) / rate_; }

  bool has(std::string_view name) const { return channels_.find(name) != channels_.end(); }

  const std::vector<double>& channel(std::string_view name) const {
    const auto it = channels_.find(name);
    if (it == channels_.end()) fail(Errc::missing_channel, "channel '" + std::string(name) + "' not present");
    return it->second;
  }

  void set_channel(std::string_view name, std::vector<double> values) {
    if (!channels_.empty() && values.size() != length_)
      fail(Errc::shape, "channel '" + std::string(name) + "' has " + std::to_string(values.size()) +
                            " samples, stream has " + std::to_string(length_));
    length_ = values.size();
    channels_.insert_or_assign(std::string(name), std::move(values));
  }

  std::vector<std::string> channel_names() const {
    std::vector<std::string> names;
    for (std::string_view c : channel::canonical)
      if (has(c)) names.emplace_back(c);
    for (const auto& [name, _] : channels_)
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    return names;
  }

  /// Linearly interpolated channel value at time t (clamped at the ends).
  double sample_at(std::string_view name, double t) const {
    const auto& v = channel(name);
    if (v.empty()) fail(Errc::range, "empty stream");
    const double pos = (t - t0_) * rate_;
    if (pos <= 0.0) return v.front();
    if (pos >= static_cast<double>(v.size() - 1)) return v.back();
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return v[i] + (v[i + 1] - v[i]) * frac;
  }

  friend bool operator==(const SensorStream&, const SensorStream&) = default;

 private:
  double rate_ = 50.0;
  double t0_ = 0.0;
  std::size_t length_ = 0;
  std::map<std::string, std::vector<double>, std::less<>> channels_;
};

struct ResampleOptions {
  bool require_pressure = false;
  bool require_yaw = false;
};

namespace detail {

struct Series {
  std::vector<double> t;
  std::vector<double> v;
};

inline void push_sample(Series& s, double t, double v) {
  // Duplicate timestamps keep the later reading.
  if (!s.t.empty() && s.t.back() == t) {
    s.v.back() = v;
    return;
  }
  s.t.push_back(t);
  s.v.push_back(v);
}

}  // namespace detail

/// Linearly interpolates every channel onto the uniform grid spanning the
/// overlap of all present channels: from the latest first sample to the
/// earliest last sample, inclusive. ACCE, GYRO and MAGN are required; PRES
/// and AHRS (yaw, unwrapped) are included when present.
inline SensorStream resample_stream(const std::vector<RawRecord>& records, double rate,
                                    const ResampleOptions& opts = {}) {
  if (!(rate > 0.0) || !std::isfinite(rate)) fail(Errc::config, "rate must be positive");

  std::map<std::string, detail::Series, std::less<>> series;
  auto add3 = [&](std::string_view a, std::string_view b, std::string_view c, const RawRecord& r) {
    detail::push_sample(series[std::string(a)], r.app_timestamp, r.values[0]);
    detail::push_sample(series[std::string(b)], r.app_timestamp, r.values[1]);
    detail::push_sample(series[std::string(c)], r.app_timestamp, r.values[2]);
  };
  for (const RawRecord& r : records) {
    switch (r.kind) {
      case RecordKind::ACCE: add3(channel::acce_x, channel::acce_y, channel::acce_z, r); break;
      case RecordKind::GYRO: add3(channel::gyro_x, channel::gyro_y, channel::gyro_z, r); break;
      case RecordKind::MAGN: add3(channel::magn_x, channel::magn_y, channel::magn_z, r); break;
      case RecordKind::PRES: detail::push_sample(series[std::string(channel::pressure)], r.app_timestamp, r.values[0]); break;
      case RecordKind::AHRS: detail::push_sample(series[std::string(channel::yaw)], r.app_timestamp, r.values[0]); break;
      default: break;
    }
  }

  std::vector<std::string_view> required{channel::acce_x, channel::gyro_x, channel::magn_x};
  if (opts.require_pressure) required.push_back(channel::pressure);
  if (opts.require_yaw) required.push_back(channel::yaw);
  for (std::string_view name : required) {
    const auto it = series.find(name);
    if (it == series.end()) fail(Errc::missing_channel, "channel '" + std::string(name) + "' missing from records");
  }
  // Channels with fewer than two samples cannot be interpolated.
  for (auto it = series.begin(); it != series.end();) {
    if (it->second.t.size() < 2) {
      const bool needed = std::find(required.begin(), required.end(), it->first) != required.end();
      if (needed) fail(Errc::missing_channel, "channel '" + it->first + "' needs at least 2 records");
      it = series.erase(it);
    } else {
      ++it;
    }
  }
  if (auto it = series.find(channel::yaw); it != series.end()) it->second.v = unwrap_angles(it->second.v);

  double t_start = -std::numeric_limits<double>::infinity();
  double t_end = std::numeric_limits<double>::infinity();
  for (const auto& [_, s] : series) {
    t_start = std::max(t_start, s.t.front());
    t_end = std::min(t_end, s.t.back());
  }
  if (!(t_end >= t_start)) fail(Errc::alignment, "channels do not overlap in time");
  const auto n = static_cast<std::size_t>(std::floor((t_end - t_start) * rate + 1e-9)) + 1;

  SensorStream stream(rate, t_start);
  for (const auto& [name, s] : series) {
    std::vector<double> out(n);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = t_start + static_cast<double>(i) / rate;
      while (seg + 2 < s.t.size() && s.t[seg + 1] <= t) ++seg;
      const double t0 = s.t[seg], t1 = s.t[seg + 1];
      if (t <= t0) {
        out[i] = s.v[seg];
      } else if (t >= t1) {
        out[i] = s.v[seg + 1];
      } else {
        out[i] = s.v[seg] + (s.v[seg + 1] - s.v[seg]) * ((t - t0) / (t1 - t0));
      }
    }
    stream.set_channel(name, std::move(out));
  }
  return stream;
}

/// Sub-stream covering [t_a, t_b).
inline SensorStream slice_stream(const SensorStream& s, double t_a, double t_b) {
  constexpr double tol = 1e-9;
  if (!(t_a < t_b) || t_a < s.t0() - tol || t_b > s.end_time() + tol)
    fail(Errc::range, "slice [" + text::format_double(t_a) + ", " + text::format_double(t_b) +
                          ") outside stream [" + text::format_double(s.t0()) + ", " +
                          text::format_double(s.end_time()) + ")");
  const double pa = (t_a - s.t0()) * s.rate();
  const double pb = (t_b - s.t0()) * s.rate();
  const auto ia = static_cast<std::size_t>(std::max(0.0, std::ceil(pa - tol)));
  const auto ib = std::min(s.length(), static_cast<std::size_t>(std::max(0.0, std::ceil(pb - tol))));
  if (ia >= ib) fail(Errc::range, "slice contains no samples");
  SensorStream out(s.rate(), s.time(ia));
  for (const std::string& name : s.channel_names()) {
    const auto& v = s.channel(name);
    out.set_channel(name, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(ia),
                                              v.begin() + static_cast<std::ptrdiff_t>(ib)));
  }
  return out;
}

/// CSV export: `t,<channels in canonical order>`, one row per sample.
inline std::string stream_to_csv(const SensorStream& s) {
  const auto names = s.channel_names();
  std::ostringstream out;
  out << 't';
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  std::vector<const std::vector<double>*> cols;
  for (const auto& n : names) cols.push_back(&s.channel(n));
  for (std::size_t i = 0; i < s.length(); ++i) {
    out << text::format_fixed(s.time(i), 4);
    for (const auto* c : cols) out << ',' << text::format_double((*c)[i]);
    out << '\n';
  }
  return out.str();
}

inline std::string landmarks_to_csv(const std::vector<Landmark>& landmarks) {
  std::ostringstream out;
  out << "t,x,y,floor\n";
  for (const Landmark& l : landmarks)
    out << text::format_double(l.timestamp) << ',' << text::format_double(l.x) << ','
        << text::format_double(l.y) << ',' << l.floor << '\n';
  return out.str();
}

inline std::vector<Landmark> landmarks_from_csv(std::string_view content) {
  std::vector<Landmark> out;
  std::size_t line_no = 0;
  for (std::string_view line : text::lines(content)) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line_no == 1) continue;
    const auto f = text::split(line, ',');
    if (f.size() < 4) detail::parse_failure(line_no, "landmark row needs t,x,y,floor");
    Landmark l;
    l.timestamp = detail::parse_field(f[0], line_no, "t");
    l.x = detail::parse_field(f[1], line_no, "x");
    l.y = detail::parse_field(f[2], line_no, "y");
    l.floor = static_cast<int>(std::lround(detail::parse_field(f[3], line_no, "floor")));
    out.push_back(l);
  }
  return out;
}

}  // namespace ipt
