#pragma once

// Framing of uniform sensor streams into fixed-size network inputs: raw
// 12 x width frames and recurrence-plot frames.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/stats.hpp"
#include "ipt/ingest.hpp"

namespace ipt {

enum class WindowMode : std::uint8_t { RAW = 0, RP = 1 };

/// Row order of a RAW frame.
inline constexpr std::array<std::string_view, 12> kImuRows{
    channel::acce_x, channel::acce_y, channel::acce_z, channel::acce_mag,
    channel::gyro_x, channel::gyro_y, channel::gyro_z, channel::gyro_mag,
    channel::magn_x, channel::magn_y, channel::magn_z, channel::magn_mag};

/// A rows x cols frame in row-major order. RAW frames hold the 12 IMU rows
/// over `cols` timesteps; RP frames are cols x cols recurrence matrices.
struct SensorWindow {
  WindowMode mode = WindowMode::RAW;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  double t_center = 0.0;
  std::size_t offset = 0;  // first sample index in the source stream
  std::string source_track;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

/// Adds acce_mag, gyro_mag and magn_mag = sqrt(x^2 + y^2 + z^2).
inline SensorStream magnitude_channels(const SensorStream& stream) {
  SensorStream out = stream;
  const std::array<std::array<std::string_view, 4>, 3> groups{{
      {channel::acce_x, channel::acce_y, channel::acce_z, channel::acce_mag},
      {channel::gyro_x, channel::gyro_y, channel::gyro_z, channel::gyro_mag},
      {channel::magn_x, channel::magn_y, channel::magn_z, channel::magn_mag},
  }};
  for (const auto& g : groups) {
    const auto& x = stream.channel(g[0]);
    const auto& y = stream.channel(g[1]);
    const auto& z = stream.channel(g[2]);
    std::vector<double> mag(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mag[i] = std::sqrt(x[i] * x[i] + y[i] * y[i] + z[i] * z[i]);
    out.set_channel(g[3], std::move(mag));
  }
  return out;
}

struct WindowBatch {
  std::vector<SensorWindow> windows;
  bool stream_too_short = false;
};

/// Slides a `width`-sample window with step `stride` and copies the 12 IMU
/// rows. The trailing partial window is dropped. t_center is the middle of
/// the window's time span [t_offset, t_offset + width / rate).
inline WindowBatch make_windows(const SensorStream& stream, std::size_t width = 50, std::size_t stride = 50,
                                const std::string& track = {}) {
  if (width == 0) fail(Errc::config, "window width must be positive");
  if (stride == 0) fail(Errc::config, "window stride must be at least 1");
  std::array<const std::vector<double>*, 12> rows{};
  for (std::size_t r = 0; r < kImuRows.size(); ++r) rows[r] = &stream.channel(kImuRows[r]);

  WindowBatch batch;
  if (stream.length() < width) {
    batch.stream_too_short = true;
    return batch;
  }
  for (std::size_t off = 0; off + width <= stream.length(); off += stride) {
    SensorWindow w;
    w.mode = WindowMode::RAW;
    w.rows = kImuRows.size();
    w.cols = width;
    w.offset = off;
    w.source_track = track;
    w.t_center = stream.time(off) + static_cast<double>(width) / (2.0 * stream.rate());
    w.data.resize(w.rows * width);
    for (std::size_t r = 0; r < w.rows; ++r)
      std::copy_n(rows[r]->begin() + static_cast<std::ptrdiff_t>(off), width, w.data.begin() + static_cast<std::ptrdiff_t>(r * width));
    batch.windows.push_back(std::move(w));
  }
  return batch;
}

enum class RecurrenceNorm { EUCLIDEAN, MAX };

/// Distance threshold and norm for recurrence plots. An unset epsilon means
/// the per-window median of pairwise distances.
struct RecurrenceConfig {
  std::optional<double> epsilon;
  RecurrenceNorm norm = RecurrenceNorm::EUCLIDEAN;
};

/// Recurrence matrix of a RAW window. Rows are standardized to zero mean and
/// unit variance (constant rows become zero), columns are the state vectors,
/// and R_ij = clamp(1 - ||v_i - v_j|| / epsilon, 0, 1).
inline SensorWindow recurrence_matrix(const SensorWindow& window, const RecurrenceConfig& cfg = {}) {
  if (window.mode != WindowMode::RAW) fail(Errc::config, "recurrence plot needs a RAW window");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) fail(Errc::config, "recurrence epsilon must be positive");
  const std::size_t d = window.rows;
  const std::size_t n = window.cols;

  std::vector<double> z(window.data);
  for (std::size_t r = 0; r < d; ++r) {
    std::span<double> row(z.data() + r * n, n);
    const double m = mean(row);
    const double s = stddev(row);
    for (double& v : row) v = s > 0.0 ? (v - m) / s : 0.0;
  }

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < d; ++r) {
        const double diff = z[r * n + i] - z[r * n + j];
        if (cfg.norm == RecurrenceNorm::EUCLIDEAN)
          acc += diff * diff;
        else
          acc = std::max(acc, std::abs(diff));
      }
      const double dij = cfg.norm == RecurrenceNorm::EUCLIDEAN ? std::sqrt(acc) : acc;
      dist[i * n + j] = dij;
      dist[j * n + i] = dij;
    }
  }

  double eps = 1.0;
  if (cfg.epsilon) {
    eps = *cfg.epsilon;
  } else if (n > 1) {
    std::vector<double> upper;
    upper.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) upper.push_back(dist[i * n + j]);
    const double med = median(std::move(upper));
    if (med > 0.0) eps = med;
  }

  SensorWindow out;
  out.mode = WindowMode::RP;
  out.rows = n;
  out.cols = n;
  out.t_center = window.t_center;
  out.offset = window.offset;
  out.source_track = window.source_track;
  out.data.assign(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = std::clamp(1.0 - dist[i * n + j] / eps, 0.0, 1.0);
      out.data[i * n + j] = r;
      out.data[j * n + i] = r;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary window cache: per window a 16-byte header
//   [0..3] "TFWD"  [4] mode  [5..7] zero  [8..11] rows u32  [12..15] cols u32
// followed by rows*cols little-endian float32 values.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

}  // namespace detail

inline void append_window_binary(std::string& out, const SensorWindow& w) {
  out.append("TFWD", 4);
  out.push_back(static_cast<char>(w.mode));
  out.append(3, '\0');
  detail::put_u32(out, static_cast<std::uint32_t>(w.rows));
  detail::put_u32(out, static_cast<std::uint32_t>(w.cols));
  for (double v : w.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline std::vector<SensorWindow> read_windows_binary(std::string_view in) {
  std::vector<SensorWindow> out;
  std::size_t pos = 0;
  while (pos < in.size()) {
    if (in.size() - pos < 16 || in.substr(pos, 4) != "TFWD")
      fail(Errc::parse, "bad window header at byte " + std::to_string(pos));
    SensorWindow w;
    const auto mode = static_cast<std::uint8_t>(in[pos + 4]);
    if (mode > 1) fail(Errc::parse, "unknown window mode " + std::to_string(mode));
    w.mode = static_cast<WindowMode>(mode);
    w.rows = detail::get_u32(in, pos + 8);
    w.cols = detail::get_u32(in, pos + 12);
    pos += 16;
    const std::size_t count = w.rows * w.cols;
    if (in.size() - pos < count * 4) fail(Errc::parse, "truncated window payload");
    w.data.resize(count);
    for (std::size_t i = 0; i < count; ++i, pos += 4) w.data[i] = std::bit_cast<float>(detail::get_u32(in, pos));
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace ipt
