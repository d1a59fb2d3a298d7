#pragma once

// Deep PDR: a CNN (or BiLSTM) that maps a 1 s sensor window to the body-frame
// displacement across it plus a walking/still classification, trained on
// pseudo labels. Also a classic step-and-heading baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ipt/core/error.hpp"
#include "ipt/core/geometry.hpp"
#include "ipt/features.hpp"
#include "ipt/labels.hpp"
#include "ipt/nn/adam.hpp"
#include "ipt/nn/checkpoint.hpp"
#include "ipt/nn/loss.hpp"
#include "ipt/nn/network.hpp"

namespace ipt {

enum class PdrArch { CNN, BILSTM };

struct PdrModelConfig {
  WindowMode input_mode = WindowMode::RAW;
  PdrArch arch = PdrArch::CNN;
  std::vector<nn::LayerSpec> trunk;  // empty selects the default trunk for `arch`
  std::size_t window_width = 50;
  std::size_t train_stride = 50;
  std::size_t inference_stride = 25;
  double dropout = 0.25;
  std::size_t lstm_hidden = 64;
  double lstm_clip = 5.0;
  RecurrenceConfig recurrence;

  double alpha = 1.0;
  nn::AdamConfig adam;
  std::size_t batch_size = 64;
  std::size_t patience = 50;
  std::size_t max_epochs = 500;
  bool exclude_still_from_regression = false;
  std::size_t ground_truth_repeat = 1;  // oversampling of landmark-anchored windows
  double walk_threshold = 0.5;
  std::uint64_t seed = 0;
};

/// A network together with the configuration and per-row input
/// standardization it was trained with.
struct PdrModel {
  PdrModelConfig cfg;
  nn::Network net;
  std::vector<double> row_mean;
  std::vector<double> row_scale;
};

inline std::string_view arch_name(PdrArch a) { return a == PdrArch::CNN ? "CNN" : "BILSTM"; }
inline std::string_view mode_name(WindowMode m) { return m == WindowMode::RAW ? "RAW" : "RP"; }

inline nn::NetworkSpec pdr_network_spec(const PdrModelConfig& cfg) {
  using nn::LayerSpec;
  const std::size_t rows = cfg.input_mode == WindowMode::RAW ? kImuRows.size() : cfg.window_width;
  nn::NetworkSpec spec;
  spec.trunk = cfg.trunk;
  if (cfg.arch == PdrArch::CNN) {
    spec.input_shape = {1, rows, cfg.window_width};
    if (spec.trunk.empty())
      spec.trunk = {LayerSpec::conv2d(16, 3, 5), LayerSpec::relu(), LayerSpec::maxpool2x2(),
                    LayerSpec::conv2d(32, 3, 3), LayerSpec::relu(), LayerSpec::dropout(cfg.dropout),
                    LayerSpec::conv2d(32, 3, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
                    LayerSpec::dropout(cfg.dropout), LayerSpec::flatten(), LayerSpec::dense(128), LayerSpec::relu()};
  } else {
    spec.input_shape = {rows, cfg.window_width};
    if (spec.trunk.empty())
      spec.trunk = {LayerSpec::bilstm(cfg.lstm_hidden, cfg.lstm_clip), LayerSpec::dense(128), LayerSpec::relu()};
  }
  spec.regression_head = {LayerSpec::dense(2)};
  spec.activity_head = {LayerSpec::dense(2)};
  return spec;
}

inline void validate(const PdrModelConfig& cfg) {
  if (cfg.window_width < 4) fail(Errc::config, "window width must be at least 4 samples");
  if (cfg.train_stride == 0 || cfg.inference_stride == 0) fail(Errc::config, "strides must be positive");
  if (cfg.batch_size == 0) fail(Errc::config, "batch size must be positive");
  if (!(cfg.alpha >= 0.0)) fail(Errc::config, "alpha must be non-negative");
  if (!(cfg.adam.lr > 0.0) || cfg.adam.weight_decay < 0.0) fail(Errc::config, "invalid optimizer settings");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) fail(Errc::config, "dropout rate must lie in [0, 1)");
  if (cfg.max_epochs == 0) fail(Errc::config, "max_epochs must be positive");
  if (cfg.ground_truth_repeat == 0) fail(Errc::config, "ground_truth_repeat must be at least 1");
}

/// Builds the network for `cfg`; shape problems surface as configuration errors.
inline PdrModel build_model(const PdrModelConfig& cfg) {
  validate(cfg);
  PdrModel m;
  m.cfg = cfg;
  try {
    m.net = nn::Network(pdr_network_spec(cfg), cfg.seed);
  } catch (const Error& e) {
    if (e.code() == Errc::shape) fail(Errc::config, e.what());
    throw;
  }
  const std::size_t rows = cfg.input_mode == WindowMode::RAW ? kImuRows.size() : cfg.window_width;
  m.row_mean.assign(rows, 0.0);
  m.row_scale.assign(rows, 1.0);
  return m;
}

/// Converts a RAW window into the network input tensor: recurrence plot in RP
/// mode, then per-row standardization with the model's statistics.
inline nn::Tensor model_input(const PdrModel& m, const SensorWindow& raw) {
  if (raw.mode != WindowMode::RAW) fail(Errc::config, "model input is built from RAW windows");
  if (raw.cols != m.cfg.window_width)
    fail(Errc::shape, "window has " + std::to_string(raw.cols) + " columns, model expects " +
                          std::to_string(m.cfg.window_width));
  const SensorWindow w = m.cfg.input_mode == WindowMode::RP ? recurrence_matrix(raw, m.cfg.recurrence) : raw;
  nn::Tensor t(m.net.spec().input_shape);
  if (t.size() != w.data.size()) fail(Errc::shape, "window size does not match the model input");
  for (std::size_t r = 0; r < w.rows; ++r)
    for (std::size_t c = 0; c < w.cols; ++c) t[r * w.cols + c] = (w.at(r, c) - m.row_mean[r]) * m.row_scale[r];
  return t;
}

/// Fits per-row mean and inverse standard deviation over training windows.
/// Recurrence plots are already bounded and are left as is.
inline void fit_input_normalization(PdrModel& m, const std::vector<PseudoLabeledSample>& train) {
  const std::size_t rows = m.row_mean.size();
  m.row_mean.assign(rows, 0.0);
  m.row_scale.assign(rows, 1.0);
  if (m.cfg.input_mode == WindowMode::RP || train.empty()) return;
  std::vector<double> sum(rows, 0.0), sq(rows, 0.0);
  double count = 0.0;
  for (const auto& s : train) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < s.window.cols; ++c) {
        const double v = s.window.at(r, c);
        sum[r] += v;
        sq[r] += v * v;
      }
    count += static_cast<double>(s.window.cols);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double mu = sum[r] / count;
    const double var = std::max(0.0, sq[r] / count - mu * mu);
    m.row_mean[r] = mu;
    m.row_scale[r] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
}

/// Rotates every delta by -yaw(t_center) so targets are heading-aligned.
inline std::vector<PseudoLabeledSample> to_body_frame(std::vector<PseudoLabeledSample> samples, const SensorStream& stream) {
  const SensorStream s = ensure_yaw(stream);
  for (auto& smp : samples) smp.delta = rotate(smp.delta, -s.sample_at(channel::yaw, smp.window.t_center));
  return samples;
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double regr = 0.0;  // validation regression term
  double ce = 0.0;    // validation cross-entropy term
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
  bool diverged = false;
  std::string diagnostics;
};

struct TrainResult {
  PdrModel model;
  TrainHistory history;
};

/// Patience-based stopping on a strictly improving validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the next epoch's loss; returns true when training should stop.
  bool update(double val_loss) {
    ++epoch_;
    if (val_loss < best_) {
      best_ = val_loss;
      best_epoch_ = epoch_;
    }
    return epoch_ - best_epoch_ >= patience_;
  }

  bool improved_last() const { return best_epoch_ == epoch_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

namespace detail {

struct PreparedSample {
  nn::Tensor input;
  nn::Tensor target;  // 1 x 2
  int label = 1;
};

inline std::vector<PreparedSample> prepare(const PdrModel& m, const std::vector<PseudoLabeledSample>& samples,
                                           std::size_t repeat_ground_truth) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    PreparedSample p{model_input(m, s.window), nn::Tensor({1, 2}, {s.delta.x, s.delta.y}),
                     s.activity == Activity::WALKING ? 1 : 0};
    const std::size_t copies = s.provenance == Provenance::GROUND_TRUTH ? repeat_ground_truth : 1;
    for (std::size_t k = 1; k < copies; ++k) out.push_back(p);
    out.push_back(std::move(p));
  }
  return out;
}

struct LossParts {
  double regr = 0.0;
  double ce = 0.0;
};

/// Per-sample loss terms and, if requested, the head gradients scaled by `scale`.
inline LossParts sample_loss(const PdrModel& m, const nn::NetworkOutput& out, const PreparedSample& s, double scale,
                             nn::Tensor* dreg, nn::Tensor* dlog) {
  const bool skip_regr = m.cfg.exclude_still_from_regression && s.label == 0;
  nn::Tensor pred({1, 2}, out.regression.storage());
  nn::Tensor logits({1, 2}, out.logits.storage());
  const int labels[1] = {s.label};
  LossParts parts;
  parts.regr = skip_regr ? 0.0 : nn::l2_displacement_loss(pred, s.target, dreg);
  parts.ce = nn::cross_entropy_loss(logits, labels, dlog);
  if (dreg) {
    if (skip_regr) *dreg = nn::Tensor({1, 2}, 0.0);
    dreg->reshape({2});
    *dreg *= scale;
  }
  if (dlog) {
    dlog->reshape({2});
    *dlog *= scale * m.cfg.alpha;
  }
  return parts;
}

inline LossParts evaluate(const PdrModel& m, const std::vector<PreparedSample>& set) {
  LossParts acc;
  for (const auto& s : set) {
    const auto p = sample_loss(m, m.net.predict(s.input), s, 1.0, nullptr, nullptr);
    acc.regr += p.regr;
    acc.ce += p.ce;
  }
  acc.regr /= static_cast<double>(set.size());
  acc.ce /= static_cast<double>(set.size());
  return acc;
}

}  // namespace detail

/// Mini-batch Adam on regr + alpha * ce with a seeded shuffle per epoch.
/// Keeps the parameters with the best validation loss and stops after
/// `patience` epochs without improvement or at `max_epochs`. A non-finite
/// loss stops training with `history.diverged` set and the last good model.
inline TrainResult train_pdr(PdrModel model, const std::vector<PseudoLabeledSample>& train,
                             const std::vector<PseudoLabeledSample>& val) {
  if (train.empty() || val.empty()) fail(Errc::insufficient_data, "training and validation sets must be non-empty");
  const PdrModelConfig& cfg = model.cfg;
  validate(cfg);
  fit_input_normalization(model, train);
  const auto train_set = detail::prepare(model, train, cfg.ground_truth_repeat);
  const auto val_set = detail::prepare(model, val, 1);

  TrainResult result{model, {}};
  TrainHistory& hist = result.history;
  EarlyStopping stopper(cfg.patience);
  nn::AdamState adam;
  std::vector<std::size_t> order(train_set.size());
  std::uint64_t step = 0;
  auto params = model.net.parameters();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    nn::Rng shuffle(nn::mix_keys(cfg.seed, 0x5348554646ULL + epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);

    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(b1 - b0);
      auto grads = model.net.zero_gradients();
      double batch_loss = 0.0;
      for (std::size_t j = b0; j < b1; ++j) {
        const auto& s = train_set[order[j]];
        nn::NetworkCache cache;
        const nn::ForwardContext ctx{true, nn::mix_keys(nn::mix_keys(cfg.seed, step), j - b0)};
        const auto out = model.net.forward(s.input, cache, ctx);
        nn::Tensor dreg, dlog;
        const auto parts = detail::sample_loss(model, out, s, scale, &dreg, &dlog);
        batch_loss += nn::total_loss(parts.regr, parts.ce, cfg.alpha);
        model.net.backward(cache, dreg, dlog, grads);
      }
      ++step;
      if (!std::isfinite(batch_loss)) {
        hist.diverged = true;
        hist.diagnostics = "non-finite training loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
        return result;
      }
      try {
        nn::adam_step(params, grads, adam, cfg.adam);
      } catch (const Error& e) {
        if (e.code() != Errc::divergence) throw;
        hist.diverged = true;
        hist.diagnostics = std::string(e.what()) + " at epoch " + std::to_string(epoch);
        return result;
      }
      epoch_loss += batch_loss;
    }

    const auto v = detail::evaluate(model, val_set);
    EpochRecord rec{epoch, epoch_loss / static_cast<double>(train_set.size()), nn::total_loss(v.regr, v.ce, cfg.alpha),
                    v.regr, v.ce};
    if (!std::isfinite(rec.val_loss)) {
      hist.diverged = true;
      hist.diagnostics = "non-finite validation loss at epoch " + std::to_string(epoch);
      return result;
    }
    hist.epochs.push_back(rec);
    const bool stop = stopper.update(rec.val_loss);
    if (stopper.improved_last()) {
      result.model = model;
      hist.best_epoch = epoch;
      hist.best_val_loss = rec.val_loss;
    }
    if (stop) {
      hist.early_stopped = true;
      break;
    }
  }
  return result;
}

inline std::string history_to_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,regr,ce\n";
  for (const auto& e : h.epochs)
    out << e.epoch << ',' << text::format_double(e.train_loss) << ',' << text::format_double(e.val_loss) << ','
        << text::format_double(e.regr) << ',' << text::format_double(e.ce) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Inference

struct DisplacementPrediction {
  double t_center = 0.0;
  Vec2 delta;  // world frame, metres
  double activity_prob = 0.0;
};

struct BodyEstimate {
  Vec2 delta;  // body frame, displacement across the whole window
  double p_walk = 0.0;
};

inline SensorStream with_derived_channels(const SensorStream& stream) {
  SensorStream s = stream.has(channel::acce_mag) ? stream : magnitude_channels(stream);
  return ensure_yaw(s);
}

/// Slides windows at `stride` and turns each body-frame estimate into a
/// world-frame step: rotated by +yaw(t_center) and scaled by stride/width so
/// overlapping windows do not double count. Estimates with p_walk below
/// `walk_threshold` yield a zero step.
template <class Predictor>
std::vector<DisplacementPrediction> predict_displacements_with(const SensorStream& stream, std::size_t width,
                                                               std::size_t stride, double walk_threshold,
                                                               Predictor&& predictor) {
  const SensorStream s = with_derived_channels(stream);
  const auto batch = make_windows(s, width, stride);
  const double scale = static_cast<double>(stride) / static_cast<double>(width);
  std::vector<DisplacementPrediction> out;
  out.reserve(batch.windows.size());
  for (const auto& w : batch.windows) {
    const BodyEstimate e = predictor(w);
    DisplacementPrediction p;
    p.t_center = w.t_center;
    p.activity_prob = std::clamp(e.p_walk, 0.0, 1.0);
    if (p.activity_prob >= walk_threshold) p.delta = rotate(e.delta, s.sample_at(channel::yaw, w.t_center)) * scale;
    out.push_back(p);
  }
  return out;
}

inline BodyEstimate predict_window(const PdrModel& m, const SensorWindow& w) {
  const auto out = m.net.predict(model_input(m, w));
  const nn::Tensor p = nn::softmax(out.logits);
  return {Vec2{out.regression[0], out.regression[1]}, p[1]};
}

inline std::vector<DisplacementPrediction> predict_displacements(const PdrModel& m, const SensorStream& stream) {
  return predict_displacements_with(stream, m.cfg.window_width, m.cfg.inference_stride, m.cfg.walk_threshold,
                                     [&m](const SensorWindow& w) { return predict_window(m, w); });
}

/// Step-and-heading baseline: each detected step moves `stride_length`
/// metres along the current yaw.
inline std::vector<DisplacementPrediction> classic_pdr(const SensorStream& stream, double stride_length = 0.7,
                                                       const LabelConfig& cfg = {}) {
  const SensorStream s = with_derived_channels(stream);
  std::vector<DisplacementPrediction> out;
  for (const StepEvent& step : detect_steps(s, cfg)) {
    const double yaw = s.sample_at(channel::yaw, step.timestamp);
    out.push_back({step.timestamp, Vec2{std::cos(yaw), std::sin(yaw)} * stride_length, 1.0});
  }
  return out;
}

inline Vec2 cumulative_displacement(const std::vector<DisplacementPrediction>& preds) {
  Vec2 acc{};
  for (const auto& p : preds) acc += p.delta;
  return acc;
}

inline std::string predictions_to_csv(const std::vector<DisplacementPrediction>& preds) {
  std::ostringstream out;
  out << "t,dx,dy,p_walk\n";
  for (const auto& p : preds)
    out << text::format_double(p.t_center) << ',' << text::format_double(p.delta.x) << ','
        << text::format_double(p.delta.y) << ',' << text::format_double(p.activity_prob) << '\n';
  return out.str();
}

inline std::vector<DisplacementPrediction> predictions_from_csv(std::string_view content) {
  std::vector<DisplacementPrediction> out;
  std::size_t line_no = 0;
  for (std::string_view line : text::lines(content)) {
    ++line_no;
    line = text::trim(line);
    if (line_no == 1 || line.empty()) continue;
    const auto f = text::split(line, ',');
    if (f.size() < 4) fail(Errc::parse, "line " + std::to_string(line_no) + ": expected t,dx,dy,p_walk");
    out.push_back({detail::parse_field(f[0], line_no, "t"),
                   Vec2{detail::parse_field(f[1], line_no, "dx"), detail::parse_field(f[2], line_no, "dy")},
                   detail::parse_field(f[3], line_no, "p_walk")});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json pdr_config_to_json(const PdrModelConfig& c) {
  nlohmann::json trunk = nlohmann::json::array();
  for (const auto& s : c.trunk) trunk.push_back(nn::layer_spec_to_json(s));
  nlohmann::json j{{"input_mode", mode_name(c.input_mode)},
                   {"arch", arch_name(c.arch)},
                   {"trunk", trunk},
                   {"window_width", c.window_width},
                   {"train_stride", c.train_stride},
                   {"inference_stride", c.inference_stride},
                   {"dropout", c.dropout},
                   {"lstm_hidden", c.lstm_hidden},
                   {"lstm_clip", c.lstm_clip},
                   {"alpha", c.alpha},
                   {"lr", c.adam.lr},
                   {"weight_decay", c.adam.weight_decay},
                   {"batch_size", c.batch_size},
                   {"patience", c.patience},
                   {"max_epochs", c.max_epochs},
                   {"exclude_still_from_regression", c.exclude_still_from_regression},
                   {"ground_truth_repeat", c.ground_truth_repeat},
                   {"walk_threshold", c.walk_threshold},
                   {"seed", c.seed}};
  if (c.recurrence.epsilon) j["rp_epsilon"] = *c.recurrence.epsilon;
  j["rp_norm"] = c.recurrence.norm == RecurrenceNorm::EUCLIDEAN ? "EUCLIDEAN" : "MAX";
  return j;
}

/// Reads a config; absent keys keep their defaults, unknown enum values are
/// configuration errors.
inline PdrModelConfig pdr_config_from_json(const nlohmann::json& j, PdrModelConfig c = {}) {
  try {
    if (j.contains("input_mode")) {
      const auto m = j.at("input_mode").get<std::string>();
      if (m != "RAW" && m != "RP") fail(Errc::config, "input_mode must be RAW or RP");
      c.input_mode = m == "RAW" ? WindowMode::RAW : WindowMode::RP;
    }
    if (j.contains("arch")) {
      const auto a = j.at("arch").get<std::string>();
      if (a != "CNN" && a != "BILSTM") fail(Errc::config, "arch must be CNN or BILSTM");
      c.arch = a == "CNN" ? PdrArch::CNN : PdrArch::BILSTM;
    }
    if (j.contains("trunk")) {
      c.trunk.clear();
      for (const auto& s : j.at("trunk")) c.trunk.push_back(nn::layer_spec_from_json(s));
    }
    c.window_width = j.value("window_width", c.window_width);
    c.train_stride = j.value("train_stride", c.train_stride);
    c.inference_stride = j.value("inference_stride", c.inference_stride);
    c.dropout = j.value("dropout", c.dropout);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.lstm_clip = j.value("lstm_clip", c.lstm_clip);
    c.alpha = j.value("alpha", c.alpha);
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.weight_decay = j.value("weight_decay", c.adam.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patience = j.value("patience", c.patience);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.exclude_still_from_regression = j.value("exclude_still_from_regression", c.exclude_still_from_regression);
    c.ground_truth_repeat = j.value("ground_truth_repeat", c.ground_truth_repeat);
    c.walk_threshold = j.value("walk_threshold", c.walk_threshold);
    c.seed = j.value("seed", c.seed);
    if (j.contains("rp_epsilon")) c.recurrence.epsilon = j.at("rp_epsilon").get<double>();
    if (j.contains("rp_norm")) {
      const auto n = j.at("rp_norm").get<std::string>();
      if (n != "EUCLIDEAN" && n != "MAX") fail(Errc::config, "rp_norm must be EUCLIDEAN or MAX");
      c.recurrence.norm = n == "EUCLIDEAN" ? RecurrenceNorm::EUCLIDEAN : RecurrenceNorm::MAX;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad PDR configuration: ") + e.what());
  }
  return c;
}

inline std::string serialize_pdr_model(const PdrModel& m) {
  return nn::serialize_checkpoint(m.net, {{"pdr", pdr_config_to_json(m.cfg)},
                                          {"row_mean", m.row_mean},
                                          {"row_scale", m.row_scale}});
}

inline PdrModel deserialize_pdr_model(std::string_view bytes) {
  nn::Checkpoint ck = nn::deserialize_checkpoint(bytes);
  PdrModel m;
  try {
    m.cfg = pdr_config_from_json(ck.extra.at("pdr"));
    m.row_mean = ck.extra.at("row_mean").get<std::vector<double>>();
    m.row_scale = ck.extra.at("row_scale").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("checkpoint is not a PDR model: ") + e.what());
  }
  if (!(ck.network.spec() == pdr_network_spec(m.cfg))) fail(Errc::parse, "checkpoint network does not match its configuration");
  if (m.row_mean.size() != m.row_scale.size() || m.row_mean.size() != ck.network.spec().input_shape[ck.network.spec().input_shape.size() - 2])
    fail(Errc::parse, "checkpoint normalization does not match the input shape");
  m.net = std::move(ck.network);
  return m;
}

inline void save_pdr_model(const std::string& path, const PdrModel& m) { text::write_file(path, serialize_pdr_model(m)); }
inline PdrModel load_pdr_model(const std::string& path) { return deserialize_pdr_model(text::read_file(path)); }

}  // namespace ipt
