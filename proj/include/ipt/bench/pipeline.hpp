#pragma once

// The full chain: ingest -> features -> pseudo labels -> PDR training ->
// radiomap and WiFi fixes -> Kalman fusion -> projection -> evaluation.

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ipt/bench/metrics.hpp"
#include "ipt/core/error.hpp"
#include "ipt/core/text.hpp"
#include "ipt/features.hpp"
#include "ipt/ingest.hpp"
#include "ipt/labels.hpp"
#include "ipt/pdr.hpp"
#include "ipt/tracking.hpp"
#include "ipt/wifi.hpp"

namespace ipt::bench {

enum class WifiMethod { KNN, VAE };

struct PipelineConfig {
  std::vector<std::string> train_logs;
  std::vector<std::string> test_logs;
  std::vector<std::string> test_truth;  // optional t,x,y,floor CSV per test log; else its POSI lines
  std::string out_dir = "out";
  std::string pdr_model;  // load this checkpoint instead of training
  double rate = 50.0;
  double validation_fraction = 0.2;
  PdrModelConfig pdr;
  bool use_wifi = true;
  bool use_projection = true;
  WifiMethod wifi_method = WifiMethod::KNN;
  std::size_t knn_k = 5;
  VaeConfig vae;
  FusionConfig fusion;
  std::size_t n_r = 5;
  double snap = 0.01;
  double floor_penalty = 15.0;
  std::uint64_t seed = 0;
};

/// Runs `f`, prefixing any failure with the stage name.
template <class F>
auto run_stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(errc_name(e.code())) + " error: ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw Error(e.code(), "stage '" + name + "': " + msg);
  } catch (const std::exception& e) {
    fail(Errc::stage, "stage '" + name + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Per-track stages

struct TrackInput {
  std::string name;
  ParsedLog log;
  SensorStream stream;  // resampled, with magnitude and yaw channels
};

inline TrackInput load_track(std::string name, std::string_view logfile, double rate = 50.0) {
  TrackInput t;
  t.name = std::move(name);
  t.log = parse_log_text(logfile);
  t.stream = with_derived_channels(resample_stream(t.log.records, rate));
  return t;
}

struct LabeledTrack {
  std::vector<PseudoLabeledSample> samples;  // body-frame targets
  std::vector<StepEvent> steps;
  std::vector<ActivitySegment> activity;
  std::optional<PseudoTrajectory> trajectory;  // absent with fewer than 2 landmarks
};

inline LabeledTrack pseudo_label_track(const TrackInput& t, const PdrModelConfig& cfg) {
  LabeledTrack out;
  out.activity = detect_activity(t.stream);
  out.steps = detect_steps(t.stream);
  if (t.log.landmarks.size() < 2) return out;
  out.trajectory.emplace(t.log.landmarks, out.steps, out.activity);
  const auto windows = make_windows(t.stream, cfg.window_width, cfg.train_stride, t.name);
  out.samples = to_body_frame(generate_pseudo_labels(t.stream, t.log.landmarks, out.steps, out.activity, windows.windows),
                              t.stream);
  return out;
}

/// Seeded split of the pooled samples into training and validation sets.
inline std::pair<std::vector<PseudoLabeledSample>, std::vector<PseudoLabeledSample>> split_samples(
    std::vector<PseudoLabeledSample> all, double validation_fraction, std::uint64_t seed) {
  nn::Rng rng(nn::mix_keys(seed, 0x53504c4954ULL));
  for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.index(i)]);
  auto n_val = static_cast<std::size_t>(std::round(validation_fraction * static_cast<double>(all.size())));
  n_val = std::clamp<std::size_t>(n_val, all.size() > 1 ? 1 : 0, all.size() > 1 ? all.size() - 1 : 0);
  std::vector<PseudoLabeledSample> val(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  all.erase(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  return {std::move(all), std::move(val)};
}

struct TrainedModels {
  PdrModel pdr;
  TrainHistory history;
  RadioMap radiomap;
  std::optional<VaeModel> vae;
  ProjectionIndex projection;
};

/// Everything learned from the training tracks.
inline TrainedModels train_models(const std::vector<TrackInput>& tracks, const PipelineConfig& cfg,
                                  const std::optional<PdrModel>& preloaded = std::nullopt) {
  std::vector<LabeledTrack> labeled;
  run_stage("labels", [&] {
    for (const auto& t : tracks) labeled.push_back(pseudo_label_track(t, cfg.pdr));
  });
  TrainedModels m;
  if (preloaded) {
    m.pdr = *preloaded;
  } else {
    run_stage("train-pdr", [&] {
      std::vector<PseudoLabeledSample> pooled;
      for (const auto& l : labeled) pooled.insert(pooled.end(), l.samples.begin(), l.samples.end());
      auto [train, val] = split_samples(std::move(pooled), cfg.validation_fraction, cfg.seed);
      auto result = train_pdr(build_model(cfg.pdr), train, val);
      if (result.history.diverged)
        fail(Errc::divergence, result.history.diagnostics.empty() ? "training diverged" : result.history.diagnostics);
      m.pdr = std::move(result.model);
      m.history = std::move(result.history);
    });
  }
  std::vector<Landmark> landmarks;
  for (const auto& t : tracks) landmarks.insert(landmarks.end(), t.log.landmarks.begin(), t.log.landmarks.end());
  if (cfg.use_wifi || cfg.use_projection) {
    run_stage("radiomap", [&] {
      std::vector<TrackScans> scans;
      for (std::size_t i = 0; i < tracks.size(); ++i)
        scans.push_back({tracks[i].log.scans, labeled[i].trajectory ? trajectory_positioner(*labeled[i].trajectory) : Positioner{}});
      m.radiomap = build_radiomap(scans);
    });
  }
  if (cfg.use_wifi && cfg.wifi_method == WifiMethod::VAE) run_stage("train-wifi", [&] { m.vae = train_vae(m.radiomap, cfg.vae); });
  if (cfg.use_projection)
    run_stage("projection", [&] { m.projection = projection_index_from(landmarks, &m.radiomap, cfg.n_r, cfg.snap); });
  return m;
}

struct TrackEstimate {
  std::vector<DisplacementPrediction> pdr;
  std::vector<WifiFix> fixes;
  std::vector<FloorEvent> floor_events;
  FusedTrack fused;      // Kalman means
  FusedTrack projected;  // after projection, equal to `fused` when disabled
};

inline std::vector<WifiFix> wifi_fixes(const TrainedModels& m, const std::vector<WifiScan>& scans, const PipelineConfig& cfg) {
  std::vector<WifiFix> out;
  for (const auto& s : scans)
    out.push_back(m.vae ? vae_predict(*m.vae, s, m.radiomap.ap_dictionary) : knn_predict(m.radiomap, s, cfg.knn_k));
  return out;
}

/// Fusion over the track's stream span. Without WiFi the filter starts at
/// the track's first landmark.
inline FusedTrack fuse_estimate(const TrackInput& t, const TrackEstimate& e, bool use_wifi, FusionConfig fc) {
  fc.t_begin = fc.t_begin.value_or(t.stream.t0());
  fc.t_end = fc.t_end.value_or(t.stream.time(t.stream.length() - 1));
  if (!use_wifi) {
    if (t.log.landmarks.empty()) fail(Errc::cannot_initialize, "no WiFi and no start landmark in '" + t.name + "'");
    const Landmark& l = t.log.landmarks.front();
    fc.start = FloorPoint{{l.x, l.y}, l.floor};
    fc.start_time = l.timestamp;
  }
  return fuse_track(e.pdr, use_wifi ? e.fixes : std::vector<WifiFix>{}, e.floor_events, fc);
}

inline TrackEstimate estimate_track(const TrackInput& t, const TrainedModels& m, const PipelineConfig& cfg) {
  TrackEstimate e;
  run_stage("predict", [&] { e.pdr = predict_displacements(m.pdr, t.stream); });
  e.floor_events = floor_events_from(detect_floor_changes(t.stream));
  if (cfg.use_wifi) run_stage("wifi", [&] { e.fixes = wifi_fixes(m, t.log.scans, cfg); });
  run_stage("tracking", [&] { e.fused = fuse_estimate(t, e, cfg.use_wifi, cfg.fusion); });
  e.projected = cfg.use_projection ? run_stage("projection", [&] { return project_track(m.projection, e.fused); }) : e.fused;
  return e;
}

// ---------------------------------------------------------------------------
// File-driven run

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.train_logs = j.value("train_logs", c.train_logs);
    c.test_logs = j.value("test_logs", c.test_logs);
    c.test_truth = j.value("test_truth", c.test_truth);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.pdr_model = j.value("pdr_model", c.pdr_model);
    c.rate = j.value("rate", c.rate);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.seed = j.value("seed", c.seed);
    c.pdr.seed = c.seed;
    c.pdr = pdr_config_from_json(j, c.pdr);
    c.use_wifi = j.value("use_wifi", c.use_wifi);
    c.use_projection = j.value("use_projection", c.use_projection);
    if (j.contains("wifi_method")) {
      const auto w = j.at("wifi_method").get<std::string>();
      if (w != "knn" && w != "vae") fail(Errc::config, "wifi_method must be knn or vae");
      c.wifi_method = w == "knn" ? WifiMethod::KNN : WifiMethod::VAE;
    }
    c.knn_k = j.value("knn_k", c.knn_k);
    c.vae.seed = c.seed;
    c.vae.latent_dim = j.value("vae_latent_dim", c.vae.latent_dim);
    c.vae.epochs = j.value("vae_epochs", c.vae.epochs);
    c.vae.beta_recon = j.value("vae_beta_recon", c.vae.beta_recon);
    c.vae.beta_kl = j.value("vae_beta_kl", c.vae.beta_kl);
    c.vae.lr = j.value("vae_lr", c.vae.lr);
    c.fusion.sigma0 = j.value("sigma0", c.fusion.sigma0);
    c.fusion.sigma_pdr = j.value("sigma_pdr", c.fusion.sigma_pdr);
    c.fusion.adaptive_r = j.value("adaptive_r", c.fusion.adaptive_r);
    c.fusion.fixed_sigma = j.value("fixed_sigma", c.fusion.fixed_sigma);
    c.fusion.wifi_floor_votes = j.value("wifi_floor_votes", c.fusion.wifi_floor_votes);
    c.n_r = j.value("n_r", c.n_r);
    c.snap = j.value("snap", c.snap);
    c.floor_penalty = j.value("floor_penalty", c.floor_penalty);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, std::string("bad pipeline configuration: ") + e.what());
  }
  if (c.test_logs.empty()) fail(Errc::config, "pipeline needs at least one test log");
  if (c.train_logs.empty() && c.pdr_model.empty()) fail(Errc::config, "pipeline needs train_logs or a pdr_model");
  if (!c.test_truth.empty() && c.test_truth.size() != c.test_logs.size())
    fail(Errc::config, "test_truth must list one CSV per test log");
  return c;
}

struct PipelineReport {
  ErrorReport overall;
  std::vector<std::pair<std::string, ErrorReport>> per_track;
};

inline std::string track_stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

/// Runs every stage, writing intermediate CSVs and report.json to out_dir.
/// Files written before a failing stage are kept.
inline PipelineReport run_pipeline(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path out(cfg.out_dir);
  run_stage("setup", [&] {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) fail(Errc::io, "cannot create '" + cfg.out_dir + "': " + ec.message());
  });
  auto write = [&](const std::string& name, const std::string& content) { text::write_file((out / name).string(), content); };

  std::vector<TrackInput> train, test;
  run_stage("ingest", [&] {
    for (const auto& p : cfg.train_logs) train.push_back(load_track(track_stem(p), text::read_file(p), cfg.rate));
    for (const auto& p : cfg.test_logs) test.push_back(load_track(track_stem(p), text::read_file(p), cfg.rate));
  });
  std::optional<PdrModel> preloaded;
  if (!cfg.pdr_model.empty()) preloaded = run_stage("load-pdr", [&] { return load_pdr_model(cfg.pdr_model); });
  const TrainedModels models = train_models(train, cfg, preloaded);
  if (!preloaded) {
    save_pdr_model((out / "pdr_model.bin").string(), models.pdr);
    write("training_history.csv", history_to_csv(models.history));
  }
  if (cfg.use_wifi || cfg.use_projection) write("radiomap.csv", radiomap_to_csv(models.radiomap));

  PipelineReport report;
  std::vector<double> all_errors;
  std::size_t floor_errors = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const TrackInput& t = test[i];
    const TrackEstimate e = estimate_track(t, models, cfg);
    write(t.name + ".pdr.csv", predictions_to_csv(e.pdr));
    write(t.name + ".fused.csv", fused_track_to_csv(e.fused));
    write(t.name + ".track.csv", fused_track_to_csv(e.projected));
    const std::vector<Landmark> truth =
        cfg.test_truth.empty() ? t.log.landmarks : landmarks_from_csv(text::read_file(cfg.test_truth[i]));
    if (truth.empty()) continue;
    const ErrorReport r = run_stage("evaluate", [&] { return evaluate_track(e.projected, truth, cfg.floor_penalty); });
    all_errors.insert(all_errors.end(), r.errors.begin(), r.errors.end());
    floor_errors += r.floor_errors;
    report.per_track.emplace_back(t.name, r);
  }
  if (all_errors.empty()) fail(Errc::stage, "stage 'evaluate': no test track has truth points");
  report.overall = summarize_errors(all_errors, floor_errors);

  nlohmann::json j{{"overall", report_to_json(report.overall)}};
  for (const auto& [name, r] : report.per_track) j["tracks"][name] = report_to_json(r);
  write("report.json", j.dump(2));
  return report;
}

}  // namespace ipt::bench
