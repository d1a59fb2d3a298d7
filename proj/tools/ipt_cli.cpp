// ipt_cli: command-line front end for the positioning and tracking library.
//
// Exit status: 0 on success, 2 on invalid input or configuration, 1 on
// internal failures (I/O, numerical problems, divergence).

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "ipt/ipt.hpp"

namespace fs = std::filesystem;
using namespace ipt;
using namespace ipt::bench;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(Errc::io, "cannot create '" + dir + "': " + ec.message());
}

void ensure_parent(const std::string& file) {
  const auto parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

nlohmann::json read_json(const std::string& path) {
  const std::string content = text::read_file(path);
  try {
    return nlohmann::json::parse(content);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::config, "'" + path + "' is not valid JSON: " + e.what());
  }
}

WindowMode parse_mode(const std::string& s) { return s == "rp" ? WindowMode::RP : WindowMode::RAW; }
PdrArch parse_arch(const std::string& s) { return s == "bilstm" ? PdrArch::BILSTM : PdrArch::CNN; }

std::string activity_csv(const std::vector<ActivitySegment>& segs) {
  std::string out = "t_start,t_end,activity\n";
  for (const auto& s : segs)
    out += text::format_double(s.t_start) + ',' + text::format_double(s.t_end) + ',' + std::string(activity_name(s.activity)) + '\n';
  return out;
}

std::string fixes_csv(const std::vector<WifiFix>& fixes) {
  std::string out = "t,x,y,floor,sigma\n";
  for (const auto& f : fixes)
    out += text::format_double(f.timestamp) + ',' + text::format_double(f.position.x) + ',' +
           text::format_double(f.position.y) + ',' + std::to_string(f.floor) + ',' + text::format_double(f.sigma) + '\n';
  return out;
}

struct Options {
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double rate = 50.0;

  // simulate
  std::string scenario;
  std::string truth_out;
  double truth_step = 1.0;

  // shared inputs
  std::vector<std::string> logs;
  std::string log;
  std::string config;

  // train-pdr
  std::string mode = "raw";
  std::string arch = "cnn";
  std::size_t epochs = 0;
  double validation_fraction = 0.2;

  // train-wifi
  std::string radiomap;
  double labeled_fraction = 1.0;

  // predict
  std::string model;
  std::string vae;
  bool no_wifi = false;
  bool no_projection = false;
  std::size_t knn_k = 5;

  // evaluate
  std::string track;
  std::string truth;
  double floor_penalty = 15.0;
};

int cmd_simulate(const Options& o) {
  SimScenario sc = scenario_from_json(read_json(o.scenario));
  if (o.seed_given) sc.seed = o.seed;
  const SimTrack sim = simulate_track(sc);
  ensure_parent(o.out);
  text::write_file(o.out, sim.logfile);
  if (!o.truth_out.empty()) {
    ensure_parent(o.truth_out);
    text::write_file(o.truth_out, landmarks_to_csv(sim.truth.sampled(o.truth_step)));
  }
  return 0;
}

int cmd_parse(const Options& o) {
  const TrackInput t = load_track(fs::path(o.log).stem().string(), text::read_file(o.log), o.rate);
  ensure_dir(o.out);
  text::write_file(in_dir(o.out, "stream.csv"), stream_to_csv(t.stream));
  text::write_file(in_dir(o.out, "landmarks.csv"), landmarks_to_csv(t.log.landmarks));
  const nlohmann::json summary{{"records", t.log.records.size()},
                               {"scans", t.log.scans.size()},
                               {"landmarks", t.log.landmarks.size()},
                               {"skipped_unknown", t.log.skipped_unknown},
                               {"samples", t.stream.length()},
                               {"rate", o.rate}};
  text::write_file(in_dir(o.out, "summary.json"), summary.dump(2));
  return 0;
}

int cmd_pseudolabel(const Options& o) {
  PdrModelConfig cfg;
  cfg.input_mode = parse_mode(o.mode);
  const TrackInput t = load_track(fs::path(o.log).stem().string(), text::read_file(o.log), o.rate);
  const LabeledTrack l = pseudo_label_track(t, cfg);
  ensure_dir(o.out);
  text::write_file(in_dir(o.out, "labels.csv"), pseudo_label_index_csv(l.samples));
  text::write_file(in_dir(o.out, "activity.csv"), activity_csv(l.activity));
  std::string steps = "t,strength\n";
  for (const auto& s : l.steps) steps += text::format_double(s.timestamp) + ',' + text::format_double(s.strength) + '\n';
  text::write_file(in_dir(o.out, "steps.csv"), steps);
  return 0;
}

int cmd_train_pdr(const Options& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) cfg.pdr = pdr_config_from_json(read_json(o.config), cfg.pdr);
  cfg.pdr.input_mode = parse_mode(o.mode);
  cfg.pdr.arch = parse_arch(o.arch);
  cfg.pdr.seed = cfg.seed = o.seed;
  if (o.epochs) cfg.pdr.max_epochs = o.epochs;
  cfg.validation_fraction = o.validation_fraction;
  cfg.use_wifi = cfg.use_projection = false;
  std::vector<TrackInput> tracks;
  for (const auto& p : o.logs) tracks.push_back(load_track(fs::path(p).stem().string(), text::read_file(p), o.rate));
  const TrainedModels m = train_models(tracks, cfg);
  ensure_dir(o.out);
  save_pdr_model(in_dir(o.out, "pdr_model.bin"), m.pdr);
  text::write_file(in_dir(o.out, "training_history.csv"), history_to_csv(m.history));
  return 0;
}

int cmd_build_radiomap(const Options& o) {
  PdrModelConfig cfg;
  std::vector<TrackScans> scans;
  for (const auto& p : o.logs) {
    const TrackInput t = load_track(fs::path(p).stem().string(), text::read_file(p), o.rate);
    const LabeledTrack l = pseudo_label_track(t, cfg);
    scans.push_back({t.log.scans, l.trajectory ? trajectory_positioner(*l.trajectory) : Positioner{}});
  }
  const RadioMap map = build_radiomap(scans);
  ensure_parent(o.out);
  text::write_file(o.out, radiomap_to_csv(map));
  return 0;
}

int cmd_train_wifi(const Options& o) {
  RadioMap map = radiomap_from_csv(text::read_file(o.radiomap));
  if (o.labeled_fraction < 1.0) {
    nn::Rng rng(nn::mix_keys(o.seed, 0x4c4142454cULL));
    for (auto& f : map.fingerprints)
      if (rng.uniform() >= o.labeled_fraction) f.position.reset();
  }
  VaeConfig cfg;
  if (!o.config.empty()) cfg = vae_config_from_json(read_json(o.config), cfg);
  cfg.seed = o.seed;
  if (o.epochs) cfg.epochs = o.epochs;
  const VaeModel m = train_vae(map, cfg);
  ensure_dir(o.out);
  text::write_file(in_dir(o.out, "vae.json"), serialize_vae(m));
  std::string hist = "epoch,loss\n";
  for (std::size_t i = 0; i < m.history.size(); ++i) hist += std::to_string(i + 1) + ',' + text::format_double(m.history[i]) + '\n';
  text::write_file(in_dir(o.out, "vae_history.csv"), hist);
  return 0;
}

int cmd_predict(const Options& o) {
  PipelineConfig cfg;
  cfg.use_wifi = !o.no_wifi && !o.radiomap.empty();
  cfg.use_projection = !o.no_projection && !o.radiomap.empty();
  cfg.knn_k = o.knn_k;
  TrainedModels m;
  m.pdr = load_pdr_model(o.model);
  const TrackInput t = load_track(fs::path(o.log).stem().string(), text::read_file(o.log), o.rate);
  if (!o.radiomap.empty()) {
    m.radiomap = radiomap_from_csv(text::read_file(o.radiomap));
    if (!o.vae.empty()) m.vae = deserialize_vae(text::read_file(o.vae));
    m.projection = projection_index_from({}, &m.radiomap, cfg.n_r, cfg.snap);
  }
  const TrackEstimate e = estimate_track(t, m, cfg);
  ensure_dir(o.out);
  text::write_file(in_dir(o.out, t.name + ".pdr.csv"), predictions_to_csv(e.pdr));
  if (cfg.use_wifi) text::write_file(in_dir(o.out, t.name + ".fixes.csv"), fixes_csv(e.fixes));
  text::write_file(in_dir(o.out, t.name + ".fused.csv"), fused_track_to_csv(e.fused));
  text::write_file(in_dir(o.out, t.name + ".track.csv"), fused_track_to_csv(e.projected));
  return 0;
}

int cmd_evaluate(const Options& o) {
  const FusedTrack track = fused_track_from_csv(text::read_file(o.track));
  const auto truth = landmarks_from_csv(text::read_file(o.truth));
  const ErrorReport r = evaluate_track(track, truth, o.floor_penalty);
  ensure_parent(o.out);
  text::write_file(o.out, report_to_json(r).dump(2));
  std::cout << "MAE " << text::format_double(r.mae) << "  q50 " << text::format_double(r.q50) << "  q75 "
            << text::format_double(r.q75) << "  q90 " << text::format_double(r.q90) << '\n';
  return 0;
}

int cmd_run(const Options& o) {
  nlohmann::json j = read_json(o.config);
  if (o.seed_given) j["seed"] = o.seed;
  if (!o.out.empty()) j["out_dir"] = o.out;
  const PipelineReport r = run_pipeline(pipeline_config_from_json(j));
  std::cout << "MAE " << text::format_double(r.overall.mae) << "  q50 " << text::format_double(r.overall.q50)
            << "  q75 " << text::format_double(r.overall.q75) << "  q90 " << text::format_double(r.overall.q90) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indoor positioning and tracking: PDR, WiFi fingerprinting, Kalman fusion"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed")->each([&](const std::string&) { o.seed_given = true; });
  };

  auto* sim = app.add_subcommand("simulate", "Simulate a sensor log from a scenario");
  sim->add_option("--scenario", o.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", o.out, "Output log file")->required();
  sim->add_option("--truth-out", o.truth_out, "Also write ground truth CSV (t,x,y,floor)");
  sim->add_option("--truth-step", o.truth_step, "Ground truth sampling period, s")->check(CLI::PositiveNumber);
  add_seed(sim);

  auto* parse = app.add_subcommand("parse", "Parse and resample a log");
  parse->add_option("--log", o.log, "Sensor log")->required()->check(CLI::ExistingFile);
  parse->add_option("--out", o.out, "Output directory")->required();
  parse->add_option("--rate", o.rate, "Resampling rate, Hz")->check(CLI::PositiveNumber);

  auto* pl = app.add_subcommand("pseudolabel", "Detect activity and steps and generate pseudo labels");
  pl->add_option("--log", o.log, "Sensor log with POSI landmarks")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", o.out, "Output directory")->required();
  pl->add_option("--mode", o.mode, "Window mode")->check(CLI::IsMember({"raw", "rp"}));
  pl->add_option("--rate", o.rate, "Resampling rate, Hz")->check(CLI::PositiveNumber);

  auto* tp = app.add_subcommand("train-pdr", "Train the deep PDR model on pseudo labels");
  tp->add_option("--log", o.logs, "Training logs")->required()->check(CLI::ExistingFile);
  tp->add_option("--out", o.out, "Output directory")->required();
  tp->add_option("--mode", o.mode, "Window mode")->check(CLI::IsMember({"raw", "rp"}));
  tp->add_option("--arch", o.arch, "Architecture")->check(CLI::IsMember({"cnn", "bilstm"}));
  tp->add_option("--config", o.config, "PDR configuration JSON")->check(CLI::ExistingFile);
  tp->add_option("--epochs", o.epochs, "Maximum epochs");
  tp->add_option("--validation-fraction", o.validation_fraction)->check(CLI::Range(0.0, 0.9));
  tp->add_option("--rate", o.rate, "Resampling rate, Hz")->check(CLI::PositiveNumber);
  add_seed(tp);

  auto* br = app.add_subcommand("build-radiomap", "Annotate WiFi scans with pseudo-trajectory positions");
  br->add_option("--log", o.logs, "Logs with WiFi scans")->required()->check(CLI::ExistingFile);
  br->add_option("--out", o.out, "Output radiomap CSV")->required();
  br->add_option("--rate", o.rate, "Resampling rate, Hz")->check(CLI::PositiveNumber);

  auto* tw = app.add_subcommand("train-wifi", "Train the semi-supervised VAE on a radiomap");
  tw->add_option("--radiomap", o.radiomap, "Radiomap CSV")->required()->check(CLI::ExistingFile);
  tw->add_option("--out", o.out, "Output directory")->required();
  tw->add_option("--config", o.config, "VAE configuration JSON")->check(CLI::ExistingFile);
  tw->add_option("--labeled-fraction", o.labeled_fraction, "Keep this share of labels")->check(CLI::Range(0.0, 1.0));
  tw->add_option("--epochs", o.epochs, "Training epochs");
  add_seed(tw);

  auto* pr = app.add_subcommand("predict", "Predict a trajectory for one log");
  pr->add_option("--model", o.model, "PDR model checkpoint")->required()->check(CLI::ExistingFile);
  pr->add_option("--log", o.log, "Sensor log")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", o.out, "Output directory")->required();
  pr->add_option("--radiomap", o.radiomap, "Radiomap CSV for WiFi fixes and projection")->check(CLI::ExistingFile);
  pr->add_option("--vae", o.vae, "VAE model instead of k-NN")->check(CLI::ExistingFile);
  pr->add_option("--knn-k", o.knn_k, "Neighbours for k-NN")->check(CLI::PositiveNumber);
  pr->add_flag("--no-wifi", o.no_wifi, "Ignore WiFi; start at the first landmark");
  pr->add_flag("--no-projection", o.no_projection, "Skip map projection");
  pr->add_option("--rate", o.rate, "Resampling rate, Hz")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("evaluate", "Score a predicted track against ground truth");
  ev->add_option("--track", o.track, "Track CSV (t,x,y,floor,ptrace)")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", o.truth, "Truth CSV (t,x,y,floor)")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", o.out, "Output report JSON")->required();
  ev->add_option("--floor-penalty", o.floor_penalty, "Metres per floor of mismatch")->check(CLI::NonNegativeNumber);

  auto* run = app.add_subcommand("run", "Run the whole pipeline from a configuration");
  run->add_option("--config", o.config, "Pipeline JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", o.out, "Output directory (overrides out_dir)");
  add_seed(run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*parse) return cmd_parse(o);
    if (*pl) return cmd_pseudolabel(o);
    if (*tp) return cmd_train_pdr(o);
    if (*br) return cmd_build_radiomap(o);
    if (*tw) return cmd_train_wifi(o);
    if (*pr) return cmd_predict(o);
    if (*ev) return cmd_evaluate(o);
    if (*run) return cmd_run(o);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
