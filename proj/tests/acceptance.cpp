// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected gating criterion fails.
//
//   acceptance                 all criteria
//   acceptance --only 3        a single criterion (7 and 8 share one run)
//   acceptance --dataset DIR   also run the optional dataset check (10)

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "ipt/ipt.hpp"

using namespace ipt;
using namespace ipt::bench;
using namespace ipt::nn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity

double layer_gradient_error(const LayerSpec& spec, const Shape& in, std::uint64_t seed) {
  Rng rng(seed);
  Layer layer = make_layer(spec, in, rng);
  Tensor x = random_tensor(in, rng);
  Tensor w = random_tensor(layer.output_shape, rng);
  const ForwardContext ctx{true, seed * 7919 + 1};  // frozen dropout mask
  auto loss = [&] {
    LayerCache c;
    Tensor y = layer_forward(layer, x, c, ctx);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * w[i];
    return acc;
  };
  LayerCache cache;
  layer_forward(layer, x, cache, ctx);
  std::vector<Tensor> grads;
  for (const auto& p : layer.params) grads.push_back(zeros_like(p));
  Tensor dx = layer_backward(layer, w, cache, grads);
  std::vector<Tensor*> params;
  for (auto& p : layer.params) params.push_back(&p);
  params.push_back(&x);
  grads.push_back(dx);
  GradCheckOptions opts;
  opts.samples_per_tensor = 0;
  opts.seed = seed;
  return check_gradients(params, {}, grads, loss, opts).max_relative_error;
}

double loss_gradient_error(bool cross_entropy, std::uint64_t seed) {
  Rng rng(seed);
  Tensor pred = random_tensor({4, 2}, rng, -3, 3);
  Tensor target = random_tensor({4, 2}, rng, -3, 3);
  std::vector<int> labels{0, 1, 1, 0};
  auto loss = [&] {
    return cross_entropy ? cross_entropy_loss(pred, labels) : l2_displacement_loss(pred, target);
  };
  Tensor g;
  if (cross_entropy)
    cross_entropy_loss(pred, labels, &g);
  else
    l2_displacement_loss(pred, target, &g);
  GradCheckOptions opts;
  opts.samples_per_tensor = 0;
  return check_gradients({&pred}, {"pred"}, {g}, loss, opts).max_relative_error;
}

Outcome criterion_gradients() {
  struct Case {
    std::string name;
    LayerSpec spec;
    Shape in;
  };
  const std::vector<Case> cases{
      {"CONV2D", LayerSpec::conv2d(3, 3, 5), {2, 6, 7}},
      {"DENSE", LayerSpec::dense(5), {7}},
      {"MAXPOOL2X2", LayerSpec::maxpool2x2(), {2, 6, 6}},
      {"DROPOUT", LayerSpec::dropout(0.25), {12}},
      {"BILSTM", LayerSpec::bilstm(4, 0.0), {1, 3, 6}},
      {"SOFTMAX", LayerSpec::softmax(), {5}},
  };
  double worst = 0.0;
  std::string worst_name;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& c : cases) {
      const double e = layer_gradient_error(c.spec, c.in, 1000 + seed);
      if (e > worst) worst = e, worst_name = c.name;
    }
    for (bool ce : {false, true}) {
      const double e = loss_gradient_error(ce, 2000 + seed);
      if (e > worst) worst = e, worst_name = ce ? "CE" : "L2";
    }
  }
  return {worst < 1e-4, "max relative error " + fmt(worst) + " (" + worst_name + ") over 10 seeds"};
}

// ---------------------------------------------------------------------------
// 2. Loss arithmetic

Outcome criterion_losses() {
  const double l2 = l2_displacement_loss(Tensor({1, 2}, {1, 1}), Tensor({1, 2}, {0, 0}));
  const double ce = cross_entropy_loss(Tensor({1, 2}, {0, 0}), std::vector<int>{0});
  const double total = total_loss(l2, ce, 1.0);
  const double e = std::max({std::abs(l2 - std::sqrt(2.0)), std::abs(ce - std::log(2.0)),
                             std::abs(total - (std::sqrt(2.0) + std::log(2.0)))});
  return {e <= 1e-9, "L2 " + fmt(l2, 12) + ", CE " + fmt(ce, 12) + ", total " + fmt(total, 12) + ", max error " + fmt(e)};
}

// ---------------------------------------------------------------------------
// 3. Kalman

Outcome criterion_kalman() {
  KalmanState s;
  s.cov = Mat2::identity(1.0);
  s = kf_predict(s, {1, 0}, Mat2::identity(0.01));
  const bool step1 = std::abs(s.mean.x - 1) <= 1e-9 && std::abs(s.mean.y) <= 1e-9 && std::abs(s.cov.a - 1.01) <= 1e-9 &&
                     std::abs(s.cov.d - 1.01) <= 1e-9 && std::abs(s.cov.b) <= 1e-9 && std::abs(s.cov.c) <= 1e-9;
  s = kf_update(s, {2, 0}, Mat2::identity(1.01));
  const bool step2 = std::abs(s.mean.x - 1.5) <= 1e-9 && std::abs(s.mean.y) <= 1e-9 && std::abs(s.cov.a - 0.505) <= 1e-9 &&
                     std::abs(s.cov.d - 0.505) <= 1e-9 && std::abs(s.cov.b) <= 1e-9 && std::abs(s.cov.c) <= 1e-9;

  Rng rng(3);
  KalmanState r;
  r.cov = Mat2::identity(25.0);
  std::size_t bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const double q = rng.uniform(0.0, 0.5), a = rng.uniform(0.1, 20.0), b = rng.uniform(0.1, 20.0);
    const double rho = rng.uniform(-0.9, 0.9) * std::sqrt(a * b);
    if (rng.uniform() < 0.5)
      r = kf_predict(r, {rng.normal(0, 1), rng.normal(0, 1)}, Mat2{q, 0, 0, q});
    else
      r = kf_update(r, {rng.normal(0, 10), rng.normal(0, 10)}, Mat2{a, rho, rho, b});
    const bool pd = r.cov.b == r.cov.c && r.cov.a > 0 && r.cov.a * r.cov.d - r.cov.b * r.cov.c > 0;
    if (!pd) ++bad;
  }
  return {step1 && step2 && bad == 0, std::string("predict ") + (step1 ? "ok" : "wrong") + ", update " + (step2 ? "ok" : "wrong") +
                                          ", " + std::to_string(bad) + " of 10000 random steps not symmetric PD"};
}

// ---------------------------------------------------------------------------
// 4. Recurrence plots

Outcome criterion_recurrence() {
  Rng rng(4);
  std::size_t violations = 0;
  for (int n = 0; n < 1000; ++n) {
    SensorWindow w;
    w.rows = 12;
    w.cols = 50;
    w.data.resize(600);
    const double scale = rng.uniform(0.1, 10.0);
    for (double& v : w.data) v = rng.normal(0, scale);
    RecurrenceConfig cfg;
    cfg.norm = n % 2 ? RecurrenceNorm::MAX : RecurrenceNorm::EUCLIDEAN;
    const SensorWindow rp = recurrence_matrix(w, cfg);
    RecurrenceConfig wider = cfg;
    wider.epsilon = 2.0 * rng.uniform(0.5, 3.0) * scale;
    RecurrenceConfig narrower = cfg;
    narrower.epsilon = 0.5 * *wider.epsilon;
    const SensorWindow lo = recurrence_matrix(w, narrower), hi = recurrence_matrix(w, wider);
    for (std::size_t i = 0; i < 50; ++i) {
      if (rp.at(i, i) != 1.0) ++violations;
      for (std::size_t j = 0; j < 50; ++j) {
        const double v = rp.at(i, j);
        if (v != rp.at(j, i) || !(v >= 0.0 && v <= 1.0)) ++violations;
        if (hi.at(i, j) < lo.at(i, j)) ++violations;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over 1000 windows"};
}

// ---------------------------------------------------------------------------
// 5. Pseudo labels

Outcome criterion_pseudo_labels() {
  std::size_t misses = 0;
  double worst_telescope = 0.0;
  for (std::uint64_t track = 0; track < 3; ++track) {
    const SimTrack sim = simulate_track(s1_scenario(0, track));
    const TrackInput t = load_track("s1", sim.logfile);
    const auto steps = detect_steps(t.stream);
    const auto act = detect_activity(t.stream);
    const PseudoTrajectory traj(t.log.landmarks, steps, act);
    for (const auto& l : t.log.landmarks)
      if (traj.position(l.timestamp).xy != Vec2{l.x, l.y}) ++misses;
    const auto windows = make_windows(t.stream, 50, 50, "s1").windows;
    const auto samples = generate_pseudo_labels(t.stream, t.log.landmarks, steps, act, windows);
    // Contiguous windows: their deltas sum to the displacement between the
    // first window's start and the last window's end.
    Vec2 sum{};
    for (const auto& s : samples) sum += s.delta;
    const double span = 50.0 / t.stream.rate();
    const double t_first = samples.front().window.t_center - span / 2, t_last = samples.back().window.t_center + span / 2;
    const Vec2 expect = traj.position(std::min(t_last, traj.t_end())).xy - traj.position(std::max(t_first, traj.t_begin())).xy;
    worst_telescope = std::max(worst_telescope, std::sqrt((sum - expect).squared_norm()));
  }

  std::vector<StepEvent> steps;
  for (int i = 0; i < 20; ++i) steps.push_back({0.1 + 0.24 * i, 1.0});
  for (int i = 0; i < 10; ++i) steps.push_back({5.2 + 0.45 * i, 1.0});
  const PseudoTrajectory cadence({{0, 0, 0, 0}, {10, 10, 0, 0}}, steps, {}, 0.0);
  const Vec2 mid = cadence.position(5.0).xy;
  const bool cadence_ok = std::abs(mid.x - 20.0 / 3.0) <= 1e-3 && std::abs(mid.y) <= 1e-3;
  return {misses == 0 && worst_telescope <= 1e-9 && cadence_ok,
          std::to_string(misses) + " landmark misses on 3 simulated tracks, telescoping error " + fmt(worst_telescope) +
              " m, 2:1 cadence midpoint (" + fmt(mid.x) + ", " + fmt(mid.y) + ")"};
}

// ---------------------------------------------------------------------------
// 6. Projection

Outcome criterion_projection() {
  Rng rng(6);
  std::size_t outside = 0, not_idempotent = 0;
  double worst_shift = 0.0;
  for (int q = 0; q < 10000; ++q) {
    std::vector<FloorPoint> refs(5 + rng.index(40));
    for (auto& r : refs) r = {{rng.uniform(0, 50), rng.uniform(0, 30)}, static_cast<int>(rng.index(2))};
    const ProjectionIndex index(refs, 1 + rng.index(6), 0.01);
    const FloorPoint p{{rng.uniform(-10, 60), rng.uniform(-10, 40)}, static_cast<int>(rng.index(2))};
    const auto nb = projection_neighbours(index, p);
    const FloorPoint out = project_prediction(index, p);
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& n : nb) x0 = std::min(x0, n.xy.x), x1 = std::max(x1, n.xy.x), y0 = std::min(y0, n.xy.y), y1 = std::max(y1, n.xy.y);
    if (out.xy.x < x0 - 1e-9 || out.xy.x > x1 + 1e-9 || out.xy.y < y0 - 1e-9 || out.xy.y > y1 + 1e-9) ++outside;
    const FloorPoint twice = project_prediction(index, out);
    const double shift = std::sqrt((twice.xy - out.xy).squared_norm());
    worst_shift = std::max(worst_shift, shift);
    if (shift > index.snap) ++not_idempotent;
  }
  return {outside == 0 && not_idempotent == 0, std::to_string(outside) + " outputs outside the neighbour box, " +
                                                    std::to_string(not_idempotent) +
                                                    " of 10000 not idempotent within delta (largest second-pass shift " +
                                                    fmt(worst_shift) + " m)"};
}

// ---------------------------------------------------------------------------
// 7 and 8. Simulated S1 benchmark

struct SeedResult {
  ErrorReport full, no_wifi, no_projection;
  double seconds = 0.0;
};

/// Configuration for the S1 runs: the library defaults except a shorter
/// training schedule and dropout 0.1 (see README, "S1 benchmark").
PipelineConfig s1_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.seed = seed;
  cfg.pdr.seed = seed;
  cfg.pdr.max_epochs = 15;
  cfg.pdr.patience = 5;
  cfg.pdr.dropout = 0.1;
  return cfg;
}

SeedResult run_s1(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<TrackInput> train, test;
  std::vector<std::vector<Landmark>> truth;
  for (std::uint64_t k = 0; k < 13; ++k) {
    const SimTrack sim = simulate_track(s1_scenario(seed, k));
    TrackInput t = load_track("s1_" + std::to_string(k), sim.logfile);
    if (k < 10) {
      train.push_back(std::move(t));
    } else {
      truth.push_back(sim.truth.sampled(1.0));
      test.push_back(std::move(t));
    }
  }
  const PipelineConfig cfg = s1_config(seed);
  const TrainedModels models = train_models(train, cfg);
  PipelineConfig no_wifi = cfg;
  no_wifi.use_wifi = false;
  std::vector<double> full, nw, np;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const TrackEstimate e = estimate_track(test[i], models, cfg);
    const auto a = evaluate_track(e.projected, truth[i]).errors;
    const auto c = evaluate_track(e.fused, truth[i]).errors;
    const auto b = evaluate_track(estimate_track(test[i], models, no_wifi).projected, truth[i]).errors;
    full.insert(full.end(), a.begin(), a.end());
    np.insert(np.end(), c.begin(), c.end());
    nw.insert(nw.end(), b.begin(), b.end());
  }
  SeedResult r{summarize_errors(full), summarize_errors(nw), summarize_errors(np), 0.0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::pair<Outcome, Outcome> criteria_s1() {
  int accurate = 0, ordered = 0;
  double seconds = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SeedResult r = run_s1(seed);
    seconds += r.seconds;
    const bool acc = r.full.q75 <= 2.5 && r.full.mae <= 2.0;
    const bool ord = r.full.q75 <= r.no_wifi.q75 && r.full.q75 <= r.no_projection.q75;
    accurate += acc;
    ordered += ord;
    std::cout << "  seed " << seed << ": full MAE " << fmt(r.full.mae, 3) << " q75 " << fmt(r.full.q75, 3)
              << " | no-WiFi q75 " << fmt(r.no_wifi.q75, 3) << " | no-projection q75 " << fmt(r.no_projection.q75, 3)
              << " | " << fmt(r.seconds, 3) << " s\n";
  }
  Outcome c7{accurate >= 4 && seconds <= 900.0,
             std::to_string(accurate) + "/5 seeds with q75 <= 2.5 m and MAE <= 2.0 m, " + fmt(seconds, 3) + " s total"};
  Outcome c8{ordered >= 4, std::to_string(ordered) + "/5 seeds with full q75 <= no-WiFi and <= no-projection"};
  return {c7, c8};
}

// ---------------------------------------------------------------------------
// 9. Stationary fusion

Outcome criterion_stationary_fusion() {
  Rng rng(9);
  int close = 0;
  double sum_err = 0.0;
  const Vec2 truth{10, 10};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<DisplacementPrediction> pdr;
    for (double t = 0.5; t <= 20.0 + 1e-9; t += 0.5) pdr.push_back({t, {0, 0}, 0.0});
    std::vector<WifiFix> fixes;
    for (int i = 0; i < 10; ++i)
      fixes.push_back({2.0 * i, {truth.x + rng.normal(0, 3), truth.y + rng.normal(0, 3)}, 0, 3.0, false});
    FusionConfig cfg;
    cfg.t_begin = 0.0;
    cfg.t_end = fixes.back().timestamp;
    const FusedTrack track = fuse_track(pdr, fixes, {}, cfg);
    const double e = std::sqrt((track.points.back().xy - truth).squared_norm());
    sum_err += e;
    if (e <= 1.0) ++close;
  }
  return {close >= 95, std::to_string(close) + "/100 trials within 1 m after 10 fixes (mean error " + fmt(sum_err / 100, 3) + " m)"};
}

// ---------------------------------------------------------------------------
// 10. Optional dataset run

Outcome criterion_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  auto list = [&](const std::string& sub) {
    std::vector<std::string> out;
    if (fs::is_directory(fs::path(dir) / sub))
      for (const auto& e : fs::directory_iterator(fs::path(dir) / sub))
        if (e.is_regular_file()) out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    return out;
  };
  PipelineConfig cfg;
  cfg.train_logs = list("train");
  cfg.test_logs = list("test");
  cfg.out_dir = (fs::temp_directory_path() / "ipt_dataset_run").string();
  if (cfg.train_logs.empty() || cfg.test_logs.empty()) return {false, "expected train/ and test/ log folders under " + dir};
  const PipelineReport r = run_pipeline(cfg);
  return {true, "q75 " + fmt(r.overall.q75, 3) + " m, MAE " + fmt(r.overall.mae, 3) + " m (recorded, not asserted)"};
}

void report(int n, const std::string& name, const Outcome& o, bool& all_ok) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << n << " (" << name << "): " << o.detail << std::endl;
  all_ok = all_ok && o.pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string dataset;
  app.add_option("--only", only, "Run only these criteria (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--dataset", dataset, "Folder with train/ and test/ logfiles for criterion 10")->check(CLI::ExistingDirectory);
  CLI11_PARSE(app, argc, argv);
  const std::set<int> sel(only.begin(), only.end());
  auto want = [&](int n) { return sel.empty() ? n <= 9 || !dataset.empty() : sel.count(n) > 0; };

  bool ok = true;
  try {
    if (want(1)) report(1, "gradient fidelity", criterion_gradients(), ok);
    if (want(2)) report(2, "loss arithmetic", criterion_losses(), ok);
    if (want(3)) report(3, "Kalman", criterion_kalman(), ok);
    if (want(4)) report(4, "recurrence plots", criterion_recurrence(), ok);
    if (want(5)) report(5, "pseudo labels", criterion_pseudo_labels(), ok);
    if (want(6)) report(6, "projection", criterion_projection(), ok);
    if (want(7) || want(8)) {
      const auto [c7, c8] = criteria_s1();
      if (want(7)) report(7, "S1 end-to-end", c7, ok);
      if (want(8)) report(8, "S1 ablation ordering", c8, ok);
    }
    if (want(9)) report(9, "stationary fusion", criterion_stationary_fusion(), ok);
    if (want(10)) {
      if (dataset.empty()) {
        std::cout << "SKIP  criterion 10 (dataset run): no --dataset folder given" << std::endl;
      } else {
        bool ignored = true;
        report(10, "dataset run", criterion_dataset(dataset), ignored);
      }
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL  " << e.what() << std::endl;
    return 1;
  }
  return ok ? 0 : 1;
}
