#include <gtest/gtest.h>

#include <algorithm>

#include "ipt/nn/gradcheck.hpp"
#include "ipt/wifi.hpp"

using namespace ipt;

namespace {

WifiScan scan(double t, std::map<std::string, double, std::less<>> r) { return WifiScan{t, std::move(r)}; }

Fingerprint labeled(std::vector<double> rss, double x, double y, int floor = 0) {
  return Fingerprint{0.0, std::move(rss), FloorPoint{{x, y}, floor}};
}

// Log-distance RSS on a 10x10 m square with four corner APs.
struct Site {
  std::vector<Vec2> aps{{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  std::vector<std::string> ids{"a", "b", "c", "d"};

  WifiScan at(Vec2 p, double t, nn::Rng* noise = nullptr) const {
    WifiScan s{t, {}};
    for (std::size_t i = 0; i < aps.size(); ++i) {
      const double d = std::max(1.0, std::sqrt((p - aps[i]).squared_norm()));
      s.readings[ids[i]] = -30.0 - 20.0 * std::log10(d) + (noise ? noise->normal(0.0, 2.0) : 0.0);
    }
    return s;
  }

  RadioMap grid(std::size_t n_side, double label_every = 1.0) const {
    RadioMap m{ids, {}};
    std::size_t i = 0;
    for (std::size_t a = 0; a < n_side; ++a)
      for (std::size_t b = 0; b < n_side; ++b, ++i) {
        const Vec2 p{10.0 * a / (n_side - 1), 10.0 * b / (n_side - 1)};
        Fingerprint f{static_cast<double>(i), dense_rss(at(p, 0.0), ids), std::nullopt};
        if (std::fmod(static_cast<double>(i), label_every) == 0.0) f.position = FloorPoint{p, 0};
        m.fingerprints.push_back(std::move(f));
      }
    return m;
  }
};

}  // namespace

TEST(RadioMap, DisjointScansUnionTheirAps) {
  const auto m = build_radiomap({{{scan(1, {{"x1", -50}, {"x2", -60}}), scan(5, {{"y1", -70}})}, nullptr}});
  EXPECT_EQ(m.ap_dictionary, (std::vector<std::string>{"x1", "x2", "y1"}));
  ASSERT_EQ(m.fingerprints.size(), 2u);
  EXPECT_EQ(m.fingerprints[1].rss, (std::vector<double>{kRssFloor, kRssFloor, -70}));
}

TEST(RadioMap, ScanLabeledByInterpolatedTrajectory) {
  std::vector<StepEvent> steps;
  for (int i = 0; i < 20; ++i) steps.push_back({0.25 + 0.5 * i, 1.0});
  const PseudoTrajectory traj({{0, 0, 0, 0}, {10, 10, 0, 0}}, steps, {});
  const auto m = build_radiomap({{{scan(5, {{"a", -50}})}, trajectory_positioner(traj)}});
  ASSERT_TRUE(m.fingerprints[0].position);
  EXPECT_NEAR(m.fingerprints[0].position->xy.x, 5.0, 1e-12);
  EXPECT_NEAR(m.fingerprints[0].position->xy.y, 0.0, 1e-12);
}

TEST(RadioMap, ScansOutsideSpanOrWithoutLandmarksStayUnlabeled) {
  const PseudoTrajectory traj({{0, 0, 0, 0}, {10, 10, 0, 0}}, {}, {});
  const auto m = build_radiomap({{{scan(12, {{"a", -50}})}, trajectory_positioner(traj)}, {{scan(3, {{"a", -40}})}, nullptr}});
  EXPECT_FALSE(m.fingerprints[0].position);
  EXPECT_FALSE(m.fingerprints[1].position);
  EXPECT_EQ(m.labeled_fraction(), 0.0);
}

TEST(RadioMap, ZeroScansIsEmptyMapError) {
  try {
    build_radiomap({{{}, nullptr}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_map);
  }
}

TEST(RadioMap, CsvRoundTrip) {
  RadioMap m{{"a", "b"}, {labeled({-50, -110}, 1.5, 2.25, 1), Fingerprint{7.0, {-60, -70}, std::nullopt}}};
  const std::string csv = radiomap_to_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x,y,floor,labeled,a,b");
  const auto back = radiomap_from_csv(csv);
  EXPECT_EQ(back.ap_dictionary, m.ap_dictionary);
  ASSERT_EQ(back.fingerprints.size(), 2u);
  EXPECT_EQ(back.fingerprints[0].position->xy, (Vec2{1.5, 2.25}));
  EXPECT_EQ(back.fingerprints[0].position->floor, 1);
  EXPECT_FALSE(back.fingerprints[1].position);
  EXPECT_EQ(back.fingerprints[1].rss, (std::vector<double>{-60, -70}));
}

TEST(Normalization, RoundTripWithinTolerance) {
  nn::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double rss = rng.uniform(-110.0, 0.0);
    EXPECT_NEAR(denormalize_rss(normalize_rss(rss)), rss, 1e-12);
  }
  EXPECT_EQ(normalize_rss(-110.0), 0.0);
  EXPECT_EQ(normalize_rss(0.0), 1.0);
}

TEST(Knn, SymmetricQueryLandsHalfway) {
  RadioMap m{{"a"}, {labeled({-50}, 0, 0), labeled({-70}, 10, 0)}};
  const auto fix = knn_predict(m, scan(0, {{"a", -60}}), 2);
  EXPECT_NEAR(fix.position.x, 5.0, 1e-12);
  EXPECT_NEAR(fix.position.y, 0.0, 1e-12);
}

TEST(Knn, ExactMatchDominates) {
  RadioMap m{{"a", "b"}, {labeled({-50, -60}, 3, 4), labeled({-90, -100}, 20, 0), labeled({-100, -40}, 0, 20)}};
  const auto fix = knn_predict(m, scan(0, {{"a", -50}, {"b", -60}}), 3);
  // w = 100 against w of about 1/45 and 1/54
  EXPECT_NEAR(fix.position.x, 3.0, 0.1);
  EXPECT_NEAR(fix.position.y, 4.0, 0.1);
}

TEST(Knn, InverseDistanceWeightsByHand) {
  RadioMap m{{"a"}, {labeled({-61}, 0, 0), labeled({-59}, 2, 0), labeled({-62}, 10, 0), labeled({-90}, 50, 50)}};
  const auto fix = knn_predict(m, scan(0, {{"a", -60}}), 3);
  EXPECT_NEAR(fix.position.x, 2.8, 1e-12);
  EXPECT_NEAR(fix.position.y, 0.0, 1e-12);
}

TEST(Knn, FloorByWeightedMajorityAndSigmaFloor) {
  RadioMap m{{"a"}, {labeled({-60}, 0, 0, 2), labeled({-60.5}, 0, 0, 2), labeled({-58}, 0, 0, 1)}};
  const auto fix = knn_predict(m, scan(0, {{"a", -60}}), 3);
  EXPECT_EQ(fix.floor, 2);
  EXPECT_EQ(fix.sigma, 1.0);
}

TEST(Knn, TooFewLabeledIsInsufficientData) {
  RadioMap m{{"a"}, {labeled({-60}, 0, 0), Fingerprint{0, {-50}, std::nullopt}}};
  try {
    knn_predict(m, scan(0, {{"a", -60}}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_data);
  }
}

TEST(Knn, InsideNeighbourBoxAndPermutationInvariant) {
  nn::Rng rng(11);
  RadioMap m{{"a", "b", "c"}, {}};
  for (int i = 0; i < 40; ++i)
    m.fingerprints.push_back(labeled({rng.uniform(-100, -40), rng.uniform(-100, -40), rng.uniform(-100, -40)},
                                     std::round(rng.uniform(0, 5)), std::round(rng.uniform(0, 5))));
  // Duplicate positions and distances exercise the tie-break.
  m.fingerprints.push_back(m.fingerprints[0]);
  RadioMap shuffled = m;
  for (int trial = 0; trial < 200; ++trial) {
    const WifiScan q = scan(0, {{"a", rng.uniform(-100, -40)}, {"b", rng.uniform(-100, -40)}, {"c", rng.uniform(-100, -40)}});
    for (std::size_t i = shuffled.fingerprints.size(); i > 1; --i)
      std::swap(shuffled.fingerprints[i - 1], shuffled.fingerprints[rng.index(i)]);
    const auto a = knn_predict(m, q), b = knn_predict(shuffled, q);
    EXPECT_NEAR(a.position.x, b.position.x, 1e-12);
    EXPECT_NEAR(a.position.y, b.position.y, 1e-12);
    EXPECT_EQ(a.floor, b.floor);

    const auto qv = dense_rss(q, m.ap_dictionary);
    std::vector<std::pair<double, Vec2>> d;
    for (const auto& f : m.fingerprints) d.emplace_back(rss_distance(qv, f.rss), f.position->xy);
    std::sort(d.begin(), d.end(), [](auto& x, auto& y) { return x.first < y.first; });
    double lo_x = 1e9, hi_x = -1e9, lo_y = 1e9, hi_y = -1e9;
    for (int i = 0; i < 5; ++i) {
      lo_x = std::min(lo_x, d[i].second.x), hi_x = std::max(hi_x, d[i].second.x);
      lo_y = std::min(lo_y, d[i].second.y), hi_y = std::max(hi_y, d[i].second.y);
    }
    EXPECT_GE(a.position.x, lo_x - 1e-12);
    EXPECT_LE(a.position.x, hi_x + 1e-12);
    EXPECT_GE(a.position.y, lo_y - 1e-12);
    EXPECT_LE(a.position.y, hi_y + 1e-12);
  }
}

TEST(Vae, KlVanishesAtThePrior) {
  VaeConfig cfg;
  cfg.beta_recon = 0.0;
  VaeModel m = make_vae(cfg, {"a", "b"});
  // Zero the encoder's last layer so mu = 0 and log var = 0.
  for (auto& p : m.encoder.layers.back().params) p.storage().assign(p.size(), 0.0);
  const VaeSample s{{0.3, 0.7}, std::nullopt};
  const std::vector<std::vector<double>> noise{std::vector<double>(cfg.latent_dim, 0.5)};
  const auto loss = vae_objective(m, std::span(&s, 1), noise, nullptr);
  EXPECT_EQ(loss.kl, 0.0);
  EXPECT_EQ(loss.reg, 0.0);
}

TEST(Vae, ObjectiveGradientsMatchFiniteDifferences) {
  const Site site;
  VaeConfig cfg;
  cfg.latent_dim = 3;
  cfg.encoder = {5};
  cfg.decoder = {4};
  cfg.regressor = {4};
  cfg.beta_kl = 0.3;
  cfg.seed = 17;
  VaeModel m = make_vae(cfg, site.ids);
  nn::Rng rng(5);
  std::vector<VaeSample> batch;
  std::vector<std::vector<double>> noise;
  for (int i = 0; i < 4; ++i) {
    const Vec2 p{rng.uniform(0, 10), rng.uniform(0, 10)};
    VaeSample s{normalized(dense_rss(site.at(p, 0, &rng), site.ids)), std::nullopt};
    if (i % 2 == 0) s.target = Vec2{p.x / 5 - 1, p.y / 5 - 1};
    batch.push_back(s);
    noise.push_back({rng.normal(), rng.normal(), rng.normal()});
  }
  auto grads = m.zero_gradients();
  vae_objective(m, batch, noise, &grads);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < grads.size(); ++i) names.push_back("p" + std::to_string(i));
  nn::GradCheckOptions opts;
  opts.samples_per_tensor = 0;
  const auto report = nn::check_gradients(m.parameters(), names, grads,
                                          [&] { return vae_objective(m, batch, noise, nullptr).total; }, opts);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(Vae, SupervisedOnlyLossDecreasesMonotonically) {
  const Site site;
  VaeConfig cfg;
  cfg.beta_recon = 0.0;
  cfg.beta_kl = 0.0;
  cfg.epochs = 10;
  cfg.batch_size = 1000;  // full batch
  cfg.validation_fraction = 0.0;
  cfg.lr = 1e-3;
  const auto model = train_vae(site.grid(10), cfg);
  ASSERT_EQ(model.history.size(), 10u);
  for (std::size_t i = 1; i < model.history.size(); ++i) EXPECT_LT(model.history[i], model.history[i - 1]) << i;
}

TEST(Vae, NoLabelsCannotTrain) {
  const Site site;
  RadioMap map = site.grid(4);
  for (auto& f : map.fingerprints) f.position.reset();
  try {
    train_vae(map, VaeConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::cannot_train);
  }
}

class TrainedVae : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    VaeConfig cfg;
    cfg.epochs = 150;
    cfg.seed = 2;
    model_ = new VaeModel(train_vae(Site{}.grid(15, 3.0), cfg));
  }
  static void TearDownTestSuite() { delete model_; }
  static VaeModel* model_;
};
VaeModel* TrainedVae::model_ = nullptr;

TEST_F(TrainedVae, DeterministicPrediction) {
  const Site site;
  const WifiScan q = site.at({3, 7}, 1.0);
  const auto a = vae_predict(*model_, q, site.ids), b = vae_predict(*model_, q, site.ids);
  EXPECT_EQ(a.position, b.position);
  EXPECT_EQ(a.sigma, b.sigma);
}

TEST_F(TrainedVae, AllSentinelScanIsLowConfidence) {
  const Site site;
  const auto normal = vae_predict(*model_, site.at({5, 5}, 0), site.ids);
  const auto blind = vae_predict(*model_, scan(0, {}), site.ids);
  EXPECT_FALSE(normal.low_confidence);
  EXPECT_TRUE(blind.low_confidence);
  EXPECT_DOUBLE_EQ(blind.sigma, 3.0 * normal.sigma);
}

TEST_F(TrainedVae, DictionaryMismatchIsError) {
  try {
    vae_predict(*model_, scan(0, {{"a", -50}}), {"a", "b"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dictionary);
  }
}

TEST_F(TrainedVae, LearnsTheSiteWithinCalibratedSigma) {
  const Site site;
  nn::Rng rng(9);
  int inside = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const Vec2 p{rng.uniform(0, 10), rng.uniform(0, 10)};
    const auto fix = vae_predict(*model_, site.at(p, 0), site.ids);
    if (std::sqrt((fix.position - p).squared_norm()) <= 2.0 * fix.sigma) ++inside;
  }
  EXPECT_GE(inside, 0.9 * n);
  EXPECT_LT(model_->sigma, 2.5);
}

TEST_F(TrainedVae, SerializationRoundTrip) {
  const Site site;
  const VaeModel back = deserialize_vae(serialize_vae(*model_));
  const WifiScan q = site.at({2, 8}, 0);
  EXPECT_EQ(vae_predict(back, q, site.ids).position, vae_predict(*model_, q, site.ids).position);
  EXPECT_EQ(back.sigma, model_->sigma);
}
