#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ipt/nn/adam.hpp"
#include "ipt/nn/checkpoint.hpp"
#include "ipt/nn/gradcheck.hpp"
#include "ipt/nn/layers.hpp"
#include "ipt/nn/loss.hpp"
#include "ipt/nn/network.hpp"

using namespace ipt;
using namespace ipt::nn;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Scalar loss <w, layer(x)> so every output element receives a distinct gradient.
struct SingleLayerProbe {
  Layer layer;
  Tensor input;
  Tensor weights;

  double loss() const {
    LayerCache cache;
    Tensor y = layer_forward(layer, input, cache, {});
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * weights[i];
    return acc;
  }
};

GradCheckReport check_layer(const LayerSpec& spec, Shape in, std::uint64_t seed, bool include_input = true) {
  Rng rng(seed);
  SingleLayerProbe probe{make_layer(spec, in, rng), random_tensor(in, seed + 1), {}};
  probe.weights = random_tensor(probe.layer.output_shape, seed + 2);

  LayerCache cache;
  layer_forward(probe.layer, probe.input, cache, {});
  std::vector<Tensor> grads;
  for (const auto& p : probe.layer.params) grads.push_back(zeros_like(p));
  Tensor dx = layer_backward(probe.layer, probe.weights, cache, grads);

  std::vector<Tensor*> params;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < probe.layer.params.size(); ++i) {
    params.push_back(&probe.layer.params[i]);
    names.push_back("param" + std::to_string(i));
  }
  if (include_input) {
    params.push_back(&probe.input);
    names.push_back("input");
    grads.push_back(dx);
  }
  GradCheckOptions opts;
  opts.samples_per_tensor = 0;
  return check_gradients(params, names, grads, [&] { return probe.loss(); }, opts);
}

NetworkSpec small_cnn_spec() {
  NetworkSpec s;
  s.input_shape = {1, 6, 8};
  s.trunk = {LayerSpec::conv2d(3, 3, 5), LayerSpec::relu(), LayerSpec::maxpool2x2(), LayerSpec::conv2d(4, 3, 3),
             LayerSpec::relu(), LayerSpec::dropout(0.25), LayerSpec::flatten(), LayerSpec::dense(8), LayerSpec::relu()};
  s.regression_head = {LayerSpec::dense(2)};
  s.activity_head = {LayerSpec::dense(2)};
  return s;
}

}  // namespace

TEST(Layers, DenseIdentityMap) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::dense(2), {2}, rng);
  l.params[0] = Tensor({2, 2}, {1, 0, 0, 1});
  l.params[1].fill(0.0);
  LayerCache c;
  Tensor y = layer_forward(l, Tensor({2}, {1, 2}), c, {});
  EXPECT_EQ(y.storage(), (std::vector<double>{1, 2}));
}

TEST(Layers, MaxPoolTakesBlockMaximum) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::maxpool2x2(), {1, 2, 2}, rng);
  LayerCache c;
  Tensor y = layer_forward(l, Tensor({1, 2, 2}, {1, 2, 3, 4}), c, {});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(y[0], 4.0);
}

TEST(Layers, MaxPoolFloorsOddSizes) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::maxpool2x2(), {2, 5, 7}, rng);
  EXPECT_EQ(l.output_shape, (Shape{2, 2, 3}));
}

TEST(Layers, MaxPoolTiesRouteToFirstIndex) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::maxpool2x2(), {1, 2, 2}, rng);
  LayerCache c;
  layer_forward(l, Tensor({1, 2, 2}, {5, 5, 5, 5}), c, {});
  std::vector<Tensor> none;
  Tensor dx = layer_backward(l, Tensor({1, 1, 1}, {1.0}), c, none);
  EXPECT_EQ(dx.storage(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(Layers, ConvScalingKernel) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::conv2d(1, 1, 1), {1, 2, 2}, rng);
  l.params[0] = Tensor({1, 1, 1, 1}, {2.0});
  l.params[1].fill(0.0);
  LayerCache c;
  Tensor y = layer_forward(l, Tensor({1, 2, 2}, {1, 2, 3, 4}), c, {});
  EXPECT_EQ(y.storage(), (std::vector<double>{2, 4, 6, 8}));
}

TEST(Layers, ConvSamePaddingMatchesDirectSum) {
  Rng rng(3);
  Layer l = make_layer(LayerSpec::conv2d(2, 3, 5), {2, 4, 6}, rng);
  Tensor x = random_tensor({2, 4, 6}, 9);
  LayerCache c;
  Tensor y = layer_forward(l, x, c, {});
  ASSERT_EQ(y.shape(), (Shape{2, 4, 6}));
  for (std::size_t f = 0; f < 2; ++f)
    for (int oy = 0; oy < 4; ++oy)
      for (int ox = 0; ox < 6; ++ox) {
        double acc = l.params[1][f];
        for (std::size_t ch = 0; ch < 2; ++ch)
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j) {
              const int iy = oy + i - 1, ix = ox + j - 2;
              if (iy < 0 || iy >= 4 || ix < 0 || ix >= 6) continue;
              acc += l.params[0][((f * 2 + ch) * 3 + i) * 5 + j] * x[(ch * 4 + iy) * 6 + ix];
            }
        EXPECT_NEAR(y[(f * 4 + oy) * 6 + ox], acc, 1e-12);
      }
}

TEST(Layers, ValidPaddingShrinksOutput) {
  Rng rng(0);
  EXPECT_EQ(make_layer(LayerSpec::conv2d(4, 3, 5, Padding::VALID), {1, 12, 50}, rng).output_shape,
            (Shape{4, 10, 46}));
}

TEST(Layers, ShapeErrorNamesLayerIndex) {
  Rng rng(0);
  try {
    make_layer(LayerSpec::conv2d(1, 5, 5), {1, 3, 3}, rng, 7);
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape);
    EXPECT_NE(std::string(e.what()).find("layer 7"), std::string::npos);
  }
  EXPECT_THROW(make_layer(LayerSpec::dropout(1.0), {4}, rng), Error);
  Layer d = make_layer(LayerSpec::dense(3), {4}, rng);
  LayerCache c;
  EXPECT_THROW(layer_forward(d, Tensor({5}), c, {}), Error);
}

TEST(Layers, DenseGradientOfFirstOutput) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::dense(2), {2}, rng);
  LayerCache c;
  layer_forward(l, Tensor({2}, {1, 2}), c, {});
  std::vector<Tensor> g{zeros_like(l.params[0]), zeros_like(l.params[1])};
  layer_backward(l, Tensor({2}, {1, 0}), c, g);
  EXPECT_EQ(g[0][0], 1.0);
  EXPECT_EQ(g[0][1], 2.0);
  EXPECT_EQ(g[0][2], 0.0);
  EXPECT_EQ(g[0][3], 0.0);
}

TEST(Layers, ReluBlocksNegativeInput) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::relu(), {2}, rng);
  LayerCache c;
  layer_forward(l, Tensor({2}, {-1, 3}), c, {});
  std::vector<Tensor> none;
  Tensor dx = layer_backward(l, Tensor({2}, {5, 5}), c, none);
  EXPECT_EQ(dx[0], 0.0);
  EXPECT_EQ(dx[1], 5.0);
}

TEST(Layers, DropoutIsIdentityAtInference) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::dropout(0.5), {100}, rng);
  Tensor x = random_tensor({100}, 1);
  LayerCache c;
  EXPECT_EQ(layer_forward(l, x, c, {false, 3}), x);
}

TEST(Layers, DropoutMaskIsKeyedAndReusedByBackward) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::dropout(0.25), {400}, rng);
  Tensor x(Shape{400}, 1.0);
  LayerCache a, b, c;
  Tensor ya = layer_forward(l, x, a, {true, 11});
  Tensor yb = layer_forward(l, x, b, {true, 11});
  Tensor yc = layer_forward(l, x, c, {true, 12});
  EXPECT_EQ(ya, yb);
  EXPECT_NE(ya, yc);
  std::size_t kept = 0;
  for (double v : ya.values()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
    kept += v != 0.0;
  }
  EXPECT_GT(kept, 250u);
  EXPECT_LT(kept, 350u);
  std::vector<Tensor> none;
  Tensor dx = layer_backward(l, Tensor(Shape{400}, 1.0), a, none);
  EXPECT_EQ(dx, ya);
}

TEST(Layers, SoftmaxSumsToOne) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::softmax(), {5}, rng);
  LayerCache c;
  Tensor y = layer_forward(l, Tensor({5}, {1000, -3, 2, 0.5, 999}), c, {});
  double s = 0.0;
  for (double v : y.values()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Layers, StaleCacheIsRejected) {
  Rng rng(0);
  Layer l = make_layer(LayerSpec::dense(2), {3}, rng);
  LayerCache c;
  std::vector<Tensor> g{zeros_like(l.params[0]), zeros_like(l.params[1])};
  EXPECT_THROW(layer_backward(l, Tensor({2}), c, g), Error);
  try {
    layer_backward(l, Tensor({2}), c, g);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::stale_cache);
  }
}

TEST(GradientCheck, EveryLayerKindMatchesFiniteDifferences) {
  struct Case {
    LayerSpec spec;
    Shape in;
  };
  const std::vector<Case> cases{
      {LayerSpec::conv2d(3, 3, 5), {2, 5, 7}},
      {LayerSpec::conv2d(2, 3, 3, Padding::VALID), {1, 5, 6}},
      {LayerSpec::maxpool2x2(), {2, 5, 6}},
      {LayerSpec::dense(4), {6}},
      {LayerSpec::relu(), {7}},
      {LayerSpec::flatten(), {2, 3, 2}},
      {LayerSpec::bilstm(4, 0.0), {1, 3, 5}},
      {LayerSpec::softmax(), {4}},
      {LayerSpec::dropout(0.3), {6}},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto report = check_layer(cases[i].spec, cases[i].in, 100 + i);
    EXPECT_TRUE(report.passed) << layer_kind_name(cases[i].spec.kind) << " max rel err " << report.max_relative_error;
  }
}

TEST(GradientCheck, LinearModelIsExact) {
  const auto report = check_layer(LayerSpec::dense(3), {4}, 5);
  EXPECT_LT(report.max_relative_error, 1e-9);
}

TEST(GradientCheck, BilstmClippingBoundsGradientNorm) {
  Rng rng(1);
  Layer l = make_layer(LayerSpec::bilstm(3, 0.01), {2, 6}, rng);
  LayerCache c;
  layer_forward(l, random_tensor({2, 6}, 2), c, {});
  std::vector<Tensor> g;
  for (const auto& p : l.params) g.push_back(zeros_like(p));
  layer_backward(l, Tensor(Shape{6}, 1.0), c, g);
  double sq = 0.0;
  for (const auto& t : g) sq += t.squared_norm();
  EXPECT_NEAR(std::sqrt(sq), 0.01, 1e-12);
}

TEST(GradientCheck, TransposedDenseGradientIsCaught) {
  Rng rng(4);
  Layer l = make_layer(LayerSpec::dense(3), {5}, rng);
  Tensor x = random_tensor({5}, 8), w = random_tensor({3}, 9);
  LayerCache c;
  layer_forward(l, x, c, {});
  std::vector<Tensor> g{zeros_like(l.params[0]), zeros_like(l.params[1])};
  layer_backward(l, w, c, g);
  // Corrupt: compute x * g^T into a W-shaped buffer, i.e. the transposed outer product.
  Tensor bad(l.params[0].shape());
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) bad[i * 5 + j] = x[(i * 5 + j) / 3] * w[(i * 5 + j) % 3];
  std::vector<Tensor*> params{&l.params[0]};
  auto loss = [&] {
    LayerCache cc;
    Tensor y = layer_forward(l, x, cc, {});
    return y[0] * w[0] + y[1] * w[1] + y[2] * w[2];
  };
  EXPECT_TRUE(check_gradients(params, {"W"}, {g[0]}, loss).passed);
  EXPECT_FALSE(check_gradients(params, {"W"}, {bad}, loss).passed);
}

TEST(GradientCheck, WholeNetworkWithBothHeads) {
  Network net(small_cnn_spec(), 21);
  Tensor x = random_tensor({1, 6, 8}, 22);
  Tensor target({1, 2}, {0.3, -0.2});
  const int label = 1;
  const ForwardContext ctx{true, 77};  // dropout mask frozen by the fixed key

  auto loss = [&] {
    NetworkCache cache;
    auto out = net.forward(x, cache, ctx);
    Tensor pred({1, 2}, out.regression.storage());
    Tensor logits({1, 2}, out.logits.storage());
    return total_loss(l2_displacement_loss(pred, target), cross_entropy_loss(logits, std::vector<int>{label}));
  };

  NetworkCache cache;
  auto out = net.forward(x, cache, ctx);
  Tensor dreg, dlog;
  l2_displacement_loss(Tensor({1, 2}, out.regression.storage()), target, &dreg);
  cross_entropy_loss(Tensor({1, 2}, out.logits.storage()), std::vector<int>{label}, &dlog);
  dreg.reshape({2});
  dlog.reshape({2});
  auto grads = net.zero_gradients();
  net.backward(cache, dreg, dlog, grads);

  const auto report = check_gradients(net.parameters(), net.parameter_names(), grads, loss);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

TEST(Network, IdenticalSeedsGiveIdenticalParameters) {
  Network a(small_cnn_spec(), 5), b(small_cnn_spec(), 5), c(small_cnn_spec(), 6);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

TEST(Network, ForwardIsDeterministicForFixedKey) {
  Network net(small_cnn_spec(), 5);
  Tensor x = random_tensor({1, 6, 8}, 2);
  NetworkCache c1, c2;
  auto a = net.forward(x, c1, {true, 9});
  auto b = net.forward(x, c2, {true, 9});
  EXPECT_EQ(a.regression, b.regression);
  EXPECT_EQ(a.logits, b.logits);
}

TEST(Network, HeadsMustEmitTwoValues) {
  NetworkSpec s = small_cnn_spec();
  s.regression_head = {LayerSpec::dense(3)};
  EXPECT_THROW(Network(s, 0), Error);
}

TEST(Loss, L2DisplacementExamples) {
  EXPECT_NEAR(l2_displacement_loss(Tensor({1, 2}, {1, 1}), Tensor({1, 2}, {0, 0})), 1.4142136, 1e-7);
  EXPECT_EQ(l2_displacement_loss(Tensor({1, 2}, {3, -2}), Tensor({1, 2}, {3, -2})), 0.0);
  EXPECT_NEAR(l2_displacement_loss(Tensor({2, 2}, {1, 1, 5, 5}), Tensor({2, 2}, {0, 0, 5, 5})), 0.7071068, 1e-7);
  EXPECT_THROW(l2_displacement_loss(Tensor({0, 2}), Tensor({0, 2})), Error);
}

TEST(Loss, L2GradientIsFiniteAtZeroError) {
  Tensor g;
  l2_displacement_loss(Tensor({1, 2}, {2, 2}), Tensor({1, 2}, {2, 2}), &g);
  EXPECT_TRUE(g.all_finite());
  EXPECT_EQ(g[0], 0.0);
}

TEST(Loss, CrossEntropyExamples) {
  EXPECT_NEAR(cross_entropy_loss(Tensor({1, 2}, {0, 0}), std::vector<int>{0}), 0.6931472, 1e-7);
  // -log(1 / (1 + e^-20)) = log1p(e^-20)
  EXPECT_NEAR(cross_entropy_loss(Tensor({1, 2}, {10, -10}), std::vector<int>{0}), std::log1p(std::exp(-20.0)), 1e-15);
  EXPECT_NEAR(cross_entropy_loss(Tensor({1, 2}, {10, -10}), std::vector<int>{0}), 2.06e-9, 0.01e-9);
  EXPECT_NEAR(cross_entropy_loss(Tensor({1, 2}, {10, -10}), std::vector<int>{1}), 20.0, 1e-8);
  EXPECT_THROW(cross_entropy_loss(Tensor({0, 2}), std::vector<int>{}), Error);
  EXPECT_GE(cross_entropy_loss(Tensor({2, 2}, {900, -900, 3, 3}), std::vector<int>{0, 1}), 0.0);
}

TEST(Loss, TotalLossExamples) {
  EXPECT_EQ(total_loss(1.0, 0.5, 1.0), 1.5);
  EXPECT_EQ(total_loss(1.0, 0.5, 0.0), 1.0);
  EXPECT_EQ(total_loss(0.0, 0.0, 3.0), 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p({1}, {0.0});
  std::vector<Tensor*> ps{&p};
  AdamState st;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_step(ps, std::vector<Tensor>{Tensor({1}, {1.0})}, st, cfg);
  EXPECT_NEAR(p[0], -1e-3 / (1.0 + 1e-8), 1e-18);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientWithoutDecayIsIdentity) {
  Tensor p({3}, {1.0, -2.0, 0.5});
  const Tensor before = p;
  std::vector<Tensor*> ps{&p};
  AdamState st;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adam_step(ps, std::vector<Tensor>{Tensor({3}, 0.0)}, st, cfg);
  EXPECT_EQ(p, before);
}

TEST(Adam, DecoupledDecayOnly) {
  Tensor p({1}, {1.0});
  std::vector<Tensor*> ps{&p};
  AdamState st;
  adam_step(ps, std::vector<Tensor>{Tensor({1}, 0.0)}, st, {});
  EXPECT_NEAR(p[0], 0.99999999, 1e-15);
}

TEST(Adam, NonFiniteGradientIsDivergence) {
  Tensor p({1}, {1.0});
  std::vector<Tensor*> ps{&p};
  AdamState st;
  try {
    adam_step(ps, std::vector<Tensor>{Tensor({1}, {NAN})}, st, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::divergence);
  }
  EXPECT_EQ(p[0], 1.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Network net(small_cnn_spec(), 3);
  const nlohmann::json extra{{"note", "x"}, {"scale", 0.1}};
  const std::string bytes = serialize_checkpoint(net, extra);
  EXPECT_EQ(bytes.substr(0, 4), "TFNN");
  Checkpoint ck = deserialize_checkpoint(bytes);
  EXPECT_TRUE(ck.network == net);
  EXPECT_EQ(ck.extra, extra);
  EXPECT_EQ(serialize_checkpoint(ck.network, ck.extra), bytes);
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  Network net(small_cnn_spec(), 3);
  std::string bytes = serialize_checkpoint(net);
  bytes.pop_back();
  EXPECT_THROW(deserialize_checkpoint(bytes), Error);
  EXPECT_THROW(deserialize_checkpoint("nope"), Error);
}
