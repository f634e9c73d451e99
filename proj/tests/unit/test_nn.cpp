#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "emt/error.hpp"
#include "emt/networks.hpp"
#include "emt/nn.hpp"
#include "emt/serialize.hpp"
#include "emt/training.hpp"
#include "synthetic.hpp"

using namespace emt;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Direct nested-loop cross-correlation with zero padding.
Tensor conv_oracle(const Tensor& in, const Tensor& k, const std::vector<double>& bias) {
  const std::size_t cin = in.dim(0), h = in.dim(1), w = in.dim(2), cout = k.dim(0);
  Tensor out({cout, h, w});
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double s = bias[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
              s += k[((o * cin + c) * 3 + static_cast<std::size_t>(dy + 1)) * 3 + static_cast<std::size_t>(dx + 1)] *
                   in.at(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
        out.at(o, y, x) = s;
      }
  return out;
}

}  // namespace

TEST(Tensor, ShapeAndReshape) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_TRUE(t.all_finite());
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.dim(0), 3u);
  EXPECT_THROW(t.reshaped({4, 2}), DimensionError);
  t[2] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Conv2d, IdentityKernelReturnsInput) {
  Rng rng(1);
  const Tensor in = random_tensor({1, 5, 4}, rng);
  Tensor k({1, 1, 3, 3});
  k[4] = 1.0;
  EXPECT_EQ(conv2d_forward(in, k, std::vector<double>{0.0}), in);
}

TEST(Conv2d, ZeroKernelGivesBias) {
  Rng rng(2);
  const Tensor in = random_tensor({2, 4, 4}, rng);
  const Tensor k({1, 2, 3, 3});
  const Tensor out = conv2d_forward(in, k, std::vector<double>{0.75});
  for (double v : out.values()) EXPECT_EQ(v, 0.75);
}

TEST(Conv2d, OnesHandConvolution) {
  const Tensor in({1, 3, 3}, 1.0);
  const Tensor k({1, 1, 3, 3}, 1.0);
  const Tensor out = conv2d_forward(in, k, std::vector<double>{0.0});
  EXPECT_EQ(out.at(0, 1, 1), 9.0);
  EXPECT_EQ(out.at(0, 0, 0), 4.0);
  EXPECT_EQ(out.at(0, 2, 2), 4.0);
  EXPECT_EQ(out.at(0, 0, 1), 6.0);
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(4), h = 1 + rng.below(7), w = 1 + rng.below(7);
    const Tensor in = random_tensor({cin, h, w}, rng);
    const Tensor k = random_tensor({cout, cin, 3, 3}, rng);
    std::vector<double> b(cout);
    for (double& v : b) v = rng.uniform(-1, 1);
    const Tensor got = conv2d_forward(in, k, b);
    const Tensor want = conv_oracle(in, k, b);
    ASSERT_TRUE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv2d, ShapeMismatchThrows) {
  const Tensor in({2, 3, 3});
  const Tensor k({1, 3, 3, 3});
  EXPECT_THROW(conv2d_forward(in, k, std::vector<double>{0.0}), DimensionError);
}

TEST(Losses, CrossEntropyOfUniformLogitsIsLogT) {
  for (std::size_t t : {2u, 3u, 7u}) {
    const Tensor logits({4, t}, 0.3);
    const std::vector<std::size_t> labels{0, 1, 0, 1};
    EXPECT_NEAR(cross_entropy_loss(logits, labels).loss, std::log(static_cast<double>(t)), 1e-12);
  }
}

TEST(Losses, MseAndSoftmax) {
  const Tensor a({2, 2}, 1.0);
  const Tensor b({2, 2}, 3.0);
  const auto r = mse_loss(a, b);
  EXPECT_DOUBLE_EQ(r.loss, 4.0);
  for (double g : r.grad.values()) EXPECT_DOUBLE_EQ(g, -1.0);
  const auto p = softmax(std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-15);
  EXPECT_GT(p[2], p[1]);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0}, m(2, 0.0), v(2, 0.0);
  adam_update(p, g, m, v, 1, TrainOptions{});
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0, 0.0, 0.0}, g{3.0, -0.01, 250.0}, m(3, 0.0), v(3, 0.0);
  TrainOptions o;
  adam_update(p, g, m, v, 1, o);
  EXPECT_NEAR(p[0], -1e-3, 1e-9);
  EXPECT_NEAR(p[1], 1e-3, 1e-6);
  EXPECT_NEAR(p[2], -1e-3, 1e-9);
}

TEST(Adam, TwoStepHandRecursion) {
  TrainOptions o;
  o.learning_rate = 0.1;
  o.beta1 = 0.9;
  o.beta2 = 0.999;
  std::vector<double> p{1.0}, m{0.0}, v{0.0};
  adam_update(p, std::vector<double>{0.5}, m, v, 1, o);
  adam_update(p, std::vector<double>{-0.2}, m, v, 2, o);
  // Step 1: m=0.05, v=0.00025, mhat=0.5, vhat=0.25 -> p = 1 - 0.1 * 0.5 / (0.5 + 1e-8)
  double x = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  // Step 2: m=0.045-0.02=0.025, v=0.00024975+0.00004=0.00028975
  const double m2 = 0.9 * 0.05 + 0.1 * -0.2;
  const double v2 = 0.999 * 0.00025 + 0.001 * 0.04;
  const double mhat = m2 / (1 - 0.81);
  const double vhat = v2 / (1 - 0.999 * 0.999);
  x -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  EXPECT_NEAR(p[0], x, 1e-14);
}

TEST(Adam, SizeMismatchThrows) {
  std::vector<double> p(2), g(3), m(2), v(2);
  EXPECT_THROW(adam_update(p, g, m, v, 1, TrainOptions{}), DimensionError);
}

TEST(TrainOptionsTest, DefaultsAndValidation) {
  const auto r = TrainOptions::residual_defaults();
  EXPECT_EQ(r.learning_rate, 1e-3);
  EXPECT_EQ(r.batch_size, 20u);
  EXPECT_EQ(r.epochs, 5u);
  EXPECT_EQ(r.beta2, 0.999);
  const auto c = TrainOptions::classifier_defaults();
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.epochs, 50u);
  EXPECT_EQ(c.beta2, 0.9999);
  EXPECT_EQ(c.patience, 5u);
  EXPECT_EQ(c.max_time_steps, 1000u);
  TrainOptions bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(bad.validate(), InvalidInputError);
  bad = TrainOptions{};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), InvalidInputError);
}

TEST(ResidualNetTest, ArchitectureShapes) {
  ResidualNet net(5);
  ASSERT_EQ(net.depth(), 8u);
  EXPECT_EQ(net.layers().front().in_channels(), 1u);
  EXPECT_EQ(net.layers().front().out_channels(), 64u);
  EXPECT_EQ(net.layers()[3].in_channels(), 64u);
  EXPECT_EQ(net.layers().back().out_channels(), 1u);
  Rng rng(1);
  net.init(rng);
  const Tensor out = net.forward(Tensor({3, 5}, 0.5));
  EXPECT_EQ(out.shape(), (std::vector<std::size_t>{3, 5, 5}));
}

TEST(ResidualNetTest, ZeroHeadGivesZeroResidual) {
  ResidualNet net(6, 3, 8);
  Rng rng(4);
  net.init(rng);
  net.zero_head();
  const std::vector<double> x{0.1, 0.9, 0.3, 0.5, 0.0, 1.0};
  const Tensor r = vdsr_forward(net, x);
  for (double v : r.values()) EXPECT_EQ(v, 0.0);
  const Tensor xn = residual_compose(x, r);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(xn.at(i, j), x[j]);
}

TEST(ResidualNetTest, DeterministicForward) {
  ResidualNet net(4, 3, 8);
  Rng rng(9);
  net.init(rng);
  const std::vector<double> x{0.2, 0.4, 0.6, 0.8};
  EXPECT_EQ(vdsr_forward(net, x), vdsr_forward(net, x));
}

TEST(ResidualNetTest, SingleIdentityConvReturnsBroadcast) {
  ResidualNet net(3, 1, 1);
  net.layers()[0].weight().value.fill(0.0);
  net.layers()[0].weight().value[4] = 1.0;
  net.layers()[0].bias().value.fill(0.0);
  const std::vector<double> x{0.25, -1.0, 3.0};
  const Tensor r = vdsr_forward(net, x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.at(i, j), x[j]);
}

TEST(ResidualNetTest, NaNParametersRaiseNumericError) {
  ResidualNet net(3, 2, 2);
  Rng rng(1);
  net.init(rng);
  net.layers()[0].bias().value[0] = std::nan("");
  EXPECT_THROW(net.check_finite(), NumericError);
  EXPECT_THROW(vdsr_forward(net, std::vector<double>{0.1, 0.2, 0.3}), NumericError);
}

TEST(ResidualCompose, SpecExamples) {
  const Tensor r = [] {
    Tensor t({2, 2});
    t.at(0, 0) = 0.5;
    t.at(0, 1) = -0.5;
    t.at(1, 0) = -1.0;
    t.at(1, 1) = 1.0;
    return t;
  }();
  const Tensor x = residual_compose(std::vector<double>{1.0, 2.0}, r);
  EXPECT_EQ(x.values()[0], 1.5);
  EXPECT_EQ(x.values()[1], 1.5);
  EXPECT_EQ(x.values()[2], 0.0);
  EXPECT_EQ(x.values()[3], 3.0);
  EXPECT_EQ(residual_compose(std::vector<double>{0.0, 0.0}, r), r);
  EXPECT_THROW(residual_compose(std::vector<double>{1.0, 2.0, 3.0}, r), DimensionError);
}

TEST(SkillClassifierTest, OutputShapeAndArgmax) {
  SkillClassifier net(6, 3);
  Rng rng(2);
  net.init(rng);
  const Tensor logits = net.forward(Tensor({4, 6, 6}, 0.3));
  EXPECT_EQ(logits.shape(), (std::vector<std::size_t>{4, 3}));
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.9}), 1u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{-1.0, 2.0, 2.0}), 1u);
}

TEST(GradientCheck, LinearLayerMse) {
  Rng rng(5);
  Linear lin(4, 3);
  lin.init_xavier(rng);
  const Tensor x = random_tensor({5, 4}, rng);
  const Tensor y = random_tensor({5, 3}, rng);
  std::vector<Param*> params{&lin.weight(), &lin.bias()};
  const double err = gradient_check(
      params, [&] { return mse_loss(lin.forward(x), y).loss; },
      [&] {
        const auto l = mse_loss(lin.forward(x), y);
        lin.backward(x, l.grad, nullptr);
      },
      1000, rng);
  EXPECT_LT(err, 1e-7);
}

TEST(GradientCheck, TinyVdsr) {
  Rng rng(6);
  ResidualNet net(4, 3, 4);
  net.init(rng, 1.0);
  const Tensor x = random_tensor({3, 4}, rng, 0.0, 1.0);
  const Tensor t = random_tensor({3, 4, 4}, rng, 0.0, 1.0);
  EXPECT_LT(gradient_check(net, x, t, 10000, rng), 1e-4);
}

TEST(GradientCheck, TinyClassifier) {
  Rng rng(7);
  SkillClassifier net(4, 2, 1, 3);
  net.init(rng);
  const Tensor imgs = random_tensor({4, 4, 4}, rng, 0.0, 1.0);
  const std::vector<std::size_t> labels{0, 1, 1, 0};
  EXPECT_LT(gradient_check(net, imgs, labels, 10000, rng), 1e-4);
}

TEST(GradientCheck, ZeroLossConfiguration) {
  Rng rng(8);
  ResidualNet net(4, 3, 4);
  net.init(rng);
  net.zero_head();
  const Tensor x = random_tensor({2, 4}, rng, 0.0, 1.0);
  const Tensor target = broadcast_rows(x).reshaped({2, 4, 4});
  EXPECT_LT(gradient_check(net, x, target, 10000, rng), 1e-4);
  // Analytic gradients are exactly zero at a zero-loss point with a zero head.
  ResidualNet::Cache cache;
  net.zero_grad();
  net.forward(x, cache);
  net.backward(cache, Tensor({2, 4, 4}));
  for (const Param* p : std::as_const(net).params())
    for (double g : p->grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(TrainResidual, AlreadyOptimalDatasetKeepsParameters) {
  Rng rng(10);
  ResidualNet net(4, 3, 4);
  net.init(rng);
  net.zero_head();
  std::vector<ResidualSample> data;
  for (int i = 0; i < 12; ++i) {
    ResidualSample s;
    s.x = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    for (int r = 0; r < 4; ++r) s.target.insert(s.target.end(), s.x.begin(), s.x.end());
    data.push_back(s);
  }
  std::vector<Tensor> before;
  for (const Param* p : std::as_const(net).params()) before.push_back(p->value);
  const auto losses = train_residual_net(net, data, TrainOptions::residual_defaults(), rng);
  ASSERT_EQ(losses.size(), 5u);
  EXPECT_EQ(losses.front(), 0.0);
  std::size_t i = 0;
  for (const Param* p : std::as_const(net).params()) EXPECT_EQ(p->value, before[i++]);
  EXPECT_TRUE(net.trained());
}

TEST(TrainResidual, TinyNetImproves) {
  Rng rng(11);
  ResidualNet net(4, 2, 8);
  net.init(rng);
  std::vector<ResidualSample> data;
  for (int i = 0; i < 60; ++i) {
    ResidualSample s;
    for (int j = 0; j < 4; ++j) s.x.push_back(rng.uniform());
    for (int r = 0; r < 4; ++r)
      for (int j = 0; j < 4; ++j) s.target.push_back(0.5 * s.x[static_cast<std::size_t>(j)] + 0.2);
    data.push_back(s);
  }
  auto opts = TrainOptions::residual_defaults();
  opts.epochs = 20;
  const auto losses = train_residual_net(net, data, opts, rng);
  ASSERT_EQ(losses.size(), 20u);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(TrainResidual, EmptyDatasetThrows) {
  ResidualNet net(3, 2, 2);
  Rng rng(1);
  EXPECT_THROW(train_residual_net(net, std::vector<ResidualSample>{}, TrainOptions{}, rng), EmptyInputError);
}

TEST(TrainClassifier, SeparableDataReachesHighAccuracy) {
  Rng rng(12);
  SkillClassifier net(6, 2);
  net.init(rng);
  const auto data = emt::testing::separable_images(200, 6, 0.5, 0.2, rng);
  const auto res = train_classifier(net, data, TrainOptions::classifier_defaults(), rng);
  EXPECT_GE(res.best_accuracy, 0.95);
  EXPECT_TRUE(net.trained());
  const auto fresh = emt::testing::separable_images(100, 6, 0.5, 0.2, rng);
  EXPECT_GE(classification_accuracy(net, fresh), 0.9);
}

TEST(TrainClassifier, FrozenParametersStopAfterSecondEpoch) {
  Rng rng(13);
  SkillClassifier net(4, 2, 1, 4);
  net.init(rng);
  const auto data = emt::testing::separable_images(40, 4, 0.5, 0.1, rng);
  auto opts = TrainOptions::classifier_defaults();
  opts.learning_rate = 0.0;
  opts.patience = 1;
  const auto res = train_classifier(net, data, opts, rng);
  EXPECT_EQ(res.val_accuracy.size(), 2u);
  EXPECT_TRUE(res.stopped_early);
  EXPECT_EQ(res.best_epoch, 1u);
}

TEST(TrainClassifier, RandomLabelsStayNearChance) {
  Rng rng(14);
  SkillClassifier net(5, 2, 1, 8);
  net.init(rng);
  auto data = emt::testing::separable_images(300, 5, 0.0, 0.3, rng);
  for (auto& s : data) s.label = rng.below(2);
  const auto res = train_classifier(net, data, TrainOptions::classifier_defaults(), rng);
  auto held_out = emt::testing::separable_images(400, 5, 0.0, 0.3, rng);
  for (auto& s : held_out) s.label = rng.below(2);
  EXPECT_NEAR(classification_accuracy(net, held_out), 0.5, 0.15);
  EXPECT_NEAR(res.val_accuracy.back(), 0.5, 0.15);
}

TEST(TrainClassifier, BestEpochParametersAreReturned) {
  Rng rng(15);
  SkillClassifier net(5, 2, 1, 4);
  net.init(rng);
  auto data = emt::testing::separable_images(120, 5, 0.2, 0.3, rng);
  auto opts = TrainOptions::classifier_defaults();
  opts.epochs = 15;
  opts.validation_fraction = 0.5;
  const auto res = train_classifier(net, data, opts, rng);
  for (double a : res.val_accuracy) EXPECT_LE(a, res.best_accuracy);
  EXPECT_EQ(res.val_accuracy.at(res.best_epoch - 1), res.best_accuracy);
}

TEST(TrainClassifier, SingleClassThrows) {
  Rng rng(16);
  SkillClassifier net(4, 2, 1, 4);
  net.init(rng);
  auto data = emt::testing::separable_images(20, 4, 0.5, 0.1, rng);
  for (auto& s : data) s.label = 1;
  EXPECT_THROW(train_classifier(net, data, TrainOptions::classifier_defaults(), rng), DegenerateLabelsError);
}

TEST(TrainingDeterminism, SameSeedSameParameters) {
  auto run = [] {
    Rng rng(20);
    ResidualNet net(4, 3, 4);
    net.init(rng);
    std::vector<ResidualSample> data;
    for (int i = 0; i < 30; ++i) {
      ResidualSample s;
      for (int j = 0; j < 4; ++j) s.x.push_back(rng.uniform());
      for (int j = 0; j < 16; ++j) s.target.push_back(rng.uniform());
      data.push_back(s);
    }
    train_residual_net(net, data, TrainOptions::residual_defaults(), rng);
    std::vector<Tensor> out;
    for (const Param* p : std::as_const(net).params()) out.push_back(p->value);
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Serialize, RoundTripBothNetworks) {
  const auto dir = std::filesystem::temp_directory_path();
  Rng rng(30);
  ResidualNet net(5, 3, 6);
  net.init(rng);
  save_network(net, dir / "emt_vdsr.bin");
  const ResidualNet back = load_residual_net(dir / "emt_vdsr.bin");
  EXPECT_EQ(back.depth(), 3u);
  EXPECT_EQ(back.hidden_channels(), 6u);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_EQ(vdsr_forward(back, x), vdsr_forward(net, x));

  SkillClassifier cls(5, 3, 2, 4);
  cls.init(rng);
  save_network(cls, dir / "emt_cls.bin");
  const SkillClassifier cback = load_skill_classifier(dir / "emt_cls.bin");
  const Tensor img({5, 5}, 0.4);
  EXPECT_EQ(cback.logits(img), cls.logits(img));

  EXPECT_THROW(load_skill_classifier(dir / "emt_vdsr.bin"), IoError);
  {
    std::ofstream junk(dir / "emt_junk.bin", std::ios::binary);
    junk << "NOTANET";
  }
  EXPECT_THROW(load_residual_net(dir / "emt_junk.bin"), IoError);
  std::filesystem::remove(dir / "emt_vdsr.bin");
  std::filesystem::remove(dir / "emt_cls.bin");
  std::filesystem::remove(dir / "emt_junk.bin");
}
