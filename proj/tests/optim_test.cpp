#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cgid/train.hpp"
#include "oracles.hpp"

namespace cgid {
namespace {

TEST(AdamStep, ZeroGradientLeavesParamsUnchanged) {
  std::vector<double> p{1.0, -2.0, 3.5};
  const auto before = p;
  AdamState s(3);
  adam_step(s, p, std::vector<double>(3, 0.0), TrainConfig{});
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.t, 1u);
}

TEST(AdamStep, FirstStepIsLearningRateTimesSign) {
  // t=1: mhat = g, vhat = g^2, so the step is lr * g / (|g| + eps).
  TrainConfig c;
  c.lr = 0.01;
  std::vector<double> g{3.0, -0.5, 1e-3};
  std::vector<double> p(3, 0.0);
  AdamState s(3);
  adam_step(s, p, g, c);
  for (std::size_t i = 0; i < 3; ++i) {
    const double want = -c.lr * g[i] / (std::abs(g[i]) + c.eps);
    EXPECT_NEAR(p[i], want, 1e-15);
    EXPECT_NEAR(std::abs(p[i]), c.lr, c.lr * 1e-4);
  }
}

TEST(AdamStep, SecondStepByHand) {
  TrainConfig c;
  std::vector<double> p{0.0};
  AdamState s(1);
  adam_step(s, p, std::vector<double>{2.0}, c);
  adam_step(s, p, std::vector<double>{1.0}, c);
  const double m = 0.9 * 0.1 * 2.0 + 0.1 * 1.0;
  const double v = 0.999 * 0.001 * 4.0 + 0.001 * 1.0;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  const double first = -1e-3 * 2.0 / (2.0 + 1e-8);
  EXPECT_NEAR(p[0], first - 1e-3 * mhat / (std::sqrt(vhat) + 1e-8), 1e-15);
}

TEST(AdamStep, ConstantGradientStepNeverExceedsLearningRate) {
  TrainConfig c;
  std::vector<double> p{0.0};
  AdamState s(1);
  double prev = 0.0;
  for (int i = 0; i < 500; ++i) {
    adam_step(s, p, std::vector<double>{0.7}, c);
    EXPECT_LE(std::abs(p[0] - prev), c.lr * (1 + 1e-9));
    prev = p[0];
  }
}

TEST(AdamStep, Errors) {
  AdamState s(2);
  std::vector<double> p(2, 0.0);
  EXPECT_THROW(adam_step(s, p, std::vector<double>(3, 0.0), TrainConfig{}), std::invalid_argument);
  EXPECT_THROW(adam_step(s, p, std::vector<double>{0.0, NAN}, TrainConfig{}), std::runtime_error);
  EXPECT_THROW(adam_step(s, p, std::vector<double>{0.0, INFINITY}, TrainConfig{}), std::runtime_error);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.eps = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

double quadratic(std::span<const double> p, std::span<double> g) {
  double f = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - static_cast<double>(i);
    f += d * d;
    g[i] = 2 * d;
  }
  return f;
}

TEST(Minimize, ZeroEpochsReturnsInit) {
  TrainConfig c;
  c.epochs = 0;
  const std::vector<double> init{5.0, 5.0};
  const auto r = minimize(quadratic, init, c);
  EXPECT_EQ(r.params, init);
  EXPECT_EQ(r.epochs_run, 0u);
  ASSERT_EQ(r.history.size(), 1u);
}

TEST(Minimize, BestLossNeverWorseThanInitial) {
  TrainConfig c;
  c.lr = 0.5;  // large enough to oscillate
  c.epochs = 200;
  const auto r = minimize(quadratic, {3.0, -4.0, 8.0}, c);
  EXPECT_LE(r.best_loss, r.initial_loss);
  double running = INFINITY;
  for (const auto& row : r.history) running = std::min(running, row.loss);
  EXPECT_EQ(running, r.best_loss);
  std::vector<double> g(3);
  EXPECT_EQ(quadratic(r.params, g), r.best_loss);
}

TEST(Minimize, ConvergesAndStops) {
  TrainConfig c;
  c.lr = 0.05;
  const auto r = minimize(quadratic, {3.0, -4.0, 8.0}, c);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.epochs_run, c.epochs);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.params[i], static_cast<double>(i), 1e-3);
}

TEST(Minimize, DivergenceIsReported) {
  TrainConfig c;
  c.epochs = 10;
  auto bad = [](std::span<const double> p, std::span<double> g) {
    g[0] = 1.0;
    return p[0] < -0.0025 ? NAN : p[0];
  };
  EXPECT_THROW(minimize(bad, {0.0}, c), std::runtime_error);
}

TEST(Minimize, HeldoutScoresAreRecordedPeriodically) {
  TrainConfig c;
  c.epochs = 25;
  c.heldout_every = 10;
  c.tolerance = 0.0;
  const auto r = minimize(quadratic, {1.0}, c, [](std::span<const double> p) { return p[0]; });
  ASSERT_EQ(r.history.size(), 26u);
  for (const auto& row : r.history)
    EXPECT_EQ(row.heldout_vaf.has_value(), row.epoch % 10 == 0 || row.epoch == 25) << row.epoch;
  std::stringstream ss;
  write_history_csv(ss, r.history);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "epoch,loss,vaf_on_heldout");
  std::getline(ss, line);
  EXPECT_EQ(line, "0,1,1");
  std::getline(ss, line);
  EXPECT_EQ(line.back(), ',');
}

SignalSeries noise(std::size_t len, std::mt19937_64& rng) {
  return {oracle::random_vector(len, rng), 750.0};
}

TEST(InitialParams, OnlyHierarchicalFactorsAreNonzero) {
  const ModelSpec spec{8, 750.0, {KernelSpec{Repr::hierarchical, 2, 8, 1, 2}}};
  const auto theta = initial_params(spec, 42);
  const auto again = initial_params(spec, 42);
  EXPECT_EQ(theta, again);
  EXPECT_NE(theta, initial_params(spec, 43));
  for (const auto& seg : model_layout(spec))
    for (std::size_t i = 0; i < seg.size; ++i) {
      const double v = theta[seg.offset + i];
      if (seg.label.find(".block") != std::string::npos) {
        EXPECT_NE(v, 0.0);
        EXPECT_LE(std::abs(v), 1e-3);
      } else {
        EXPECT_EQ(v, 0.0) << seg.label;
      }
    }
}

TEST(Fit, InterceptOnlyRecoversConstant) {
  std::mt19937_64 rng(1);
  const ModelSpec spec{1, 750.0, {}};
  auto x = noise(50, rng);
  Dataset d = make_dataset(x, {std::vector<double>(50, 0.37), 750.0}, 1);
  TrainConfig c;
  c.lr = 0.01;
  c.epochs = 20000;
  // With memory 1 the model also has a gain on x; it must converge to zero.
  const auto r = fit(spec, d, c);
  EXPECT_NEAR(r.model.h0, 0.37, 1e-6);
}

TEST(Fit, RecoversImpulseResponse) {
  std::mt19937_64 rng(2);
  const ModelSpec spec{16, 750.0, {}};
  VolterraModel truth = zero_model(spec);
  truth.h0 = 0.2;
  truth.h1 = oracle::random_vector(16, rng);
  auto x = noise(400, rng);
  auto y = predict(truth, x);
  const auto d = make_dataset(x, y, 16);
  TrainConfig c;
  c.lr = 0.01;
  c.tolerance = 1e-12;
  const auto r = fit(spec, d, c);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(r.model.h1[i], truth.h1[i], 1e-3);
  EXPECT_NEAR(r.model.h0, truth.h0, 1e-3);
}

TEST(Fit, StrongPenaltyShrinksParameters) {
  std::mt19937_64 rng(3);
  const ModelSpec spec{8, 750.0, {KernelSpec{Repr::dense, 2, 8}}};
  const auto truth = unflatten_model(oracle::random_vector(spec.param_count(), rng), spec);
  auto x = noise(200, rng);
  const auto d = make_dataset(x, predict(truth, x), 8);
  TrainConfig c;
  c.lr = 0.01;
  c.epochs = 3000;
  const auto free_fit = fit(spec, d, c);
  c.l2 = 10.0;
  const auto penalized = fit(spec, d, c);
  const auto kernel_part = [](const FitResult& f) { return squared_norm(flatten(f.model.kernels[0])); };
  EXPECT_LT(kernel_part(penalized), 0.5 * kernel_part(free_fit));
}

TEST(Fit, DeterministicForFixedSeed) {
  std::mt19937_64 rng(4);
  const ModelSpec spec{8, 750.0, {KernelSpec{Repr::hierarchical, 2, 8, 1, 2}}};
  auto x = noise(100, rng);
  const auto truth = unflatten_model(oracle::random_vector(spec.param_count(), rng), spec);
  const auto d = make_dataset(x, predict(truth, x), 8);
  TrainConfig c;
  c.epochs = 300;
  c.seed = 9;
  const auto a = fit(spec, d, c, &d);
  const auto b = fit(spec, d, c, &d);
  EXPECT_EQ(a.training.params, b.training.params);
  ASSERT_EQ(a.training.history.size(), b.training.history.size());
  for (std::size_t i = 0; i < a.training.history.size(); ++i)
    EXPECT_EQ(a.training.history[i].loss, b.training.history[i].loss);
  EXPECT_TRUE(a.heldout_vaf.has_value());
}

}  // namespace
}  // namespace cgid
