#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gatagnn/training.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace gatagnn;
using gatagnn::testing::random_tensor;

namespace {

// Days where each company's class is the sign of its last close feature.
std::vector<WindowSample> separable_days(std::size_t days, std::size_t n, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<WindowSample> out;
  for (std::size_t d = 0; d < days; ++d) {
    WindowSample s;
    s.t_index = T + d;
    for (std::size_t k = 0; k < T; ++k) s.steps.push_back(random_tensor(n, kNumFeatures, rng));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = s.steps.back()(i, kClose);
      s.target_return.push_back(x);
      s.target_class.push_back(x > 0 ? 1 : 0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

ModelConfig tiny(Variant v, Task task) {
  ModelConfig c;
  c.variant = v;
  c.task = task;
  c.hidden = 4;
  c.window = 3;
  c.heads = 2;
  c.seed = 1;
  c.regression_head = RegressionHead::linear;
  return c;
}

}  // namespace

TEST(Loss, Examples) {
  EXPECT_DOUBLE_EQ(mse(std::vector<double>{1, 2}, std::vector<double>{1, 0}), 2.0);
  const std::vector<std::size_t> labels{1, 0};
  EXPECT_EQ(cross_entropy(Tensor::from({{0, 1}, {1, 0}}), labels), 0.0);
  EXPECT_NEAR(cross_entropy(Tensor(2, 2, 0.5), labels), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(Tensor(2, 2, 0.5), labels), 0.693147, 1e-6);
  // Clamped at 1e-12 rather than infinite.
  EXPECT_NEAR(cross_entropy(Tensor::from({{1, 0}}), std::vector<std::size_t>{1}), -std::log(1e-12), 1e-9);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), ContractError);
  EXPECT_THROW(mse(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Parameter p{"w", Tensor::row({0.5, -2.0})};
  p.zero_grad();
  std::vector<Parameter*> ps{&p};
  AdamState st;
  for (int k = 0; k < 3; ++k) adam_step(ps, st, 0.1);
  EXPECT_EQ(p.value[0], 0.5);
  EXPECT_EQ(p.value[1], -2.0);
}

TEST(Adam, FirstStepIsSignTimesLr) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int trial = 0; trial < 50; ++trial) {
    Parameter p{"w", random_tensor(2, 3, rng)};
    const Tensor before = p.value;
    p.grad = Tensor(2, 3);
    for (double& g : p.grad.data()) {
      g = u(rng);
      if (g == 0) g = 1;
    }
    std::vector<Parameter*> ps{&p};
    AdamState st;
    adam_step(ps, st, 0.1);
    for (std::size_t k = 0; k < 6; ++k) {
      const double step = p.value[k] - before[k];
      EXPECT_NEAR(step, p.grad[k] > 0 ? -0.1 : 0.1, 1e-7);
    }
  }
}

TEST(Adam, QuadraticMatchesScalarRecurrence) {
  Parameter p{"w", Tensor(1, 1, 1.0)};
  std::vector<Parameter*> ps{&p};
  AdamState st;
  // Independent recurrence with the textbook constants.
  double w = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 100; ++t) {
    p.grad = Tensor(1, 1, 2.0 * p.value[0]);
    adam_step(ps, st, 0.05);
    const double g = 2.0 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p.value[0], w, 1e-12);
  EXPECT_LT(std::abs(w), 0.05);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Parameter p{"relation.0.W_s", Tensor(1, 2)};
  p.grad = Tensor::row({1.0, std::numeric_limits<double>::quiet_NaN()});
  std::vector<Parameter*> ps{&p};
  AdamState st;
  try {
    adam_step(ps, st, 0.1);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("relation.0.W_s"), std::string::npos);
  }
}

TEST(Adam, GradientClipping) {
  Parameter a{"a", Tensor(1, 1)}, b{"b", Tensor(1, 1)};
  a.grad = Tensor(1, 1, 3.0);
  b.grad = Tensor(1, 1, 4.0);
  std::vector<Parameter*> ps{&a, &b};
  clip_gradients(ps, 1.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
  clip_gradients(ps, 10.0);
  EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
}

TEST(Metrics, Examples) {
  EXPECT_DOUBLE_EQ(accuracy(std::vector<std::size_t>{1, 0, 1}, std::vector<std::size_t>{1, 1, 1}), 2.0 / 3.0);
  EXPECT_EQ(*auc(std::vector<double>{0.9, 0.1}, std::vector<std::size_t>{1, 0}), 1.0);
  EXPECT_EQ(*auc(std::vector<double>{0.1, 0.9}, std::vector<std::size_t>{1, 0}), 0.0);
  EXPECT_EQ(*auc(std::vector<double>{0.5, 0.5}, std::vector<std::size_t>{1, 0}), 0.5);
  EXPECT_FALSE(auc(std::vector<double>{0.2, 0.7}, std::vector<std::size_t>{1, 1}).has_value());
}

TEST(Metrics, AucMatchesPairEnumeration) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> coarse(0, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 49;
    std::vector<double> s(n);
    std::vector<std::size_t> y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = trial % 2 ? coarse(rng) / 6.0 : std::uniform_real_distribution<double>()(rng);  // ties on odd trials
      y[k] = rng() % 2;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(*auc(s, y), oracle::auc(s, y)) << "n=" << n;
  }
}

TEST(Evaluate, PooledErrorsAndIdempotence) {
  auto days = separable_days(6, 3, 3, 3);
  auto m = build(tiny(Variant::GRU, Task::regression));
  auto r1 = evaluate(m, days), r2 = evaluate(m, days);
  EXPECT_EQ(r1.mse, r2.mse);
  EXPECT_EQ(r1.auc, r2.auc);
  EXPECT_EQ(r1.n_samples, 18u);
  double se = 0, ae = 0;
  for (const auto& d : days) {
    auto b = forward(m, d);
    for (std::size_t i = 0; i < 3; ++i) {
      se += std::pow(b.output(i, 0) - d.target_return[i], 2);
      ae += std::abs(b.output(i, 0) - d.target_return[i]);
    }
  }
  EXPECT_NEAR(*r1.mse, se / 18, 1e-15);
  EXPECT_NEAR(*r1.mae, ae / 18, 1e-15);
  EXPECT_GE(*r1.acc, 0.0);
  EXPECT_LE(*r1.acc, 1.0);

  auto zero = build(tiny(Variant::GRU, Task::regression));
  zero.W_head.value.fill(0.0);
  for (auto& d : days) std::fill(d.target_return.begin(), d.target_return.end(), 0.0);
  auto r0 = evaluate(zero, days);
  EXPECT_EQ(*r0.mse, 0.0);
  EXPECT_EQ(*r0.mae, 0.0);
}

TEST(Evaluate, ClassificationReportsNoRegressionErrors) {
  auto days = separable_days(4, 3, 3, 4);
  auto r = evaluate(build(tiny(Variant::GAT_AGNN, Task::classification)), days, "val");
  EXPECT_EQ(r.split, "val");
  EXPECT_FALSE(r.mse.has_value());
  EXPECT_TRUE(r.auc.has_value());
  std::vector<std::size_t> first{0};
  EXPECT_EQ(evaluate(build(tiny(Variant::GAT_AGNN, Task::classification)), days, "x", first).n_samples, 4u);
}

TEST(Train, ZeroEpochsReturnsInitialModel) {
  auto days = separable_days(5, 3, 3, 5);
  TrainConfig tc;
  tc.epochs = 0;
  tc.patience = 0;
  auto m = build(tiny(Variant::GAT_AGNN, Task::regression));
  auto r = train(m, days, days, tc);
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_EQ(encode_checkpoint(r.model), encode_checkpoint(m));
}

TEST(Train, DeterministicHistory) {
  auto days = separable_days(10, 3, 3, 6);
  TrainConfig tc;
  tc.epochs = 4;
  tc.patience = 4;
  auto a = train(build(tiny(Variant::GAT_AGNN, Task::regression)), days, days, tc);
  auto b = train(build(tiny(Variant::GAT_AGNN, Task::regression)), days, days, tc);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].train_loss, b.history[k].train_loss);
    EXPECT_EQ(a.history[k].val_loss, b.history[k].val_loss);
  }
  EXPECT_EQ(encode_checkpoint(a.model), encode_checkpoint(b.model));
}

TEST(Train, RestoresBestValidationParameters) {
  auto train_days = separable_days(12, 3, 3, 7);
  auto val_days = separable_days(3, 3, 3, 8);
  TrainConfig tc;
  tc.learning_rate = 0.05;
  tc.epochs = 12;
  tc.patience = 3;
  auto r = train(build(tiny(Variant::GRU_GAT, Task::regression)), train_days, val_days, tc);
  ASSERT_FALSE(r.history.empty());
  double best = r.history.front().val_loss;
  std::size_t best_epoch = 1;
  for (const auto& e : r.history)
    if (e.val_loss < best) best = e.val_loss, best_epoch = e.epoch;
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(split_loss(r.model, val_days), best);
  EXPECT_LE(r.history.size(), r.best_epoch + tc.patience);
}

TEST(Train, LossTrendsDownOnSeparableClasses) {
  auto days = separable_days(40, 4, 3, 9);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.epochs = 30;
  tc.patience = 0;
  auto r = train(build(tiny(Variant::GRU, Task::classification)), days, days, tc);
  ASSERT_EQ(r.history.size(), 30u);
  for (std::size_t k = 5; k < r.history.size(); ++k)
    EXPECT_LE(r.history[k].train_loss, r.history[k - 1].train_loss * 1.10) << "epoch " << k + 1;
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  EXPECT_GT(*evaluate(r.model, days).acc, 0.8);
}

TEST(Train, ConfigValidation) {
  auto days = separable_days(3, 3, 3, 10);
  auto m = build(tiny(Variant::GRU, Task::regression));
  TrainConfig tc;
  tc.patience = tc.epochs + 1;
  EXPECT_THROW(train(m, days, days, tc), ConfigError);
  tc = {};
  tc.learning_rate = 0;
  EXPECT_THROW(train(m, days, days, tc), ConfigError);
  tc = {};
  EXPECT_THROW(train(m, days, {}, tc), ContractError);
}

TEST(Train, DivergenceNamesEpochAndStep) {
  auto days = separable_days(3, 3, 3, 11);
  auto m = build(tiny(Variant::GRU, Task::regression));
  m.b_head.value[0] = std::numeric_limits<double>::infinity();
  TrainConfig tc;
  tc.epochs = 2;
  tc.patience = 1;
  try {
    train(m, days, days, tc);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}
