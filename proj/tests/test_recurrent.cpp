#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gatagnn/recurrent.hpp"
#include "gradcheck.hpp"

using namespace gatagnn;
using gatagnn::testing::max_grad_error;
using gatagnn::testing::random_tensor;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop GRU step, written independently of the tape.
std::vector<double> gru_oracle(const GruParams& p, const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t d = h.size(), f = x.size();
  auto lin = [&](const Parameter& W, const Parameter& U, const Parameter& b, const std::vector<double>& hh,
                 std::size_t k) {
    double s = b.value[k];
    for (std::size_t j = 0; j < f; ++j) s += W.value(k, j) * x[j];
    for (std::size_t j = 0; j < d; ++j) s += U.value(k, j) * hh[j];
    return s;
  };
  std::vector<double> r(d), rh(d), out(d);
  for (std::size_t k = 0; k < d; ++k) r[k] = sig(lin(p.W_r, p.U_r, p.b_r, h, k));
  for (std::size_t k = 0; k < d; ++k) rh[k] = r[k] * h[k];
  for (std::size_t k = 0; k < d; ++k) {
    const double z = sig(lin(p.W_z, p.U_z, p.b_z, h, k));
    const double c = std::tanh(lin(p.W_h, p.U_h, p.b_h, rh, k));
    out[k] = (1 - z) * h[k] + z * c;
  }
  return out;
}

GruParams random_gru(std::size_t d, std::size_t f, std::mt19937_64& rng) {
  GruParams p = GruParams::zeros(d, f);
  for (Parameter* q : p.parameters()) q->value = random_tensor(q->value.rows(), q->value.cols(), rng);
  return p;
}

LstmParams random_lstm(std::size_t d, std::size_t f, std::mt19937_64& rng) {
  LstmParams p = LstmParams::zeros(d, f);
  for (Parameter* q : p.parameters()) q->value = random_tensor(q->value.rows(), q->value.cols(), rng);
  return p;
}

}  // namespace

TEST(Gru, ZeroParamsZeroState) {
  auto p = GruParams::zeros(3, 5);
  auto h = gru_step(p, Tensor(1, 5, 0.7), Tensor(1, 3));
  for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

TEST(Gru, ZeroParamsHalvesState) {
  auto p = GruParams::zeros(3, 5);
  const Tensor v = Tensor::row({0.4, -1.0, 2.0});
  auto h = gru_step(p, Tensor(1, 5, 0.3), v);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(h[k], 0.5 * v[k]);
}

TEST(Gru, StepMatchesScalarOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_gru(4, 5, rng);
    auto x = random_tensor(1, 5, rng), h = random_tensor(1, 4, rng);
    auto got = gru_step(p, x, h);
    auto want = gru_oracle(p, x.values(), h.values());
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
  }
}

TEST(Gru, EncodeEqualsIteratedStep) {
  std::mt19937_64 rng(2);
  auto p = random_gru(4, 5, rng);
  auto w = random_tensor(3, 5, rng);
  Tensor h(1, 4);
  for (std::size_t k = 0; k < 3; ++k) h = gru_step(p, Tensor::row(w.row_span(k)), h);
  EXPECT_TRUE(gru_encode(p, w) == h);
  auto one = random_tensor(1, 5, rng);
  EXPECT_TRUE(gru_encode(p, one) == gru_step(p, one, Tensor(1, 4)));
}

TEST(Gru, ZeroWindowZeroBiasesIsFixedPoint) {
  std::mt19937_64 rng(3);
  auto p = random_gru(4, 5, rng);
  for (Parameter* b : {&p.b_z, &p.b_r, &p.b_h}) b->value.fill(0.0);
  const Tensor h = gru_encode(p, Tensor(6, 5));
  for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

TEST(Gru, ShapeErrors) {
  auto p = GruParams::zeros(3, 5);
  EXPECT_THROW(gru_step(p, Tensor(1, 4), Tensor(1, 3)), DimensionError);
  EXPECT_THROW(gru_step(p, Tensor(1, 5), Tensor(1, 2)), DimensionError);
  EXPECT_THROW(gru_encode(p, Tensor(0, 5)), ContractError);
}

TEST(Gru, EncodeGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (std::size_t T : {1u, 3u, 8u}) {
    auto p = random_gru(4, 5, rng);
    std::vector<Tensor> steps;
    for (std::size_t k = 0; k < T; ++k) steps.push_back(random_tensor(3, 5, rng));
    auto err = max_grad_error(p.parameters(), [&](Tape& t) { return sum(gru_encode(t, bind(t, p), steps)); });
    EXPECT_LT(err, 1e-4) << "T=" << T;
  }
}

TEST(Lstm, ZeroParamsZeroState) {
  auto p = LstmParams::zeros(3, 5);
  auto s = lstm_step(p, Tensor(1, 5, 0.2), {Tensor(1, 3), Tensor(1, 3)});
  for (double v : s.h.data()) EXPECT_EQ(v, 0.0);
  for (double v : s.c.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, ForgetBiasRetainsCell) {
  std::mt19937_64 rng(5);
  auto p = LstmParams::init(3, 5, rng);
  for (Parameter* u : {&p.U_i, &p.U_f, &p.U_o, &p.U_g}) u->value.fill(0.0);
  EXPECT_EQ(p.b_f.value[0], 1.0);
  const Tensor c = Tensor::row({1.0, -2.0, 0.5});
  auto s = lstm_step(p, Tensor(1, 5), {Tensor(1, 3), c});
  // Zero input, zero U: f = σ(1), i·g = 0.5·tanh(0) = 0.
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(s.c[k], sig(1.0) * c[k], 1e-15);
}

TEST(Lstm, EncodeEqualsIteratedStep) {
  std::mt19937_64 rng(6);
  auto p = random_lstm(4, 5, rng);
  auto w = random_tensor(4, 5, rng);
  LstmValues s{Tensor(1, 4), Tensor(1, 4)};
  for (std::size_t k = 0; k < 4; ++k) s = lstm_step(p, Tensor::row(w.row_span(k)), s);
  EXPECT_TRUE(lstm_encode(p, w) == s.h);
}

TEST(Lstm, EncodeGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  auto p = random_lstm(4, 5, rng);
  std::vector<Tensor> steps;
  for (std::size_t k = 0; k < 6; ++k) steps.push_back(random_tensor(3, 5, rng));
  auto err = max_grad_error(p.parameters(), [&](Tape& t) { return sum(lstm_encode(t, bind(t, p), steps)); });
  EXPECT_LT(err, 1e-4);
}

TEST(EncodePanel, SharedParametersAndShape) {
  std::mt19937_64 rng(8);
  for (auto kind : {EncoderKind::gru, EncoderKind::lstm}) {
    auto enc = Encoder::init(kind, 6, 5, rng);
    auto row = random_tensor(1, 5, rng);
    std::vector<Tensor> steps;
    for (int k = 0; k < 4; ++k) {
      Tensor x(3, 5);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t f = 0; f < 5; ++f) x(i, f) = row[f] * (k + 1);
      steps.push_back(x);
    }
    auto H = encode_panel(enc, steps);
    ASSERT_EQ(H.rows(), 3u);
    ASSERT_EQ(H.cols(), 6u);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_EQ(H(0, j), H(1, j));
      EXPECT_EQ(H(0, j), H(2, j));
    }
  }
}

TEST(EncodePanel, PermutationEquivariant) {
  std::mt19937_64 rng(9);
  auto enc = Encoder::init(EncoderKind::gru, 5, 5, rng);
  std::vector<Tensor> steps, permuted;
  const std::size_t perm[] = {2, 0, 3, 1};
  for (int k = 0; k < 5; ++k) {
    auto x = random_tensor(4, 5, rng);
    Tensor y(4, 5);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t f = 0; f < 5; ++f) y(i, f) = x(perm[i], f);
    steps.push_back(x);
    permuted.push_back(y);
  }
  auto H = encode_panel(enc, steps), P = encode_panel(enc, permuted);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(P(i, j), H(perm[i], j));
}

TEST(EncodePanel, BatchedRowEqualsSingleCompany) {
  std::mt19937_64 rng(10);
  auto enc = Encoder::init(EncoderKind::gru, 4, 5, rng);
  std::vector<Tensor> steps;
  for (int k = 0; k < 3; ++k) steps.push_back(random_tensor(3, 5, rng));
  auto H = encode_panel(enc, steps);
  Tensor w(3, 5);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t f = 0; f < 5; ++f) w(k, f) = steps[k](1, f);
  auto h1 = gru_encode(std::get<GruParams>(enc.params), w);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(H(1, j), h1[j], 1e-15);
}

TEST(EncodePanel, SingleCompanyIsDegenerate) {
  std::mt19937_64 rng(11);
  auto enc = Encoder::init(EncoderKind::gru, 4, 5, rng);
  std::vector<Tensor> steps{Tensor(1, 5)};
  EXPECT_THROW(encode_panel(enc, steps), DegenerateGraphError);
}

TEST(Init, OrthogonalRecurrentWeights) {
  std::mt19937_64 rng(12);
  auto U = orthogonal_init(6, rng);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b) {
      double s = 0;
      for (std::size_t k = 0; k < 6; ++k) s += U(a, k) * U(b, k);
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-12);
    }
}
