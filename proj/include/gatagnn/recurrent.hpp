#pragma once

// GRU and LSTM sequence encoders. One encoder is shared by every company; the
// taped versions run all N companies of a day as the rows of one batch.

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "gatagnn/autodiff.hpp"
#include "gatagnn/errors.hpp"
#include "gatagnn/tensor.hpp"

namespace gatagnn {

using Rng = std::mt19937_64;

/// uniform(−1/√fan, 1/√fan) entries.
inline Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

/// Random orthogonal square matrix (Gram-Schmidt on uniform rows).
inline Tensor orthogonal_init(std::size_t n, Rng& rng) {
  for (;;) {
    Tensor t = uniform_init(n, n, n, rng);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      auto ri = t.row_span(i);
      for (std::size_t k = 0; k < i; ++k) {
        auto rk = t.row_span(k);
        const double proj = detail::dot(ri, rk);
        for (std::size_t j = 0; j < n; ++j) ri[j] -= proj * rk[j];
      }
      const double norm = std::sqrt(detail::dot(ri, ri));
      if (norm < 1e-8) {
        ok = false;
        break;
      }
      for (double& v : ri) v /= norm;
    }
    if (ok) return t;
  }
}

/// z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
/// h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 − z) ⊙ h + z ⊙ h̃.
struct GruParams {
  Parameter W_z, W_r, W_h;  // d×F
  Parameter U_z, U_r, U_h;  // d×d
  Parameter b_z, b_r, b_h;  // 1×d

  static GruParams init(std::size_t d, std::size_t f, Rng& rng) {
    GruParams p;
    p.W_z = {"gru.W_z", uniform_init(d, f, d, rng)};
    p.W_r = {"gru.W_r", uniform_init(d, f, d, rng)};
    p.W_h = {"gru.W_h", uniform_init(d, f, d, rng)};
    p.U_z = {"gru.U_z", orthogonal_init(d, rng)};
    p.U_r = {"gru.U_r", orthogonal_init(d, rng)};
    p.U_h = {"gru.U_h", orthogonal_init(d, rng)};
    p.b_z = {"gru.b_z", Tensor(1, d)};
    p.b_r = {"gru.b_r", Tensor(1, d)};
    p.b_h = {"gru.b_h", Tensor(1, d)};
    return p;
  }
  /// All-zero parameters of the given shape.
  static GruParams zeros(std::size_t d, std::size_t f) {
    GruParams p;
    for (auto [ptr, name, r, c] : {std::tuple{&p.W_z, "gru.W_z", d, f}, {&p.W_r, "gru.W_r", d, f},
                                   {&p.W_h, "gru.W_h", d, f}, {&p.U_z, "gru.U_z", d, d},
                                   {&p.U_r, "gru.U_r", d, d}, {&p.U_h, "gru.U_h", d, d},
                                   {&p.b_z, "gru.b_z", std::size_t{1}, d}, {&p.b_r, "gru.b_r", std::size_t{1}, d},
                                   {&p.b_h, "gru.b_h", std::size_t{1}, d}})
      *ptr = {name, Tensor(r, c)};
    return p;
  }

  std::size_t hidden() const { return U_z.value.rows(); }
  std::size_t inputs() const { return W_z.value.cols(); }
  std::vector<Parameter*> parameters() { return {&W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &b_z, &b_r, &b_h}; }
};

/// Standard LSTM: i, f, o gates (sigmoid), g candidate (tanh),
/// c' = f ⊙ c + i ⊙ g, h' = o ⊙ tanh(c'). Forget bias starts at +1.
struct LstmParams {
  Parameter W_i, W_f, W_o, W_g;  // d×F
  Parameter U_i, U_f, U_o, U_g;  // d×d
  Parameter b_i, b_f, b_o, b_g;  // 1×d

  static LstmParams init(std::size_t d, std::size_t f, Rng& rng) {
    LstmParams p;
    p.W_i = {"lstm.W_i", uniform_init(d, f, d, rng)};
    p.W_f = {"lstm.W_f", uniform_init(d, f, d, rng)};
    p.W_o = {"lstm.W_o", uniform_init(d, f, d, rng)};
    p.W_g = {"lstm.W_g", uniform_init(d, f, d, rng)};
    p.U_i = {"lstm.U_i", orthogonal_init(d, rng)};
    p.U_f = {"lstm.U_f", orthogonal_init(d, rng)};
    p.U_o = {"lstm.U_o", orthogonal_init(d, rng)};
    p.U_g = {"lstm.U_g", orthogonal_init(d, rng)};
    p.b_i = {"lstm.b_i", Tensor(1, d)};
    p.b_f = {"lstm.b_f", Tensor(1, d, 1.0)};
    p.b_o = {"lstm.b_o", Tensor(1, d)};
    p.b_g = {"lstm.b_g", Tensor(1, d)};
    return p;
  }
  static LstmParams zeros(std::size_t d, std::size_t f) {
    LstmParams p;
    const char* w[] = {"lstm.W_i", "lstm.W_f", "lstm.W_o", "lstm.W_g"};
    const char* u[] = {"lstm.U_i", "lstm.U_f", "lstm.U_o", "lstm.U_g"};
    const char* b[] = {"lstm.b_i", "lstm.b_f", "lstm.b_o", "lstm.b_g"};
    Parameter* ws[] = {&p.W_i, &p.W_f, &p.W_o, &p.W_g};
    Parameter* us[] = {&p.U_i, &p.U_f, &p.U_o, &p.U_g};
    Parameter* bs[] = {&p.b_i, &p.b_f, &p.b_o, &p.b_g};
    for (int k = 0; k < 4; ++k) {
      *ws[k] = {w[k], Tensor(d, f)};
      *us[k] = {u[k], Tensor(d, d)};
      *bs[k] = {b[k], Tensor(1, d)};
    }
    return p;
  }

  std::size_t hidden() const { return U_i.value.rows(); }
  std::size_t inputs() const { return W_i.value.cols(); }
  std::vector<Parameter*> parameters() {
    return {&W_i, &W_f, &W_o, &W_g, &U_i, &U_f, &U_o, &U_g, &b_i, &b_f, &b_o, &b_g};
  }
};

// ---------------------------------------------------------------------------
// Taped encoders
// ---------------------------------------------------------------------------

/// Parameter leaves of one encoder on a tape.
struct GruVars {
  Var W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h;
};
struct LstmVars {
  Var W_i, W_f, W_o, W_g, U_i, U_f, U_o, U_g, b_i, b_f, b_o, b_g;
};

inline GruVars bind(Tape& t, GruParams& p) {
  return {t.param(p.W_z), t.param(p.W_r), t.param(p.W_h), t.param(p.U_z), t.param(p.U_r),
          t.param(p.U_h), t.param(p.b_z), t.param(p.b_r), t.param(p.b_h)};
}
inline LstmVars bind(Tape& t, LstmParams& p) {
  return {t.param(p.W_i), t.param(p.W_f), t.param(p.W_o), t.param(p.W_g), t.param(p.U_i), t.param(p.U_f),
          t.param(p.U_o), t.param(p.U_g), t.param(p.b_i), t.param(p.b_f), t.param(p.b_o), t.param(p.b_g)};
}
/// Same as bind but as constants: nothing flows back into the parameters.
inline GruVars bind_const(Tape& t, const GruParams& p) {
  return {t.constant(p.W_z.value), t.constant(p.W_r.value), t.constant(p.W_h.value),
          t.constant(p.U_z.value), t.constant(p.U_r.value), t.constant(p.U_h.value),
          t.constant(p.b_z.value), t.constant(p.b_r.value), t.constant(p.b_h.value)};
}
inline LstmVars bind_const(Tape& t, const LstmParams& p) {
  return {t.constant(p.W_i.value), t.constant(p.W_f.value), t.constant(p.W_o.value), t.constant(p.W_g.value),
          t.constant(p.U_i.value), t.constant(p.U_f.value), t.constant(p.U_o.value), t.constant(p.U_g.value),
          t.constant(p.b_i.value), t.constant(p.b_f.value), t.constant(p.b_o.value), t.constant(p.b_g.value)};
}

namespace detail {
inline Var gate(Var x, Var h, Var W, Var U, Var b) { return add_row(add(matmul_nt(x, W), matmul_nt(h, U)), b); }

inline void check_step_shapes(const Tensor& x, const Tensor& h, std::size_t f, std::size_t d) {
  if (x.cols() != f) throw DimensionError("recurrent step: input width " + std::to_string(x.cols()) + ", expected " + std::to_string(f));
  if (h.cols() != d) throw DimensionError("recurrent step: state width " + std::to_string(h.cols()) + ", expected " + std::to_string(d));
  if (x.rows() != h.rows()) throw DimensionError("recurrent step: batch mismatch " + x.shape() + " vs " + h.shape());
}
}  // namespace detail

/// One GRU step for a batch: x is B×F, h is B×d.
inline Var gru_step(const GruVars& p, Var x, Var h) {
  detail::check_step_shapes(x.value(), h.value(), p.W_z.cols(), p.U_z.rows());
  Var z = sigmoid(detail::gate(x, h, p.W_z, p.U_z, p.b_z));
  Var r = sigmoid(detail::gate(x, h, p.W_r, p.U_r, p.b_r));
  Var cand = tanh(detail::gate(x, hadamard(r, h), p.W_h, p.U_h, p.b_h));
  return add(h, hadamard(z, sub(cand, h)));
}

struct LstmState {
  Var h;
  Var c;
};

inline LstmState lstm_step(const LstmVars& p, Var x, LstmState s) {
  detail::check_step_shapes(x.value(), s.h.value(), p.W_i.cols(), p.U_i.rows());
  Var i = sigmoid(detail::gate(x, s.h, p.W_i, p.U_i, p.b_i));
  Var f = sigmoid(detail::gate(x, s.h, p.W_f, p.U_f, p.b_f));
  Var o = sigmoid(detail::gate(x, s.h, p.W_o, p.U_o, p.b_o));
  Var g = tanh(detail::gate(x, s.h, p.W_g, p.U_g, p.b_g));
  Var c = add(hadamard(f, s.c), hadamard(i, g));
  return {hadamard(o, tanh(c)), c};
}

/// Folds gru_step over the window from a zero state; steps[k] is B×F.
inline Var gru_encode(Tape& t, const GruVars& p, std::span<const Tensor> steps) {
  if (steps.empty()) throw ContractError("gru_encode: empty window");
  Var h = t.constant(Tensor(steps.front().rows(), p.U_z.rows()));
  for (const Tensor& x : steps) h = gru_step(p, t.constant(x), h);
  return h;
}

inline Var lstm_encode(Tape& t, const LstmVars& p, std::span<const Tensor> steps) {
  if (steps.empty()) throw ContractError("lstm_encode: empty window");
  const Tensor zero(steps.front().rows(), p.U_i.rows());
  LstmState s{t.constant(zero), t.constant(zero)};
  for (const Tensor& x : steps) s = lstm_step(p, t.constant(x), s);
  return s.h;
}

// ---------------------------------------------------------------------------
// Encoder selection
// ---------------------------------------------------------------------------

enum class EncoderKind { gru, lstm };

/// The recurrent encoder shared by all companies.
struct Encoder {
  std::variant<GruParams, LstmParams> params;

  static Encoder init(EncoderKind kind, std::size_t d, std::size_t f, Rng& rng) {
    if (kind == EncoderKind::gru) return {GruParams::init(d, f, rng)};
    return {LstmParams::init(d, f, rng)};
  }
  EncoderKind kind() const { return params.index() == 0 ? EncoderKind::gru : EncoderKind::lstm; }
  std::size_t hidden() const {
    return std::visit([](const auto& p) { return p.hidden(); }, params);
  }
  std::vector<Parameter*> parameters() {
    return std::visit([](auto& p) { return p.parameters(); }, params);
  }
};

/// Batched encoding on a tape; row i of the result is company i's h.
inline Var encode(Tape& t, Encoder& enc, std::span<const Tensor> steps, bool trainable = true) {
  if (auto* g = std::get_if<GruParams>(&enc.params))
    return gru_encode(t, trainable ? bind(t, *g) : bind_const(t, *g), steps);
  auto& l = std::get<LstmParams>(enc.params);
  return lstm_encode(t, trainable ? bind(t, l) : bind_const(t, l), steps);
}

// ---------------------------------------------------------------------------
// Plain value API
// ---------------------------------------------------------------------------

/// One GRU step on vectors (1×F input, 1×d state).
inline Tensor gru_step(const GruParams& p, const Tensor& x, const Tensor& h) {
  Tape t;
  return gru_step(bind_const(t, p), t.constant(x), t.constant(h)).value();
}

/// Final hidden state (1×d) for one company's T×F window.
inline Tensor gru_encode(const GruParams& p, const Tensor& window) {
  if (window.rows() == 0) throw ContractError("gru_encode: empty window");
  Tape t;
  const GruVars v = bind_const(t, p);
  Var h = t.constant(Tensor(1, p.hidden()));
  for (std::size_t k = 0; k < window.rows(); ++k) h = gru_step(v, t.constant(Tensor::row(window.row_span(k))), h);
  return h.value();
}

struct LstmValues {
  Tensor h;
  Tensor c;
};

inline LstmValues lstm_step(const LstmParams& p, const Tensor& x, const LstmValues& s) {
  Tape t;
  auto out = lstm_step(bind_const(t, p), t.constant(x), {t.constant(s.h), t.constant(s.c)});
  return {out.h.value(), out.c.value()};
}

inline Tensor lstm_encode(const LstmParams& p, const Tensor& window) {
  if (window.rows() == 0) throw ContractError("lstm_encode: empty window");
  LstmValues s{Tensor(1, p.hidden()), Tensor(1, p.hidden())};
  for (std::size_t k = 0; k < window.rows(); ++k) s = lstm_step(p, Tensor::row(window.row_span(k)), s);
  return s.h;
}

/// HiddenStates for one day: N×d with row i encoding company i's window.
inline Tensor encode_panel(const Encoder& enc, std::span<const Tensor> steps) {
  if (steps.empty()) throw ContractError("encode_panel: empty window");
  if (steps.front().rows() < 2)
    throw DegenerateGraphError("encode_panel needs at least 2 companies, got " + std::to_string(steps.front().rows()));
  Tape t;
  Encoder copy = enc;
  return encode(t, copy, steps, false).value();
}

}  // namespace gatagnn
