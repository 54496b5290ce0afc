#pragma once

// Pairwise company relations over the hidden states H (N×d).
//
//   GAT   U(i,j) = ELU(a_uᵀ W_u [h_i ∥ h_j])
//   AGNN  C(i,j) = α · cos(W_c h_i, W_c h_j)
//   Q = softmax over j ≠ i of U, G = softmax over j ≠ i of C
//   fuse  v_i = tanh( Σ_{j≠i} (Q(i,j) W_s h_j) ⊙ (G(i,j) W_v h_j) )
//
// Multi-head runs M independent heads of width d/M and concatenates them.
// The parameter-free Corr-Cos scorer swaps U and C for the Pearson
// correlation and cosine similarity of the raw hidden states.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gatagnn/autodiff.hpp"
#include "gatagnn/errors.hpp"
#include "gatagnn/recurrent.hpp"
#include "gatagnn/tensor.hpp"

namespace gatagnn {

enum class RelationKind {
  gat,       // Q only: v_i = tanh(Σ_{j≠i} Q(i,j) W_s h_j)
  gat_agnn,  // full fusion of Q and G
  corr_cos,  // fusion with Pearson/cosine weights
};

/// One attention head. Members a kind does not use stay empty (0×0).
struct RelationHeadParams {
  Parameter W_u;    // d×2d
  Parameter a_u;    // d×1
  Parameter W_c;    // d×d
  Parameter alpha;  // 1×1
  Parameter W_s;    // d_v×d
  Parameter W_v;    // d_v×d

  static RelationHeadParams init(RelationKind kind, std::size_t d, std::size_t d_v, std::size_t head, Rng& rng) {
    const std::string pre = "relation." + std::to_string(head) + ".";
    RelationHeadParams p;
    if (kind != RelationKind::corr_cos) {
      p.W_u = {pre + "W_u", uniform_init(d, 2 * d, d, rng)};
      p.a_u = {pre + "a_u", uniform_init(d, 1, d, rng)};
    }
    if (kind == RelationKind::gat_agnn) {
      p.W_c = {pre + "W_c", uniform_init(d, d, d, rng)};
      p.alpha = {pre + "alpha", Tensor(1, 1, 1.0)};
    }
    p.W_s = {pre + "W_s", uniform_init(d_v, d, d, rng)};
    if (kind != RelationKind::gat) p.W_v = {pre + "W_v", uniform_init(d_v, d, d, rng)};
    return p;
  }

  std::size_t out_width() const { return W_s.value.rows(); }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (Parameter* p : {&W_u, &a_u, &W_c, &alpha, &W_s, &W_v})
      if (!p->value.empty()) out.push_back(p);
    return out;
  }
};

/// Q̃ (GAT) and G̃ (AGNN or its parameter-free stand-in) for one head.
struct AttentionWeights {
  Tensor Q;
  Tensor G;
};

// ---------------------------------------------------------------------------
// Taped building blocks
// ---------------------------------------------------------------------------

namespace detail {
inline void require_graph(Var H) {
  if (H.rows() < 2)
    throw DegenerateGraphError("relation module needs at least 2 companies, got " + std::to_string(H.rows()));
}
}  // namespace detail

/// U(i,j) = ELU(a_uᵀ W_u [h_i ∥ h_j]). Linear in the concatenation, so it is
/// evaluated as ELU(w_left·h_i + w_right·h_j) with w = a_uᵀ W_u.
inline Var gat_scores(Var H, Var W_u, Var a_u) {
  detail::require_graph(H);
  const std::size_t d = H.cols();
  if (W_u.cols() != 2 * d || a_u.rows() != W_u.rows() || a_u.cols() != 1)
    throw DimensionError("gat_scores: W_u " + W_u.value().shape() + ", a_u " + a_u.value().shape() + " for d=" +
                         std::to_string(d));
  Var w = matmul(transpose(a_u), W_u);  // 1×2d
  Var left = matmul_nt(H, slice_cols(w, 0, d));       // N×1
  Var right = matmul_nt(slice_cols(w, d, 2 * d), H);  // 1×N
  return elu(add_outer(left, right));
}

/// C(i,j) = α · cos(W_c h_i, W_c h_j); zero-norm projections score 0.
inline Var agnn_scores(Var H, Var W_c, Var alpha) {
  detail::require_graph(H);
  if (W_c.cols() != H.cols()) throw DimensionError("agnn_scores: W_c " + W_c.value().shape() + " for H " + H.value().shape());
  Var unit = row_normalize(matmul_nt(H, W_c));
  return mul_scalar(alpha, matmul_nt(unit, unit));
}

/// Row i: softmax over j ≠ i, with an exact 0 on the diagonal.
inline Var normalize(Var scores) { return masked_softmax_diag(scores); }

/// Pearson correlation and cosine similarity matrices of the rows of H.
inline std::pair<Var, Var> corr_cos_scores(Var H) {
  detail::require_graph(H);
  if (H.cols() < 2) throw DimensionError("corr_cos_scores: hidden size must be >= 2");
  Var centered = row_normalize(row_center(H));
  Var unit = row_normalize(H);
  return {matmul_nt(centered, centered), matmul_nt(unit, unit)};
}

/// v_i = tanh(Σ_{j≠i} (Q(i,j) W_s h_j) ⊙ (G(i,j) W_v h_j)). Since Q(i,j) and
/// G(i,j) are scalars this is tanh((Q ⊙ G) · ((H W_sᵀ) ⊙ (H W_vᵀ))); the zero
/// diagonal of Q and G removes the j = i term.
inline Var fuse(Var H, Var Q, Var G, Var W_s, Var W_v) {
  if (W_s.cols() != H.cols() || !W_s.value().same_shape(W_v.value()))
    throw DimensionError("fuse: W_s " + W_s.value().shape() + ", W_v " + W_v.value().shape() + " for H " +
                         H.value().shape());
  Var msg = hadamard(matmul_nt(H, W_s), matmul_nt(H, W_v));
  return tanh(matmul(hadamard(Q, G), msg));
}

/// GAT-only aggregation used by the GRU+GAT / LSTM+GAT baselines.
inline Var gat_aggregate(Var H, Var Q, Var W_s) { return tanh(matmul(Q, matmul_nt(H, W_s))); }

struct RelationGraph {
  Var V;
  std::vector<Var> Q;
  std::vector<Var> G;  // empty for RelationKind::gat
};

/// Runs every head on H and concatenates the head outputs.
inline RelationGraph relation_forward(Tape& t, RelationKind kind, Var H, std::vector<RelationHeadParams>& heads,
                                      bool trainable = true) {
  if (heads.empty()) throw ConfigError("relation module needs at least one head");
  detail::require_graph(H);
  auto leaf = [&](Parameter& p) { return trainable ? t.param(p) : t.constant(p.value); };
  RelationGraph out;
  std::vector<Var> parts;
  std::pair<Var, Var> corr_cos;
  if (kind == RelationKind::corr_cos) {
    auto [corr, cos] = corr_cos_scores(H);
    corr_cos = {normalize(corr), normalize(cos)};
  }
  for (auto& head : heads) {
    Var Q, G, v;
    switch (kind) {
      case RelationKind::gat:
        Q = normalize(gat_scores(H, leaf(head.W_u), leaf(head.a_u)));
        v = gat_aggregate(H, Q, leaf(head.W_s));
        break;
      case RelationKind::gat_agnn:
        Q = normalize(gat_scores(H, leaf(head.W_u), leaf(head.a_u)));
        G = normalize(agnn_scores(H, leaf(head.W_c), leaf(head.alpha)));
        v = fuse(H, Q, G, leaf(head.W_s), leaf(head.W_v));
        break;
      case RelationKind::corr_cos:
        Q = corr_cos.first;
        G = corr_cos.second;
        v = fuse(H, Q, G, leaf(head.W_s), leaf(head.W_v));
        break;
    }
    out.Q.push_back(Q);
    if (kind != RelationKind::gat) out.G.push_back(G);
    parts.push_back(v);
  }
  out.V = parts.size() == 1 ? parts.front() : concat_cols(parts);
  return out;
}

// ---------------------------------------------------------------------------
// Plain value API
// ---------------------------------------------------------------------------

inline Tensor gat_scores(const Tensor& H, const RelationHeadParams& p) {
  Tape t;
  return gat_scores(t.constant(H), t.constant(p.W_u.value), t.constant(p.a_u.value)).value();
}

inline Tensor agnn_scores(const Tensor& H, const RelationHeadParams& p) {
  Tape t;
  return agnn_scores(t.constant(H), t.constant(p.W_c.value), t.constant(p.alpha.value)).value();
}

inline Tensor normalize(const Tensor& scores) {
  Tape t;
  return normalize(t.constant(scores)).value();
}

/// Raw (unnormalized) correlation and cosine matrices.
inline std::pair<Tensor, Tensor> corr_cos_scores(const Tensor& H) {
  Tape t;
  auto [corr, cos] = corr_cos_scores(t.constant(H));
  return {corr.value(), cos.value()};
}

inline AttentionWeights attention_weights(const Tensor& H, const RelationHeadParams& p) {
  return {normalize(gat_scores(H, p)), normalize(agnn_scores(H, p))};
}

/// Single-head fusion (N × d_v).
inline Tensor fuse(const Tensor& H, const AttentionWeights& w, const RelationHeadParams& p) {
  Tape t;
  return fuse(t.constant(H), t.constant(w.Q), t.constant(w.G), t.constant(p.W_s.value), t.constant(p.W_v.value))
      .value();
}

/// GAT-AGNN multi-head output (N × M·d_v).
inline Tensor multi_head_fuse(const Tensor& H, std::vector<RelationHeadParams> heads) {
  if (heads.empty()) throw ConfigError("multi_head_fuse: M must be >= 1");
  Tape t;
  return relation_forward(t, RelationKind::gat_agnn, t.constant(H), heads, false).V.value();
}

/// Checks the M·d_v = d layout; throws ConfigError otherwise.
inline std::size_t head_width(std::size_t d, std::size_t heads) {
  if (heads == 0) throw ConfigError("number of heads must be >= 1");
  if (d % heads != 0)
    throw ConfigError("hidden size " + std::to_string(d) + " is not divisible by " + std::to_string(heads) + " heads");
  return d / heads;
}

}  // namespace gatagnn
