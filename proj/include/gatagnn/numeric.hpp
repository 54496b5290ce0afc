#pragma once

// Plain (non-taped) numeric helpers on vectors.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gatagnn/autodiff.hpp"
#include "gatagnn/errors.hpp"
#include "gatagnn/tensor.hpp"

namespace gatagnn {

struct CosineResult {
  double value = 0.0;
  /// Set when either input had (near) zero norm; value is then 0.
  bool degenerate = false;
};

inline CosineResult cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("cosine_sim: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  const double na = std::sqrt(detail::dot(a, a));
  const double nb = std::sqrt(detail::dot(b, b));
  if (na <= kNormEpsilon || nb <= kNormEpsilon) return {0.0, true};
  return {detail::dot(a, b) / (na * nb), false};
}

/// Pearson correlation; 0 when either input has zero variance.
inline double pearson_corr(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionError("pearson_corr: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.size() < 2) throw DimensionError("pearson_corr: need at least 2 entries");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  std::vector<double> ca(a.size()), cb(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[i] = a[i] - ma;
    cb[i] = b[i] - mb;
  }
  return cosine_sim(ca, cb).value;
}

/// Softmax over all entries except `excluded`, which is set to exactly 0.
inline std::vector<double> masked_softmax_row(std::span<const double> scores, std::size_t excluded) {
  if (scores.size() < 2)
    throw DegenerateGraphError("masked softmax over " + std::to_string(scores.size()) + " entries");
  if (excluded >= scores.size()) throw DimensionError("masked_softmax_row: excluded index out of range");
  std::vector<double> out(scores.size());
  detail::softmax_row(scores, out, excluded);
  return out;
}

/// Horizontal concatenation of row vectors.
inline Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty part list");
  std::vector<double> out;
  for (const Tensor& p : parts) {
    if (p.rows() != 1) throw DimensionError("concat_rows: part is " + p.shape() + ", expected a row");
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t n = out.size();
  return Tensor(1, n, std::move(out));
}

}  // namespace gatagnn
