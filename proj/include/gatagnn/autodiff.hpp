#pragma once

// Tape-based reverse-mode differentiation over dense 2-D tensors.
//
// A Tape records nodes in creation order, which is already a topological
// order: every op only refers to nodes created before it. backward() walks
// the tape once in reverse. Node storage is recycled across clear() calls so
// a training loop that rebuilds the same graph every step stops allocating
// after the first step.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gatagnn/errors.hpp"
#include "gatagnn/tensor.hpp"

namespace gatagnn {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() {
    if (!grad.same_shape(value)) grad.reset(value.rows(), value.cols());
    grad.fill(0.0);
  }
};

enum class OpKind : std::uint8_t {
  Constant,
  Param,
  MatMul,
  MatMulNT,
  Transpose,
  Add,
  Sub,
  Hadamard,
  Affine,
  AddRow,
  AddOuter,
  MulScalar,
  Tanh,
  Sigmoid,
  Relu,
  Elu,
  MaskedSoftmaxRows,
  SoftmaxRows,
  RowNormalize,
  RowCenter,
  ConcatCols,
  SliceCols,
  Sum,
  Mean,
  MseLoss,
  CrossEntropy,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Constant: return "constant";
    case OpKind::Param: return "param";
    case OpKind::MatMul: return "matmul";
    case OpKind::MatMulNT: return "matmul_nt";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::Affine: return "affine";
    case OpKind::AddRow: return "add_row";
    case OpKind::AddOuter: return "add_outer";
    case OpKind::MulScalar: return "mul_scalar";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Relu: return "relu";
    case OpKind::Elu: return "elu";
    case OpKind::MaskedSoftmaxRows: return "masked_softmax_rows";
    case OpKind::SoftmaxRows: return "softmax_rows";
    case OpKind::RowNormalize: return "row_normalize";
    case OpKind::RowCenter: return "row_center";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::SliceCols: return "slice_cols";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::MseLoss: return "mse_loss";
    case OpKind::CrossEntropy: return "cross_entropy";
  }
  return "?";
}

enum class Activation : std::uint8_t { tanh, sigmoid, relu, elu };
enum class EwKind : std::uint8_t { add, hadamard };

/// Norms at or below this are treated as zero by cosine/correlation code.
inline constexpr double kNormEpsilon = 1e-12;
/// Probability floor inside cross-entropy.
inline constexpr double kProbClamp = 1e-12;
/// Sentinel for "no excluded entry" in a masked softmax row.
inline constexpr std::size_t kNoExclusion = std::numeric_limits<std::size_t>::max();

namespace detail {

/// Stabilized softmax of one row; the excluded entry (if any) is exactly 0.
inline void softmax_row(std::span<const double> in, std::span<double> out, std::size_t excluded) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < in.size(); ++j)
    if (j != excluded) mx = std::max(mx, in[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = j == excluded ? 0.0 : std::exp(in[j] - mx);
    total += out[j];
  }
  for (double& v : out) v /= total;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

struct TapeNode {
  OpKind op = OpKind::Constant;
  int a = -1;
  int b = -1;
  double scalar0 = 0.0;
  double scalar1 = 0.0;
  bool needs_grad = false;
  std::vector<int> inputs;          // ConcatCols operands
  std::vector<std::size_t> index;   // excluded columns, slice bounds, class labels
  Tensor value;
  Tensor grad;
  Parameter* param = nullptr;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Forget all nodes but keep their storage for reuse.
  void clear() noexcept { size_ = 0; }
  std::size_t size() const noexcept { return size_; }
  const TapeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  Var constant(const Tensor& t) {
    auto [v, n] = push(OpKind::Constant, -1, -1, false);
    n.value = t;
    check_finite(n);
    return v;
  }
  Var param(Parameter& p) {
    auto [v, n] = push(OpKind::Param, -1, -1, true);
    n.value = p.value;
    n.param = &p;
    check_finite(n);
    return v;
  }

  /// Accumulate d(loss)/d(param) into every Parameter reachable from loss.
  void backward(Var loss) {
    const TapeNode& root = node(loss.id);
    if (root.value.rows() != 1 || root.value.cols() != 1)
      throw ContractError("backward: loss must be 1x1, got " + root.value.shape());
    const auto last = static_cast<std::size_t>(loss.id);
    for (std::size_t i = 0; i <= last; ++i) {
      TapeNode& n = nodes_[i];
      if (n.needs_grad) n.grad.reset(n.value.rows(), n.value.cols());
    }
    if (!root.needs_grad) return;
    nodes_[last].grad[0] = 1.0;
    for (std::size_t i = last + 1; i-- > 0;) {
      TapeNode& n = nodes_[i];
      if (n.needs_grad) propagate(n);
    }
  }

  // Internal: used by the op free functions.
  std::pair<Var, TapeNode&> push(OpKind op, int a, int b, bool needs_grad) {
    if (size_ == nodes_.size()) nodes_.emplace_back();
    TapeNode& n = nodes_[size_];
    n.op = op;
    n.a = a;
    n.b = b;
    n.scalar0 = n.scalar1 = 0.0;
    n.needs_grad = needs_grad;
    n.inputs.clear();
    n.index.clear();
    n.param = nullptr;
    Var v{this, static_cast<int>(size_)};
    ++size_;
    return {v, n};
  }
  TapeNode& mut(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  static void check_finite(const TapeNode& n) {
    if (!n.value.all_finite())
      throw NumericError(std::string("non-finite value produced by ") + op_name(n.op) +
                         (n.param ? " (" + n.param->name + ")" : std::string()));
  }

 private:
  void propagate(TapeNode& n);

  std::deque<TapeNode> nodes_;  // deque: references stay valid while pushing
  std::size_t size_ = 0;
};

inline const Tensor& Var::value() const { return tape->node(id).value; }
inline const Tensor& Var::grad() const { return tape->node(id).grad; }

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace detail {

inline Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) throw ContractError("operands live on different tapes");
  return *a.tape;
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
}

inline bool any_grad(Tape& t, int a, int b = -1) {
  return t.node(a).needs_grad || (b >= 0 && t.node(b).needs_grad);
}

}  // namespace detail

/// a (m×k) · b (k×n).
inline Var matmul(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows())
    throw DimensionError("matmul: shape mismatch " + A.shape() + " x " + B.shape());
  auto [v, n] = t.push(OpKind::MatMul, a.id, b.id, detail::any_grad(t, a.id, b.id));
  const std::size_t m = A.rows(), k = A.cols(), p = B.cols();
  n.value.reset(m, p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = A(i, l);
      for (std::size_t j = 0; j < p; ++j) n.value(i, j) += ail * B(l, j);
    }
  Tape::check_finite(n);
  return v;
}

/// a (m×k) · bᵀ where b is n×k.
inline Var matmul_nt(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.cols())
    throw DimensionError("matmul_nt: shape mismatch " + A.shape() + " x (" + B.shape() + ")^T");
  auto [v, n] = t.push(OpKind::MatMulNT, a.id, b.id, detail::any_grad(t, a.id, b.id));
  const std::size_t m = A.rows(), p = B.rows();
  n.value.reset(m, p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) n.value(i, j) = detail::dot(A.row_span(i), B.row_span(j));
  Tape::check_finite(n);
  return v;
}

inline Var transpose(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  auto [v, n] = t.push(OpKind::Transpose, a.id, -1, detail::any_grad(t, a.id));
  n.value.reset(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) n.value(j, i) = A(i, j);
  return v;
}

/// Element-wise binary op on equal shapes.
inline Var ew(Var a, Var b, EwKind kind) {
  Tape& t = detail::same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  detail::require_same_shape(kind == EwKind::add ? "add" : "hadamard", A, B);
  const OpKind op = kind == EwKind::add ? OpKind::Add : OpKind::Hadamard;
  auto [v, n] = t.push(op, a.id, b.id, detail::any_grad(t, a.id, b.id));
  n.value.reset(A.rows(), A.cols());
  if (kind == EwKind::add)
    for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = A[i] + B[i];
  else
    for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = A[i] * B[i];
  Tape::check_finite(n);
  return v;
}
inline Var add(Var a, Var b) { return ew(a, b, EwKind::add); }
inline Var hadamard(Var a, Var b) { return ew(a, b, EwKind::hadamard); }

inline Var sub(Var a, Var b) {
  Tape& t = detail::same_tape(a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  auto [v, n] = t.push(OpKind::Sub, a.id, b.id, detail::any_grad(t, a.id, b.id));
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = A[i] - B[i];
  Tape::check_finite(n);
  return v;
}

/// mul·a + shift, element-wise.
inline Var affine(Var a, double mul, double shift = 0.0) {
  Tape& t = *a.tape;
  auto [v, n] = t.push(OpKind::Affine, a.id, -1, detail::any_grad(t, a.id));
  n.scalar0 = mul;
  n.scalar1 = shift;
  const Tensor& A = a.value();
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = mul * A[i] + shift;
  Tape::check_finite(n);
  return v;
}

/// a (m×k) + r (1×k) broadcast over rows.
inline Var add_row(Var a, Var r) {
  Tape& t = detail::same_tape(a, r);
  const Tensor& A = a.value();
  const Tensor& R = r.value();
  if (R.rows() != 1 || R.cols() != A.cols())
    throw DimensionError("add_row: cannot broadcast " + R.shape() + " over " + A.shape());
  auto [v, n] = t.push(OpKind::AddRow, a.id, r.id, detail::any_grad(t, a.id, r.id));
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) n.value(i, j) = A(i, j) + R[j];
  Tape::check_finite(n);
  return v;
}

/// out(i, j) = col(i) + row(j) for col m×1 and row 1×n.
inline Var add_outer(Var col, Var row) {
  Tape& t = detail::same_tape(col, row);
  const Tensor& C = col.value();
  const Tensor& R = row.value();
  if (C.cols() != 1 || R.rows() != 1)
    throw DimensionError("add_outer: expected column and row, got " + C.shape() + " and " + R.shape());
  auto [v, n] = t.push(OpKind::AddOuter, col.id, row.id, detail::any_grad(t, col.id, row.id));
  n.value.reset(C.rows(), R.cols());
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < R.cols(); ++j) n.value(i, j) = C[i] + R[j];
  Tape::check_finite(n);
  return v;
}

/// s (1×1) times every entry of a.
inline Var mul_scalar(Var s, Var a) {
  Tape& t = detail::same_tape(s, a);
  if (s.value().size() != 1) throw DimensionError("mul_scalar: scalar operand is " + s.value().shape());
  auto [v, n] = t.push(OpKind::MulScalar, s.id, a.id, detail::any_grad(t, s.id, a.id));
  const double k = s.value()[0];
  const Tensor& A = a.value();
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] = k * A[i];
  Tape::check_finite(n);
  return v;
}

inline Var activation(Var a, Activation kind) {
  Tape& t = *a.tape;
  OpKind op = OpKind::Tanh;
  switch (kind) {
    case Activation::tanh: op = OpKind::Tanh; break;
    case Activation::sigmoid: op = OpKind::Sigmoid; break;
    case Activation::relu: op = OpKind::Relu; break;
    case Activation::elu: op = OpKind::Elu; break;
  }
  auto [v, n] = t.push(op, a.id, -1, detail::any_grad(t, a.id));
  const Tensor& A = a.value();
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double x = A[i];
    switch (kind) {
      case Activation::tanh: n.value[i] = std::tanh(x); break;
      case Activation::sigmoid:
        n.value[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        break;
      case Activation::relu: n.value[i] = x > 0 ? x : 0.0; break;
      case Activation::elu: n.value[i] = x >= 0 ? x : std::expm1(x); break;
    }
  }
  Tape::check_finite(n);
  return v;
}
inline Var tanh(Var a) { return activation(a, Activation::tanh); }
inline Var sigmoid(Var a) { return activation(a, Activation::sigmoid); }
inline Var relu(Var a) { return activation(a, Activation::relu); }
inline Var elu(Var a) { return activation(a, Activation::elu); }

/// Row-wise softmax where row i ignores column excluded[i] (output exactly 0
/// there). Use kNoExclusion for a plain row.
inline Var masked_softmax_rows(Var a, std::span<const std::size_t> excluded) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (excluded.size() != A.rows())
    throw DimensionError("masked_softmax_rows: " + std::to_string(excluded.size()) +
                         " exclusions for " + std::to_string(A.rows()) + " rows");
  for (std::size_t e : excluded) {
    if (e == kNoExclusion) continue;
    if (A.cols() < 2)
      throw DegenerateGraphError("masked softmax needs at least 2 entries per row, got " +
                                 std::to_string(A.cols()));
    if (e >= A.cols()) throw DimensionError("masked_softmax_rows: excluded index out of range");
  }
  auto [v, n] = t.push(OpKind::MaskedSoftmaxRows, a.id, -1, detail::any_grad(t, a.id));
  n.index.assign(excluded.begin(), excluded.end());
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) detail::softmax_row(A.row_span(i), n.value.row_span(i), excluded[i]);
  Tape::check_finite(n);
  return v;
}

/// Normalize each row of an N×N score matrix with the diagonal excluded.
inline Var masked_softmax_diag(Var scores) {
  const std::size_t n = scores.rows();
  if (scores.cols() != n) throw DimensionError("masked_softmax_diag: not square " + scores.value().shape());
  if (n < 2) throw DegenerateGraphError("attention needs at least 2 companies, got " + std::to_string(n));
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = i;
  return masked_softmax_rows(scores, diag);
}

inline Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  auto [v, n] = t.push(OpKind::SoftmaxRows, a.id, -1, detail::any_grad(t, a.id));
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) detail::softmax_row(A.row_span(i), n.value.row_span(i), kNoExclusion);
  Tape::check_finite(n);
  return v;
}

/// Each row divided by its L2 norm; rows with norm ≤ kNormEpsilon become 0
/// and pass no gradient.
inline Var row_normalize(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  auto [v, n] = t.push(OpKind::RowNormalize, a.id, -1, detail::any_grad(t, a.id));
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto x = A.row_span(i);
    const double norm = std::sqrt(detail::dot(x, x));
    if (norm <= kNormEpsilon) continue;
    auto y = n.value.row_span(i);
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] / norm;
  }
  Tape::check_finite(n);
  return v;
}

/// Subtract each row's mean.
inline Var row_center(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  auto [v, n] = t.push(OpKind::RowCenter, a.id, -1, detail::any_grad(t, a.id));
  n.value.reset(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto x = A.row_span(i);
    double mean = 0.0;
    for (double e : x) mean += e;
    mean /= static_cast<double>(x.size());
    auto y = n.value.row_span(i);
    for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] - mean;
  }
  return v;
}

/// Horizontal concatenation of tensors with equal row counts.
inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty part list");
  Tape& t = *parts.front().tape;
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  bool g = false;
  for (const Var& p : parts) {
    if (p.tape != &t) throw ContractError("operands live on different tapes");
    if (p.rows() != r) throw DimensionError("concat_cols: row mismatch " + std::to_string(p.rows()) + " vs " + std::to_string(r));
    c += p.cols();
    g = g || t.node(p.id).needs_grad;
  }
  auto [v, n] = t.push(OpKind::ConcatCols, -1, -1, g);
  n.value.reset(r, c);
  std::size_t off = 0;
  for (const Var& p : parts) {
    n.inputs.push_back(p.id);
    const Tensor& P = p.value();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) n.value(i, off + j) = P(i, j);
    off += P.cols();
  }
  return v;
}
inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

/// Columns [begin, end).
inline Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = *a.tape;
  const Tensor& A = a.value();
  if (begin > end || end > A.cols())
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " + A.shape());
  auto [v, n] = t.push(OpKind::SliceCols, a.id, -1, detail::any_grad(t, a.id));
  n.index = {begin, end};
  n.value.reset(A.rows(), end - begin);
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) n.value(i, j - begin) = A(i, j);
  return v;
}

inline Var sum(Var a) {
  Tape& t = *a.tape;
  auto [v, n] = t.push(OpKind::Sum, a.id, -1, detail::any_grad(t, a.id));
  n.value.reset(1, 1);
  for (double e : a.value().data()) n.value[0] += e;
  Tape::check_finite(n);
  return v;
}

inline Var mean(Var a) {
  Tape& t = *a.tape;
  if (a.value().empty()) throw ContractError("mean of empty tensor");
  auto [v, n] = t.push(OpKind::Mean, a.id, -1, detail::any_grad(t, a.id));
  n.value.reset(1, 1);
  for (double e : a.value().data()) n.value[0] += e;
  n.value[0] /= static_cast<double>(a.value().size());
  return v;
}

/// Mean squared error against a constant target of the same shape.
inline Var mse_loss(Var pred, Var target) {
  Tape& t = detail::same_tape(pred, target);
  const Tensor& P = pred.value();
  const Tensor& Y = target.value();
  detail::require_same_shape("mse_loss", P, Y);
  if (P.empty()) throw ContractError("mse_loss: empty batch");
  auto [v, n] = t.push(OpKind::MseLoss, pred.id, target.id, detail::any_grad(t, pred.id, target.id));
  n.value.reset(1, 1);
  for (std::size_t i = 0; i < P.size(); ++i) n.value[0] += (P[i] - Y[i]) * (P[i] - Y[i]);
  n.value[0] /= static_cast<double>(P.size());
  Tape::check_finite(n);
  return v;
}

/// Mean of -log(probs(i, labels[i])) with probabilities floored at kProbClamp.
inline Var cross_entropy(Var probs, std::span<const std::size_t> labels) {
  Tape& t = *probs.tape;
  const Tensor& P = probs.value();
  if (labels.size() != P.rows())
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + P.shape());
  if (labels.empty()) throw ContractError("cross_entropy: empty batch");
  for (std::size_t l : labels)
    if (l >= P.cols()) throw DimensionError("cross_entropy: label out of range");
  auto [v, n] = t.push(OpKind::CrossEntropy, probs.id, -1, detail::any_grad(t, probs.id));
  n.index.assign(labels.begin(), labels.end());
  n.value.reset(1, 1);
  for (std::size_t i = 0; i < P.rows(); ++i) n.value[0] -= std::log(std::max(P(i, labels[i]), kProbClamp));
  n.value[0] /= static_cast<double>(P.rows());
  Tape::check_finite(n);
  return v;
}

// ---------------------------------------------------------------------------
// Backward rules
// ---------------------------------------------------------------------------

inline void Tape::propagate(TapeNode& n) {
  const Tensor& G = n.grad;
  const Tensor& Y = n.value;
  auto want = [this](int id) { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; };
  auto gin = [this](int id) -> Tensor& { return nodes_[static_cast<std::size_t>(id)].grad; };
  auto val = [this](int id) -> const Tensor& { return nodes_[static_cast<std::size_t>(id)].value; };

  switch (n.op) {
    case OpKind::Constant:
      break;
    case OpKind::Param: {
      Parameter& p = *n.param;
      if (!p.grad.same_shape(p.value)) p.zero_grad();
      for (std::size_t i = 0; i < G.size(); ++i) p.grad[i] += G[i];
      break;
    }
    case OpKind::MatMul: {
      const Tensor& A = val(n.a);
      const Tensor& B = val(n.b);
      const std::size_t m = A.rows(), k = A.cols(), p = B.cols();
      if (want(n.a)) {
        Tensor& dA = gin(n.a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t l = 0; l < k; ++l) dA(i, l) += detail::dot(G.row_span(i), B.row_span(l));
      }
      if (want(n.b)) {
        Tensor& dB = gin(n.b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t l = 0; l < k; ++l) {
            const double ail = A(i, l);
            for (std::size_t j = 0; j < p; ++j) dB(l, j) += ail * G(i, j);
          }
      }
      break;
    }
    case OpKind::MatMulNT: {
      const Tensor& A = val(n.a);
      const Tensor& B = val(n.b);
      const std::size_t m = A.rows(), k = A.cols(), p = B.rows();
      if (want(n.a)) {
        Tensor& dA = gin(n.a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p; ++j) {
            const double g = G(i, j);
            for (std::size_t l = 0; l < k; ++l) dA(i, l) += g * B(j, l);
          }
      }
      if (want(n.b)) {
        Tensor& dB = gin(n.b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p; ++j) {
            const double g = G(i, j);
            for (std::size_t l = 0; l < k; ++l) dB(j, l) += g * A(i, l);
          }
      }
      break;
    }
    case OpKind::Transpose: {
      Tensor& dA = gin(n.a);
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) dA(j, i) += G(i, j);
      break;
    }
    case OpKind::Add:
      if (want(n.a)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += G[i];
      if (want(n.b)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.b)[i] += G[i];
      break;
    case OpKind::Sub:
      if (want(n.a)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += G[i];
      if (want(n.b)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.b)[i] -= G[i];
      break;
    case OpKind::Hadamard: {
      const Tensor& A = val(n.a);
      const Tensor& B = val(n.b);
      if (want(n.a)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += G[i] * B[i];
      if (want(n.b)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.b)[i] += G[i] * A[i];
      break;
    }
    case OpKind::Affine:
      for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += n.scalar0 * G[i];
      break;
    case OpKind::AddRow:
      if (want(n.a)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += G[i];
      if (want(n.b)) {
        Tensor& dR = gin(n.b);
        for (std::size_t i = 0; i < G.rows(); ++i)
          for (std::size_t j = 0; j < G.cols(); ++j) dR[j] += G(i, j);
      }
      break;
    case OpKind::AddOuter:
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) {
          if (want(n.a)) gin(n.a)[i] += G(i, j);
          if (want(n.b)) gin(n.b)[j] += G(i, j);
        }
      break;
    case OpKind::MulScalar: {
      const double k = val(n.a)[0];
      const Tensor& A = val(n.b);
      if (want(n.a)) gin(n.a)[0] += detail::dot(G.data(), A.data());
      if (want(n.b)) for (std::size_t i = 0; i < G.size(); ++i) gin(n.b)[i] += k * G[i];
      break;
    }
    case OpKind::Tanh:
      for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += G[i] * (1.0 - Y[i] * Y[i]);
      break;
    case OpKind::Sigmoid:
      for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += G[i] * Y[i] * (1.0 - Y[i]);
      break;
    case OpKind::Relu: {
      const Tensor& A = val(n.a);
      for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += A[i] > 0 ? G[i] : 0.0;
      break;
    }
    case OpKind::Elu: {
      const Tensor& A = val(n.a);
      for (std::size_t i = 0; i < G.size(); ++i) gin(n.a)[i] += A[i] >= 0 ? G[i] : G[i] * (Y[i] + 1.0);
      break;
    }
    case OpKind::MaskedSoftmaxRows:
    case OpKind::SoftmaxRows: {
      Tensor& dA = gin(n.a);
      for (std::size_t i = 0; i < G.rows(); ++i) {
        auto y = Y.row_span(i);
        auto g = G.row_span(i);
        const double d = detail::dot(y, g);
        const std::size_t ex = n.op == OpKind::MaskedSoftmaxRows ? n.index[i] : kNoExclusion;
        for (std::size_t j = 0; j < y.size(); ++j)
          if (j != ex) dA(i, j) += y[j] * (g[j] - d);
      }
      break;
    }
    case OpKind::RowNormalize: {
      const Tensor& A = val(n.a);
      Tensor& dA = gin(n.a);
      for (std::size_t i = 0; i < G.rows(); ++i) {
        auto x = A.row_span(i);
        const double norm = std::sqrt(detail::dot(x, x));
        if (norm <= kNormEpsilon) continue;
        auto y = Y.row_span(i);
        auto g = G.row_span(i);
        const double yg = detail::dot(y, g);
        for (std::size_t j = 0; j < y.size(); ++j) dA(i, j) += (g[j] - y[j] * yg) / norm;
      }
      break;
    }
    case OpKind::RowCenter: {
      Tensor& dA = gin(n.a);
      for (std::size_t i = 0; i < G.rows(); ++i) {
        auto g = G.row_span(i);
        double m = 0.0;
        for (double e : g) m += e;
        m /= static_cast<double>(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) dA(i, j) += g[j] - m;
      }
      break;
    }
    case OpKind::ConcatCols: {
      std::size_t off = 0;
      for (int id : n.inputs) {
        const std::size_t c = val(id).cols();
        if (want(id)) {
          Tensor& dP = gin(id);
          for (std::size_t i = 0; i < G.rows(); ++i)
            for (std::size_t j = 0; j < c; ++j) dP(i, j) += G(i, off + j);
        }
        off += c;
      }
      break;
    }
    case OpKind::SliceCols: {
      Tensor& dA = gin(n.a);
      const std::size_t begin = n.index[0];
      for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) dA(i, begin + j) += G(i, j);
      break;
    }
    case OpKind::Sum:
      for (double& e : gin(n.a).data()) e += G[0];
      break;
    case OpKind::Mean: {
      Tensor& dA = gin(n.a);
      const double g = G[0] / static_cast<double>(dA.size());
      for (double& e : dA.data()) e += g;
      break;
    }
    case OpKind::MseLoss: {
      const Tensor& P = val(n.a);
      const Tensor& T = val(n.b);
      const double scale = 2.0 * G[0] / static_cast<double>(P.size());
      if (want(n.a)) for (std::size_t i = 0; i < P.size(); ++i) gin(n.a)[i] += scale * (P[i] - T[i]);
      if (want(n.b)) for (std::size_t i = 0; i < P.size(); ++i) gin(n.b)[i] -= scale * (P[i] - T[i]);
      break;
    }
    case OpKind::CrossEntropy: {
      const Tensor& P = val(n.a);
      Tensor& dP = gin(n.a);
      const double scale = G[0] / static_cast<double>(P.rows());
      for (std::size_t i = 0; i < P.rows(); ++i) {
        const double p = P(i, n.index[i]);
        if (p > kProbClamp) dP(i, n.index[i]) -= scale / p;
      }
      break;
    }
  }
}

}  // namespace gatagnn
