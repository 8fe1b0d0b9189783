#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "scstory/error.hpp"
#include "scstory/linalg.hpp"

namespace scstory::num {

inline constexpr double kNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Value-level kernels. Scalar-generic; the tape below records the same math.
// ---------------------------------------------------------------------------

/// Row-wise softmax restricted to columns where `key_mask` is true. Rows whose
/// `query_mask` entry is false come out all-zero, as do masked columns.
template <typename Derived>
MatrixX<typename Derived::Scalar> masked_row_softmax(const Eigen::MatrixBase<Derived>& x,
                                                     const std::vector<bool>& key_mask,
                                                     const std::vector<bool>& query_mask) {
  using Scalar = typename Derived::Scalar;
  if (static_cast<Eigen::Index>(key_mask.size()) != x.cols() ||
      static_cast<Eigen::Index>(query_mask.size()) != x.rows())
    throw Error(Errc::ShapeMismatch, "masked_row_softmax: mask length");
  bool any = false;
  for (bool b : key_mask) any = any || b;
  if (!any) throw Error(Errc::AllMasked, "masked_row_softmax: no unmasked column");

  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (!query_mask[r]) continue;
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (key_mask[c]) hi = std::max(hi, x(r, c));
    Scalar total = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!key_mask[c]) continue;
      out(r, c) = std::exp(x(r, c) - hi);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return out;
}

/// Self-attention form: the same mask gates keys (columns) and queries (rows).
template <typename Derived>
MatrixX<typename Derived::Scalar> masked_row_softmax(const Eigen::MatrixBase<Derived>& x,
                                                     const std::vector<bool>& mask) {
  return masked_row_softmax(x, mask, mask);
}

/// Per-row standardisation without affine parameters.
template <typename Derived>
MatrixX<typename Derived::Scalar> layer_norm(const Eigen::MatrixBase<Derived>& x,
                                             typename Derived::Scalar eps = kNormEps) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> out(x.rows(), x.cols());
  const auto h = static_cast<Scalar>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).sum() / h;
    const Scalar var = (x.row(r).array() - mean).square().sum() / h;
    out.row(r) = (x.row(r).array() - mean) / std::sqrt(var + eps);
  }
  return out;
}

template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar cosine(const Eigen::MatrixBase<DerivedU>& u,
                                 const Eigen::MatrixBase<DerivedV>& v) {
  const auto nu = u.norm();
  const auto nv = v.norm();
  if (nu == 0 || nv == 0) throw Error(Errc::ZeroVector, "cosine of a zero vector");
  const auto c = u.cwiseProduct(v).sum() / (nu * nv);
  return std::clamp(c, decltype(c)(-1), decltype(c)(1));
}

// ---------------------------------------------------------------------------
// Reverse-mode tape over dense double matrices.
// ---------------------------------------------------------------------------

/// Handle to a node on a specific tape.
struct Var {
  std::uint64_t tape = 0;
  std::size_t index = 0;
};

/// Define-by-run recorder. Each op computes its value eagerly and appends a
/// node; backward() walks the nodes in exact reverse order, accumulating
/// gradients additively. One tape per forward pass; not shareable across threads.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Leaf owning a copy of `value`.
  Var leaf(Matrix value, bool requires_grad = false);
  /// Leaf referencing caller-owned storage that must outlive the tape.
  Var leaf_ref(const Matrix& value, bool requires_grad = false);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1 x cols row to every row of a.
  Var add_row(Var a, Var row);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var tanh(Var a);
  Var transpose(Var a);
  Var masked_row_softmax(Var a, std::vector<bool> key_mask, std::vector<bool> query_mask);
  Var layer_norm(Var a, double eps = kNormEps);
  Var concat_cols(std::span<const Var> parts);
  Var stack_rows(std::span<const Var> parts);
  /// 1 x cols mean over rows.
  Var mean_rows(Var a);
  /// Pairwise cosine: out(i, j) = cos(a.row(i), b.row(j)).
  Var cosine_rows(Var a, Var b);
  /// rows x 1 log-sum-exp of each row.
  Var row_logsumexp(Var a);
  /// rows x 1, out(i) = a(i, cols[i]).
  Var gather_cols(Var a, std::vector<int> cols);
  /// 1 x 1 sum of all entries.
  Var sum(Var a);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;

  /// Populates gradients of every requires_grad node with respect to `loss`,
  /// which must be a 1 x 1 node of this tape. Callable once per tape.
  void backward(Var loss);
  /// Gradient after backward(); zero matrix for nodes the loss does not reach.
  Matrix grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(Var v) const;

 private:
  enum class Op : std::uint8_t {
    Leaf, MatMul, MatMulNT, Add, AddRow, Sub, Scale, Tanh, Transpose, Softmax,
    LayerNorm, ConcatCols, StackRows, MeanRows, CosineRows, RowLogSumExp, GatherCols, Sum,
  };

  struct Node {
    Op op = Op::Leaf;
    std::size_t a = 0;
    std::size_t b = 0;
    std::vector<std::size_t> many;
    Matrix value;
    const Matrix* external = nullptr;
    Matrix aux;  // op-specific cache (inverse std, row norms, ...)
    Matrix aux2;
    double scalar = 0.0;
    std::vector<bool> key_mask;
    std::vector<bool> query_mask;
    std::vector<int> index;
    bool requires_grad = false;

    const Matrix& val() const { return external ? *external : value; }
  };

  std::size_t check(Var v) const;
  Var push(Node node);
  void accumulate(std::size_t index, const Matrix& g);

  std::uint64_t id_;
  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  std::vector<bool> has_grad_;
  bool backward_done_ = false;
};

}  // namespace scstory::num
