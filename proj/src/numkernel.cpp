#include "scstory/numkernel.hpp"

#include <atomic>
#include <string>

namespace scstory::num {
namespace {

std::atomic<std::uint64_t> next_tape_id{1};

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::ShapeMismatch, std::string(op) + ": operand shapes differ");
}

}  // namespace

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

std::size_t Tape::check(Var v) const {
  if (v.tape != id_ || v.index >= nodes_.size())
    throw Error(Errc::DetachedNode, "variable does not belong to this tape");
  return v.index;
}

Var Tape::push(Node node) {
  if (backward_done_) throw Error(Errc::DoubleBackward, "tape already consumed by backward");
  nodes_.push_back(std::move(node));
  return Var{id_, nodes_.size() - 1};
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::leaf_ref(const Matrix& value, bool requires_grad) {
  Node n;
  n.external = &value;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return nodes_[check(v)].val(); }

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw Error(Errc::ShapeMismatch, "scalar(): node is not 1 x 1");
  return m(0, 0);
}

bool Tape::requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }

Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) throw Error(Errc::ShapeMismatch, "matmul: inner dimensions");
  Node n;
  n.op = Op::MatMul;
  n.a = a.index;
  n.b = b.index;
  n.value = A * B;
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) throw Error(Errc::ShapeMismatch, "matmul_nt: inner dimensions");
  Node n;
  n.op = Op::MatMulNT;
  n.a = a.index;
  n.b = b.index;
  n.value = A * B.transpose();
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require_same_shape(A, B, "add");
  Node n;
  n.op = Op::Add;
  n.a = a.index;
  n.b = b.index;
  n.value = A + B;
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& A = value(a);
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) throw Error(Errc::ShapeMismatch, "add_row: row shape");
  Node n;
  n.op = Op::AddRow;
  n.a = a.index;
  n.b = row.index;
  n.value = A.rowwise() + R.row(0);
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[row.index].requires_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require_same_shape(A, B, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.index;
  n.b = b.index;
  n.value = A - B;
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::Scale;
  n.a = check(a);
  n.scalar = s;
  n.value = value(a) * s;
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.a = check(a);
  n.value = value(a).array().tanh().matrix();
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::Transpose;
  n.a = check(a);
  n.value = value(a).transpose();
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::masked_row_softmax(Var a, std::vector<bool> key_mask, std::vector<bool> query_mask) {
  Node n;
  n.op = Op::Softmax;
  n.a = check(a);
  n.value = num::masked_row_softmax(value(a), key_mask, query_mask);
  n.key_mask = std::move(key_mask);
  n.query_mask = std::move(query_mask);
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::layer_norm(Var a, double eps) {
  const Matrix& X = value(a);
  Node n;
  n.op = Op::LayerNorm;
  n.a = a.index;
  n.value.resize(X.rows(), X.cols());
  n.aux.resize(X.rows(), 1);
  const double h = static_cast<double>(X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).sum() / h;
    const double var = (X.row(r).array() - mean).square().sum() / h;
    const double inv = 1.0 / std::sqrt(var + eps);
    n.aux(r, 0) = inv;
    n.value.row(r) = (X.row(r).array() - mean) * inv;
  }
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_cols: no parts");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw Error(Errc::ShapeMismatch, "concat_cols: row counts differ");
    cols += value(p).cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& P = value(p);
    n.value.middleCols(at, P.cols()) = P;
    at += P.cols();
    n.many.push_back(p.index);
    n.requires_grad = n.requires_grad || nodes_[p.index].requires_grad;
  }
  return push(std::move(n));
}

Var Tape::stack_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "stack_rows: no parts");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw Error(Errc::ShapeMismatch, "stack_rows: column counts differ");
    rows += value(p).rows();
  }
  Node n;
  n.op = Op::StackRows;
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& P = value(p);
    n.value.middleRows(at, P.rows()) = P;
    at += P.rows();
    n.many.push_back(p.index);
    n.requires_grad = n.requires_grad || nodes_[p.index].requires_grad;
  }
  return push(std::move(n));
}

Var Tape::mean_rows(Var a) {
  const Matrix& A = value(a);
  if (A.rows() == 0) throw Error(Errc::EmptyStory, "mean_rows of an empty matrix");
  Node n;
  n.op = Op::MeanRows;
  n.a = a.index;
  n.value = A.colwise().mean();
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::cosine_rows(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.cols()) throw Error(Errc::ShapeMismatch, "cosine_rows: dimensions differ");
  const Eigen::VectorXd na = A.rowwise().norm();
  const Eigen::VectorXd nb = B.rowwise().norm();
  if ((na.array() == 0.0).any() || (nb.array() == 0.0).any())
    throw Error(Errc::ZeroVector, "cosine_rows: zero row");
  Node n;
  n.op = Op::CosineRows;
  n.a = a.index;
  n.b = b.index;
  n.aux = na.cwiseInverse().asDiagonal() * A;  // unit rows of a
  n.aux2 = nb.cwiseInverse().asDiagonal() * B;
  n.value = n.aux * n.aux2.transpose();
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::row_logsumexp(Var a) {
  const Matrix& A = value(a);
  Node n;
  n.op = Op::RowLogSumExp;
  n.a = a.index;
  n.value.resize(A.rows(), 1);
  n.aux.resize(A.rows(), A.cols());
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double hi = A.row(r).maxCoeff();
    const auto e = (A.row(r).array() - hi).exp();
    const double total = e.sum();
    n.value(r, 0) = hi + std::log(total);
    n.aux.row(r) = e / total;
  }
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::gather_cols(Var a, std::vector<int> cols) {
  const Matrix& A = value(a);
  if (static_cast<Eigen::Index>(cols.size()) != A.rows())
    throw Error(Errc::ShapeMismatch, "gather_cols: one index per row required");
  Node n;
  n.op = Op::GatherCols;
  n.a = a.index;
  n.value.resize(A.rows(), 1);
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    if (cols[r] < 0 || cols[r] >= A.cols()) throw Error(Errc::ShapeMismatch, "gather_cols: index");
    n.value(r, 0) = A(r, cols[r]);
  }
  n.index = std::move(cols);
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.a = check(a);
  n.value = Matrix::Constant(1, 1, value(a).sum());
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

void Tape::accumulate(std::size_t index, const Matrix& g) {
  if (!nodes_[index].requires_grad) return;
  if (has_grad_[index]) {
    grads_[index] += g;
  } else {
    grads_[index] = g;
    has_grad_[index] = true;
  }
}

void Tape::backward(Var loss) {
  const std::size_t root = check(loss);
  if (backward_done_) throw Error(Errc::DoubleBackward, "backward already called on this tape");
  if (nodes_[root].val().size() != 1) throw Error(Errc::ShapeMismatch, "loss must be 1 x 1");
  backward_done_ = true;
  grads_.assign(nodes_.size(), Matrix());
  has_grad_.assign(nodes_.size(), false);
  accumulate(root, Matrix::Ones(1, 1));

  for (std::size_t i = root + 1; i-- > 0;) {
    if (!has_grad_[i]) continue;
    const Node& n = nodes_[i];
    const Matrix& G = grads_[i];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul:
        accumulate(n.a, G * nodes_[n.b].val().transpose());
        accumulate(n.b, nodes_[n.a].val().transpose() * G);
        break;
      case Op::MatMulNT:
        accumulate(n.a, G * nodes_[n.b].val());
        accumulate(n.b, G.transpose() * nodes_[n.a].val());
        break;
      case Op::Add:
        accumulate(n.a, G);
        accumulate(n.b, G);
        break;
      case Op::AddRow:
        accumulate(n.a, G);
        accumulate(n.b, G.colwise().sum());
        break;
      case Op::Sub:
        accumulate(n.a, G);
        accumulate(n.b, -G);
        break;
      case Op::Scale:
        accumulate(n.a, G * n.scalar);
        break;
      case Op::Tanh:
        accumulate(n.a, (G.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::Transpose:
        accumulate(n.a, G.transpose());
        break;
      case Op::Softmax: {
        const Matrix& Y = n.value;
        const Eigen::VectorXd dots = (G.array() * Y.array()).rowwise().sum();
        Matrix dx = (Y.array() * (G.colwise() - dots).array()).matrix();
        accumulate(n.a, dx);
        break;
      }
      case Op::LayerNorm: {
        const Matrix& Y = n.value;
        const double h = static_cast<double>(Y.cols());
        const Eigen::VectorXd mean_g = G.rowwise().sum() / h;
        const Eigen::VectorXd mean_gy = (G.array() * Y.array()).rowwise().sum() / h;
        Matrix dx = G;
        dx.colwise() -= mean_g;
        dx -= mean_gy.asDiagonal() * Y;
        dx = n.aux.col(0).asDiagonal() * dx;
        accumulate(n.a, dx);
        break;
      }
      case Op::ConcatCols: {
        Eigen::Index at = 0;
        for (std::size_t p : n.many) {
          const Eigen::Index w = nodes_[p].val().cols();
          accumulate(p, G.middleCols(at, w));
          at += w;
        }
        break;
      }
      case Op::StackRows: {
        Eigen::Index at = 0;
        for (std::size_t p : n.many) {
          const Eigen::Index h = nodes_[p].val().rows();
          accumulate(p, G.middleRows(at, h));
          at += h;
        }
        break;
      }
      case Op::MeanRows: {
        const Eigen::Index k = nodes_[n.a].val().rows();
        Matrix dx = Matrix::Ones(k, 1) * (G / static_cast<double>(k));
        accumulate(n.a, dx);
        break;
      }
      case Op::CosineRows: {
        const Matrix& UA = n.aux;
        const Matrix& UB = n.aux2;
        const Eigen::VectorXd na = nodes_[n.a].val().rowwise().norm();
        const Eigen::VectorXd nb = nodes_[n.b].val().rowwise().norm();
        if (nodes_[n.a].requires_grad) {
          Matrix du = G * UB;
          const Eigen::VectorXd proj = (du.array() * UA.array()).rowwise().sum();
          du -= proj.asDiagonal() * UA;
          accumulate(n.a, na.cwiseInverse().asDiagonal() * du);
        }
        if (nodes_[n.b].requires_grad) {
          Matrix dv = G.transpose() * UA;
          const Eigen::VectorXd proj = (dv.array() * UB.array()).rowwise().sum();
          dv -= proj.asDiagonal() * UB;
          accumulate(n.b, nb.cwiseInverse().asDiagonal() * dv);
        }
        break;
      }
      case Op::RowLogSumExp:
        accumulate(n.a, G.col(0).asDiagonal() * n.aux);
        break;
      case Op::GatherCols: {
        const Matrix& A = nodes_[n.a].val();
        Matrix dx = Matrix::Zero(A.rows(), A.cols());
        for (Eigen::Index r = 0; r < A.rows(); ++r) dx(r, n.index[r]) = G(r, 0);
        accumulate(n.a, dx);
        break;
      }
      case Op::Sum: {
        const Matrix& A = nodes_[n.a].val();
        accumulate(n.a, Matrix::Constant(A.rows(), A.cols(), G(0, 0)));
        break;
      }
    }
  }
}

Matrix Tape::grad(Var v) const {
  const std::size_t i = check(v);
  if (i < has_grad_.size() && has_grad_[i]) return grads_[i];
  const Matrix& m = nodes_[i].val();
  return Matrix::Zero(m.rows(), m.cols());
}

}  // namespace scstory::num
