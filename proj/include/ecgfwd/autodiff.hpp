#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ecgfwd/errors.hpp"

namespace ecgfwd {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// Reverse-mode tape over dense matrices. Every operation appends a node
/// holding its value and a closure that scatters the node's adjoint to its
/// inputs; backward() replays the closures last-to-first. Values live on the
/// tape, so handles (Var) are trivially copyable ints.
template <typename S>
class Tape {
 public:
  struct Node {
    Mat<S> value;
    Mat<S> grad;                      // same shape, lazily zero-initialized
    std::function<void(Tape&)> back;  // empty for leaves
    Mat<S>* sink = nullptr;           // parameter leaves accumulate here
  };

  int size() const { return static_cast<int>(nodes_.size()); }
  const Mat<S>& value(int id) const { return nodes_[id].value; }
  const Mat<S>& grad(int id) const { return nodes_[id].grad; }
  Node& node(int id) { return nodes_[id]; }

  int push(Mat<S> value, std::function<void(Tape&)> back = {}) {
    Node n;
    n.value = std::move(value);
    n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return size() - 1;
  }

  /// Seeds d(output)/d(output) = 1 and propagates. Output must be 1x1.
  void backward(int output_id) {
    if (nodes_[output_id].value.size() != 1)
      throw ValidationError("backward: output is not a scalar");
    nodes_[output_id].grad(0, 0) = S(1);
    for (int i = output_id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.back) n.back(*this);
      if (n.sink) *n.sink += n.grad;
    }
  }

  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

/// Handle to a tape node.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  const Mat<S>& val() const { return tape->value(id); }
  int rows() const { return static_cast<int>(val().rows()); }
  int cols() const { return static_cast<int>(val().cols()); }
};

namespace ad {

template <typename S>
Var<S> constant(Tape<S>& tape, Mat<S> value) {
  return {&tape, tape.push(std::move(value))};
}

template <typename S>
Var<S> scalar(Tape<S>& tape, S value) {
  Mat<S> m(1, 1);
  m(0, 0) = value;
  return constant(tape, std::move(m));
}

/// Leaf whose adjoint is accumulated into *sink after backward().
template <typename S>
Var<S> param(Tape<S>& tape, const Mat<S>& value, Mat<S>* sink) {
  const int id = tape.push(value);
  tape.node(id).sink = sink;
  return {&tape, id};
}

template <typename S>
void same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.val().rows() != b.val().rows() || a.val().cols() != b.val().cols())
    throw ValidationError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                          "x" + std::to_string(b.cols()) + ")");
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  same_shape(a, b, "add");
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val() + b.val());
  t.node(self).back = [self, ai = a.id, bi = b.id](Tape<S>& t) {
    t.node(ai).grad += t.grad(self);
    t.node(bi).grad += t.grad(self);
  };
  return {&t, self};
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  same_shape(a, b, "sub");
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val() - b.val());
  t.node(self).back = [self, ai = a.id, bi = b.id](Tape<S>& t) {
    t.node(ai).grad += t.grad(self);
    t.node(bi).grad -= t.grad(self);
  };
  return {&t, self};
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  same_shape(a, b, "mul");
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val().cwiseProduct(b.val()));
  t.node(self).back = [self, ai = a.id, bi = b.id](Tape<S>& t) {
    t.node(ai).grad += t.grad(self).cwiseProduct(t.value(bi));
    t.node(bi).grad += t.grad(self).cwiseProduct(t.value(ai));
  };
  return {&t, self};
}

template <typename S>
Var<S> scale(Var<S> a, S c) {
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val() * c);
  t.node(self).back = [self, ai = a.id, c](Tape<S>& t) {
    t.node(ai).grad += t.grad(self) * c;
  };
  return {&t, self};
}

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimension mismatch");
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val() * b.val());
  t.node(self).back = [self, ai = a.id, bi = b.id](Tape<S>& t) {
    t.node(ai).grad += t.grad(self) * t.value(bi).transpose();
    t.node(bi).grad += t.value(ai).transpose() * t.grad(self);
  };
  return {&t, self};
}

/// a^T * b without materializing the transpose as a node.
template <typename S>
Var<S> matmul_tn(Var<S> a, Var<S> b) {
  if (a.rows() != b.rows()) throw ValidationError("matmul_tn: row mismatch");
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val().transpose() * b.val());
  t.node(self).back = [self, ai = a.id, bi = b.id](Tape<S>& t) {
    t.node(ai).grad += t.value(bi) * t.grad(self).transpose();
    t.node(bi).grad += t.value(ai) * t.grad(self);
  };
  return {&t, self};
}

/// Constant (non-differentiated) dense matrix times variable. A is captured
/// by reference and must outlive the tape (contexts own these operators).
template <typename S>
Var<S> matmul_const(Tape<S>& t, const Mat<S>& A, Var<S> b) {
  if (A.cols() != b.rows()) throw ValidationError("matmul_const: inner dimension mismatch");
  const int self = t.push(A * b.val());
  t.node(self).back = [self, bi = b.id, &A](Tape<S>& t) {
    t.node(bi).grad += A.transpose() * t.grad(self);
  };
  return {&t, self};
}

/// Constant sparse matrix (double precision storage) times variable.
template <typename S>
Var<S> spmatmul_const(Tape<S>& t, const Eigen::SparseMatrix<S>& A, Var<S> b) {
  if (A.cols() != b.rows()) throw ValidationError("spmatmul_const: inner dimension mismatch");
  const int self = t.push(A * b.val());
  t.node(self).back = [self, bi = b.id, &A](Tape<S>& t) {
    t.node(bi).grad += A.transpose() * t.grad(self);
  };
  return {&t, self};
}

/// Adds a 1 x d row vector to every row of an N x d matrix.
template <typename S>
Var<S> add_rowvec(Var<S> m, Var<S> r) {
  if (r.rows() != 1 || r.cols() != m.cols())
    throw ValidationError("add_rowvec: bias must be 1 x cols");
  Tape<S>& t = *m.tape;
  const int self = t.push(m.val().rowwise() + r.val().row(0));
  t.node(self).back = [self, mi = m.id, ri = r.id](Tape<S>& t) {
    t.node(mi).grad += t.grad(self);
    t.node(ri).grad.row(0) += t.grad(self).colwise().sum();
  };
  return {&t, self};
}

/// Multiplies every row of an N x d matrix by the matching entry of an
/// N x 1 column.
template <typename S>
Var<S> mul_colvec(Var<S> m, Var<S> c) {
  if (c.cols() != 1 || c.rows() != m.rows())
    throw ValidationError("mul_colvec: weights must be rows x 1");
  Tape<S>& t = *m.tape;
  const int self = t.push(m.val().array().colwise() * c.val().col(0).array());
  t.node(self).back = [self, mi = m.id, ci = c.id](Tape<S>& t) {
    t.node(mi).grad += (t.grad(self).array().colwise() * t.value(ci).col(0).array()).matrix();
    t.node(ci).grad.col(0) +=
        t.grad(self).cwiseProduct(t.value(mi)).rowwise().sum();
  };
  return {&t, self};
}

/// Elementwise multiply by a 1 x 1 scalar variable.
template <typename S>
Var<S> mul_scalar(Var<S> m, Var<S> s) {
  if (s.val().size() != 1) throw ValidationError("mul_scalar: scale must be 1 x 1");
  Tape<S>& t = *m.tape;
  const int self = t.push(m.val() * s.val()(0, 0));
  t.node(self).back = [self, mi = m.id, si = s.id](Tape<S>& t) {
    t.node(mi).grad += t.grad(self) * t.value(si)(0, 0);
    t.node(si).grad(0, 0) += t.grad(self).cwiseProduct(t.value(mi)).sum();
  };
  return {&t, self};
}

/// Adds a 1 x 1 scalar variable to every element.
template <typename S>
Var<S> add_scalar(Var<S> m, Var<S> s) {
  if (s.val().size() != 1) throw ValidationError("add_scalar: addend must be 1 x 1");
  Tape<S>& t = *m.tape;
  const int self = t.push(m.val().array() + s.val()(0, 0));
  t.node(self).back = [self, mi = m.id, si = s.id](Tape<S>& t) {
    t.node(mi).grad += t.grad(self);
    t.node(si).grad(0, 0) += t.grad(self).sum();
  };
  return {&t, self};
}

template <typename S>
Var<S> tanh_v(Var<S> a) {
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val().array().tanh().matrix());
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    const auto y = t.value(self).array();
    t.node(ai).grad += (t.grad(self).array() * (S(1) - y * y)).matrix();
  };
  return {&t, self};
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  Tape<S>& t = *a.tape;
  const int self = t.push((S(1) / (S(1) + (-a.val().array()).exp())).matrix());
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    const auto y = t.value(self).array();
    t.node(ai).grad += (t.grad(self).array() * y * (S(1) - y)).matrix();
  };
  return {&t, self};
}

template <typename S>
Var<S> exp_v(Var<S> a) {
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val().array().exp().matrix());
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    t.node(ai).grad += (t.grad(self).array() * t.value(self).array()).matrix();
  };
  return {&t, self};
}

/// sqrt(x + eps): keeps the derivative finite at x = 0, and in particular
/// gives exactly zero gradient when x is identically zero upstream of a sum.
template <typename S>
Var<S> sqrt_eps(Var<S> a, S eps) {
  Tape<S>& t = *a.tape;
  const int self = t.push((a.val().array() + eps).sqrt().matrix());
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    t.node(ai).grad += (t.grad(self).array() / (S(2) * t.value(self).array())).matrix();
  };
  return {&t, self};
}

template <typename S>
Var<S> sum_all(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> v(1, 1);
  v(0, 0) = a.val().sum();
  const int self = t.push(std::move(v));
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    t.node(ai).grad.array() += t.grad(self)(0, 0);
  };
  return {&t, self};
}

template <typename S>
Var<S> mean_all(Var<S> a) {
  return scale(sum_all(a), S(1) / static_cast<S>(a.val().size()));
}

/// Row-wise softmax (each row sums to 1); optional mask fixes chosen columns
/// to exactly zero and renormalizes over the remaining ones.
template <typename S>
Var<S> softmax_rows(Var<S> a, const std::vector<bool>& enabled = {}) {
  Tape<S>& t = *a.tape;
  Mat<S> y(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    S hi = -std::numeric_limits<S>::infinity();
    for (int j = 0; j < a.cols(); ++j)
      if (enabled.empty() || enabled[static_cast<size_t>(j)]) hi = std::max(hi, a.val()(i, j));
    S denom = S(0);
    for (int j = 0; j < a.cols(); ++j) {
      const bool on = enabled.empty() || enabled[static_cast<size_t>(j)];
      y(i, j) = on ? std::exp(a.val()(i, j) - hi) : S(0);
      denom += y(i, j);
    }
    y.row(i) /= denom;
  }
  const int self = t.push(std::move(y));
  // dL/dx_j = y_j * (g_j - sum_k g_k y_k) per row; masked columns have y = 0
  // so they receive and contribute nothing.
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    const Mat<S>& yv = t.value(self);
    const Mat<S>& g = t.grad(self);
    Mat<S>& out = t.node(ai).grad;
    for (int i = 0; i < yv.rows(); ++i) {
      const S dot = g.row(i).cwiseProduct(yv.row(i)).sum();
      out.row(i) += yv.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
  };
  return {&t, self};
}

/// Softmax over the entries of an N x 1 column vector.
template <typename S>
Var<S> softmax_vec(Var<S> a) {
  if (a.cols() != 1) throw ValidationError("softmax_vec: input must be a column");
  Tape<S>& t = *a.tape;
  const S hi = a.val().maxCoeff();
  Mat<S> y = (a.val().array() - hi).exp().matrix();
  y /= y.sum();
  const int self = t.push(std::move(y));
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    const Mat<S>& yv = t.value(self);
    const Mat<S>& g = t.grad(self);
    const S dot = g.cwiseProduct(yv).sum();
    t.node(ai).grad += yv.cwiseProduct((g.array() - dot).matrix());
  };
  return {&t, self};
}

/// Norm over consecutive groups of 3 rows: (3F x d) -> (F x d), entry (f, c)
/// = sqrt(sum_k x(3f+k, c)^2 + eps) with a small eps for a finite slope at 0.
template <typename S>
Var<S> rows3_norm(Var<S> a, S eps) {
  if (a.rows() % 3 != 0) throw ValidationError("rows3_norm: row count not divisible by 3");
  Tape<S>& t = *a.tape;
  const int F = a.rows() / 3;
  Mat<S> y(F, a.cols());
  for (int f = 0; f < F; ++f)
    y.row(f) = (a.val().middleRows(3 * f, 3).colwise().squaredNorm().array() + eps).sqrt();
  const int self = t.push(std::move(y));
  t.node(self).back = [self, ai = a.id, F](Tape<S>& t) {
    const Mat<S>& yv = t.value(self);
    const Mat<S>& g = t.grad(self);
    const Mat<S>& x = t.value(ai);
    Mat<S>& out = t.node(ai).grad;
    for (int f = 0; f < F; ++f)
      for (int k = 0; k < 3; ++k)
        out.row(3 * f + k) +=
            g.row(f).cwiseProduct(x.row(3 * f + k)).cwiseQuotient(yv.row(f));
  };
  return {&t, self};
}

/// Horizontal concatenation.
template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  Tape<S>& t = *parts.front().tape;
  const int rows = parts.front().rows();
  int cols = 0;
  for (const Var<S>& p : parts) {
    if (p.rows() != rows) throw ValidationError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat<S> y(rows, cols);
  std::vector<int> ids, offs;
  int off = 0;
  for (const Var<S>& p : parts) {
    y.middleCols(off, p.cols()) = p.val();
    ids.push_back(p.id);
    offs.push_back(off);
    off += p.cols();
  }
  const int self = t.push(std::move(y));
  t.node(self).back = [self, ids, offs](Tape<S>& t) {
    for (size_t k = 0; k < ids.size(); ++k) {
      Mat<S>& g = t.node(ids[k]).grad;
      g += t.grad(self).middleCols(offs[k], g.cols());
    }
  };
  return {&t, self};
}

/// Vertical concatenation.
template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no inputs");
  Tape<S>& t = *parts.front().tape;
  const int cols = parts.front().cols();
  int rows = 0;
  for (const Var<S>& p : parts) {
    if (p.cols() != cols) throw ValidationError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Mat<S> y(rows, cols);
  std::vector<int> ids, offs;
  int off = 0;
  for (const Var<S>& p : parts) {
    y.middleRows(off, p.rows()) = p.val();
    ids.push_back(p.id);
    offs.push_back(off);
    off += p.rows();
  }
  const int self = t.push(std::move(y));
  t.node(self).back = [self, ids, offs](Tape<S>& t) {
    for (size_t k = 0; k < ids.size(); ++k) {
      Mat<S>& g = t.node(ids[k]).grad;
      g += t.grad(self).middleRows(offs[k], g.rows());
    }
  };
  return {&t, self};
}

/// Contiguous row slice [start, start + count).
template <typename S>
Var<S> rows(Var<S> a, int start, int count) {
  if (start < 0 || count < 1 || start + count > a.rows())
    throw ValidationError("rows: slice out of range");
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val().middleRows(start, count));
  t.node(self).back = [self, ai = a.id, start, count](Tape<S>& t) {
    t.node(ai).grad.middleRows(start, count) += t.grad(self);
  };
  return {&t, self};
}

/// Single column as an N x 1 variable.
template <typename S>
Var<S> col(Var<S> a, int j) {
  if (j < 0 || j >= a.cols()) throw ValidationError("col: index out of range");
  Tape<S>& t = *a.tape;
  const int self = t.push(a.val().col(j));
  t.node(self).back = [self, ai = a.id, j](Tape<S>& t) {
    t.node(ai).grad.col(j) += t.grad(self).col(0);
  };
  return {&t, self};
}

/// Mean Huber loss against a constant target.
template <typename S>
Var<S> huber_mean(Var<S> pred, const Mat<S>& target, S delta) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ValidationError("huber_mean: length mismatch");
  Tape<S>& t = *pred.tape;
  const S n = static_cast<S>(target.size());
  Mat<S> v(1, 1);
  S acc = S(0);
  const Mat<S> e = pred.val() - target;
  for (int i = 0; i < e.size(); ++i) {
    const S a = std::abs(e(i));
    acc += a <= delta ? S(0.5) * a * a : delta * (a - S(0.5) * delta);
  }
  v(0, 0) = acc / n;
  const int self = t.push(std::move(v));
  t.node(self).back = [self, pi = pred.id, target, delta, n](Tape<S>& t) {
    const S g = t.grad(self)(0, 0);
    const Mat<S> e = t.value(pi) - target;
    Mat<S>& out = t.node(pi).grad;
    for (int i = 0; i < e.size(); ++i) {
      const S d = std::abs(e(i)) <= delta ? e(i) : (e(i) > S(0) ? delta : -delta);
      out(i) += g * d / n;
    }
  };
  return {&t, self};
}

/// x * ln(x) with the 0 ln 0 = 0 convention (zero value and zero slope at 0,
/// so strictly-zero PSD bins stay inert).
template <typename S>
Var<S> xlogx(Var<S> a) {
  Tape<S>& t = *a.tape;
  Mat<S> y = a.val();
  for (int i = 0; i < y.size(); ++i) y(i) = y(i) > S(0) ? y(i) * std::log(y(i)) : S(0);
  const int self = t.push(std::move(y));
  t.node(self).back = [self, ai = a.id](Tape<S>& t) {
    const Mat<S>& x = t.value(ai);
    Mat<S>& out = t.node(ai).grad;
    for (int i = 0; i < x.size(); ++i)
      if (x(i) > S(0)) out(i) += t.grad(self)(i) * (std::log(x(i)) + S(1));
  };
  return {&t, self};
}

/// Elementwise division by a positive 1 x 1 scalar variable.
template <typename S>
Var<S> div_scalar(Var<S> m, Var<S> s) {
  if (s.val().size() != 1) throw ValidationError("div_scalar: divisor must be 1 x 1");
  Tape<S>& t = *m.tape;
  const int self = t.push(m.val() / s.val()(0, 0));
  t.node(self).back = [self, mi = m.id, si = s.id](Tape<S>& t) {
    const S sv = t.value(si)(0, 0);
    t.node(mi).grad += t.grad(self) / sv;
    t.node(si).grad(0, 0) -= t.grad(self).cwiseProduct(t.value(self)).sum() / sv;
  };
  return {&t, self};
}

}  // namespace ad

}  // namespace ecgfwd
