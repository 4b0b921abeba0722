#pragma once

// Minimal reverse-mode differentiation over dense double matrices.
//
// A Tape records every operation as a node holding its value and a closure
// that pushes the output gradient back to its inputs. Nodes live in a deque so
// references to earlier values stay valid while the graph grows. Only nodes
// that transitively depend on a variable carry a backward closure.

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "evclip/parameter.hpp"

namespace evclip::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(const Matrix& grad_out)>;

  /// When disabled, param() yields constants and no closures are recorded.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Leaf bound to a trainable parameter; its gradient is retrievable by pointer.
  Var param(const Parameter& p);

  /// Records an op. The closure is kept only if some input requires a gradient.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool grad_enabled() const { return grad_enabled_; }

  /// Adds g into the gradient of v (no-op when v does not require one).
  void accumulate(const Var& v, const Matrix& g);

  /// Seeds d(output)/d(output) = 1 for a 1x1 output and runs all closures.
  void backward(const Var& output);

  /// Gradient of a node after backward(); zero matrix when none reached it.
  Matrix grad(const Var& v) const;
  Matrix grad(const Parameter& p) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> params_;
  bool grad_enabled_;
};

// ---- operations --------------------------------------------------------
// Matrices are column-major; "linear index" below means Eigen's storage order.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// a + b where b is 1 x cols (added to every row) or rows x 1 (to every column).
Var add_broadcast(const Var& a, const Var& b);
Var cwise_mul(const Var& a, const Var& b);
/// Scales column j of a (n x m) elementwise by the column vector b (n x 1).
Var mul_columns(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a times a 1x1 variable.
Var scale_by(const Var& a, const Var& s);
Var tanh(const Var& a);
Var gelu(const Var& a);
Var transpose(const Var& a);
Var sum(const Var& a);
/// Sum over columns: n x m -> n x 1.
Var row_sum(const Var& a);

/// out(k) = a(index[k]) for a rows x cols output. Backward scatter-adds.
Var gather(const Var& a, Index rows, Index cols, std::vector<Index> index);
/// Reinterprets storage as rows x cols (same element count).
Var reshape(const Var& a, Index rows, Index cols);
/// out.row(k) = a.row(order[k]).
Var gather_rows(const Var& a, const std::vector<Index>& order);
Var slice_rows(const Var& a, Index start, Index count);
Var slice_cols(const Var& a, Index start, Index count);
Var hcat(std::span<const Var> parts);
Var vcat(std::span<const Var> parts);

/// Row-wise softmax with max subtraction.
Var softmax_rows(const Var& a);
/// Softmax over every entry of a.
Var softmax_all(const Var& a);
/// (a - min) / (max - min); constant a gives all ones with zero gradient.
Var minmax(const Var& a);

/// out(i, j) = cos(a.col(i), b.col(j)). Zero-norm columns throw DomainError.
Var cosine_columns(const Var& a, const Var& b);
/// Mean over rows of -log softmax(logits)(row, label). Logits are N x M.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);
/// -(2/(T(T-1))) sum_{i<j} log(max((c_ij + 1)/2, eps)) for a T x T cosine matrix.
Var consistency_from_cosines(const Var& cosines, double eps);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }

}  // namespace evclip::ad
