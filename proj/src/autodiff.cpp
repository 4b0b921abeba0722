#include "evclip/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "evclip/error.hpp"

namespace evclip::ad {

const Matrix& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, grad_enabled_});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const Parameter& p) {
  if (!grad_enabled_) return constant(p.value);
  if (auto it = params_.find(&p); it != params_.end()) return {this, it->second};
  Var v = variable(p.value);
  params_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  auto& node = nodes_[static_cast<std::size_t>(v.id())];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(const Var& output) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw DomainError("backward: output must be a 1x1 scalar");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  accumulate(output, Matrix::Ones(1, 1));
  for (auto i = static_cast<std::ptrdiff_t>(output.id()); i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.backward && node.grad.size() != 0) node.backward(node.grad);
  }
}

Matrix Tape::grad(const Var& v) const {
  const auto& node = nodes_[static_cast<std::size_t>(v.id())];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

Matrix Tape::grad(const Parameter& p) const {
  auto it = params_.find(&p);
  if (it == params_.end()) return Matrix::Zero(p.value.rows(), p.value.cols());
  return grad(Var(const_cast<Tape*>(this), it->second));
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ConfigError("matmul: inner dimensions differ");
  Tape& t = a.tape();
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tape& t = a.tape();
  return t.record(a.value() + b.value(), {a, b}, [&t, a, b](const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tape& t = a.tape();
  return t.record(a.value() - b.value(), {a, b}, [&t, a, b](const Matrix& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) t.accumulate(b, -g);
  });
}

Var add_broadcast(const Var& a, const Var& b) {
  Tape& t = a.tape();
  if (b.rows() == 1 && b.cols() == a.cols()) {
    Matrix out = a.value().rowwise() + b.value().row(0);
    return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix& g) {
      t.accumulate(a, g);
      if (b.requires_grad()) t.accumulate(b, g.colwise().sum());
    });
  }
  if (b.cols() == 1 && b.rows() == a.rows()) {
    Matrix out = a.value().colwise() + b.value().col(0);
    return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix& g) {
      t.accumulate(a, g);
      if (b.requires_grad()) t.accumulate(b, g.rowwise().sum());
    });
  }
  throw ConfigError("add_broadcast: bias shape does not match");
}

Var cwise_mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "cwise_mul");
  Tape& t = a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [&t, a, b](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var mul_columns(const Var& a, const Var& b) {
  if (b.cols() != 1 || b.rows() != a.rows()) throw ConfigError("mul_columns: shape mismatch");
  Tape& t = a.tape();
  Matrix out = a.value().array().colwise() * b.value().col(0).array();
  return t.record(std::move(out), {a, b}, [&t, a, b](const Matrix& g) {
    if (a.requires_grad()) {
      t.accumulate(a, (g.array().colwise() * b.value().col(0).array()).matrix());
    }
    if (b.requires_grad()) {
      t.accumulate(b, g.cwiseProduct(a.value()).rowwise().sum());
    }
  });
}

Var scale(const Var& a, double s) {
  Tape& t = a.tape();
  return t.record(a.value() * s, {a}, [&t, a, s](const Matrix& g) { t.accumulate(a, g * s); });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw ConfigError("scale_by: scale must be 1x1");
  Tape& t = a.tape();
  return t.record(a.value() * s.value()(0, 0), {a, s}, [&t, a, s](const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * s.value()(0, 0));
    if (s.requires_grad()) t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
  });
}

Var tanh(const Var& a) {
  Tape& t = a.tape();
  Matrix out = a.value().array().tanh().matrix();
  Matrix slope = (1.0 - out.array().square()).matrix();
  return t.record(std::move(out), {a}, [&t, a, slope = std::move(slope)](const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(slope));
  });
}

Var gelu(const Var& a) {
  Tape& t = a.tape();
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  Matrix out = a.value().unaryExpr([](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return t.record(std::move(out), {a}, [&t, a, inv_sqrt_2pi](const Matrix& g) {
    Matrix d = a.value().unaryExpr([inv_sqrt_2pi](double x) {
      return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var transpose(const Var& a) {
  Tape& t = a.tape();
  return t.record(a.value().transpose(), {a},
                  [&t, a](const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var sum(const Var& a) {
  Tape& t = a.tape();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), {a}, [&t, a](const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var row_sum(const Var& a) {
  Tape& t = a.tape();
  return t.record(a.value().rowwise().sum(), {a}, [&t, a](const Matrix& g) {
    t.accumulate(a, g.col(0).replicate(1, a.cols()));
  });
}

Var gather(const Var& a, Index rows, Index cols, std::vector<Index> index) {
  if (static_cast<Index>(index.size()) != rows * cols) {
    throw ConfigError("gather: index size does not match output shape");
  }
  Tape& t = a.tape();
  const Matrix& src = a.value();
  Matrix out(rows, cols);
  for (Index k = 0; k < rows * cols; ++k) {
    const Index from = index[static_cast<std::size_t>(k)];
    if (from < 0 || from >= src.size()) throw ConfigError("gather: index out of range");
    out.data()[k] = src.data()[from];
  }
  return t.record(std::move(out), {a}, [&t, a, idx = std::move(index)](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) ga.data()[idx[k]] += g.data()[k];
    t.accumulate(a, ga);
  });
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) throw ConfigError("reshape: element count differs");
  Tape& t = a.tape();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return t.record(std::move(out), {a}, [&t, a](const Matrix& g) {
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), a.rows(), a.cols()));
  });
}

Var gather_rows(const Var& a, const std::vector<Index>& order) {
  const Index n = static_cast<Index>(order.size());
  std::vector<Index> index(static_cast<std::size_t>(n * a.cols()));
  for (Index c = 0; c < a.cols(); ++c) {
    for (Index k = 0; k < n; ++k) index[static_cast<std::size_t>(c * n + k)] = order[static_cast<std::size_t>(k)] + c * a.rows();
  }
  return gather(a, n, a.cols(), std::move(index));
}

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ConfigError("slice_rows: out of range");
  Tape& t = a.tape();
  return t.record(a.value().middleRows(start, count), {a}, [&t, a, start, count](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.middleRows(start, count) = g;
    t.accumulate(a, ga);
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ConfigError("slice_cols: out of range");
  Tape& t = a.tape();
  return t.record(a.value().middleCols(start, count), {a}, [&t, a, start, count](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.middleCols(start, count) = g;
    t.accumulate(a, ga);
  });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("hcat: no inputs");
  Tape& t = parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ConfigError("hcat: row count mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [&t, inputs](const Matrix& g) {
    Index offset = 0;
    for (const auto& p : inputs) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(offset, p.cols()));
      offset += p.cols();
    }
  });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("vcat: no inputs");
  Tape& t = parts.front().tape();
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ConfigError("vcat: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [&t, inputs](const Matrix& g) {
    Index offset = 0;
    for (const auto& p : inputs) {
      if (p.requires_grad()) t.accumulate(p, g.middleRows(offset, p.rows()));
      offset += p.rows();
    }
  });
}

Var softmax_rows(const Var& a) {
  Tape& t = a.tape();
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) {
    const double mx = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  Var y = t.constant(out);
  return t.record(std::move(out), {a}, [&t, a, y](const Matrix& g) {
    const Matrix& s = y.value();
    Matrix ga(s.rows(), s.cols());
    for (Index i = 0; i < s.rows(); ++i) {
      const double dot = g.row(i).dot(s.row(i));
      ga.row(i) = s.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
    }
    t.accumulate(a, ga);
  });
}

Var softmax_all(const Var& a) {
  Tape& t = a.tape();
  const double mx = a.value().maxCoeff();
  Matrix out = (a.value().array() - mx).exp().matrix();
  out /= out.sum();
  Var y = t.constant(out);
  return t.record(std::move(out), {a}, [&t, a, y](const Matrix& g) {
    const Matrix& s = y.value();
    const double dot = g.cwiseProduct(s).sum();
    t.accumulate(a, s.cwiseProduct((g.array() - dot).matrix()));
  });
}

Var minmax(const Var& a) {
  Tape& t = a.tape();
  const Matrix& v = a.value();
  Index imin = 0;
  Index imax = 0;
  for (Index k = 1; k < v.size(); ++k) {
    if (v.data()[k] < v.data()[imin]) imin = k;
    if (v.data()[k] > v.data()[imax]) imax = k;
  }
  const double lo = v.data()[imin];
  const double range = v.data()[imax] - lo;
  if (!(range > 0.0)) {
    return t.constant(Matrix::Ones(v.rows(), v.cols()));
  }
  Matrix out = ((v.array() - lo) / range).matrix();
  out.data()[imin] = 0.0;
  out.data()[imax] = 1.0;
  Var y = t.constant(out);
  return t.record(std::move(out), {a}, [&t, a, y, imin, imax, range](const Matrix& g) {
    const double s = g.sum();
    const double q = g.cwiseProduct(y.value()).sum();
    Matrix ga = g / range;
    ga.data()[imin] += (q - s) / range;
    ga.data()[imax] -= q / range;
    t.accumulate(a, ga);
  });
}

Var cosine_columns(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw ConfigError("cosine_columns: embedding dimensions differ");
  Tape& t = a.tape();
  Eigen::VectorXd na = a.value().colwise().norm().transpose();
  Eigen::VectorXd nb = b.value().colwise().norm().transpose();
  for (Index i = 0; i < na.size(); ++i) {
    if (!(na(i) > 0.0)) throw DomainError("cosine: column " + std::to_string(i) + " of 'a' has zero norm");
  }
  for (Index j = 0; j < nb.size(); ++j) {
    if (!(nb(j) > 0.0)) throw DomainError("cosine: column " + std::to_string(j) + " of 'b' has zero norm");
  }
  Matrix ahat = a.value() * na.cwiseInverse().asDiagonal();
  Matrix bhat = b.value() * nb.cwiseInverse().asDiagonal();
  Matrix out = ahat.transpose() * bhat;
  Var c = t.constant(out);
  return t.record(std::move(out), {a, b},
                  [&t, a, b, c, ahat = std::move(ahat), bhat = std::move(bhat), na, nb](const Matrix& g) {
                    const Matrix& cos = c.value();
                    if (a.requires_grad()) {
                      Matrix ga = bhat * g.transpose();
                      const Eigen::VectorXd w = g.cwiseProduct(cos).rowwise().sum();
                      ga -= ahat * w.asDiagonal();
                      ga = ga * na.cwiseInverse().asDiagonal();
                      t.accumulate(a, ga);
                    }
                    if (b.requires_grad()) {
                      Matrix gb = ahat * g;
                      const Eigen::VectorXd w = g.cwiseProduct(cos).colwise().sum().transpose();
                      gb -= bhat * w.asDiagonal();
                      gb = gb * nb.cwiseInverse().asDiagonal();
                      t.accumulate(b, gb);
                    }
                  });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Matrix& l = logits.value();
  if (static_cast<Index>(labels.size()) != l.rows()) {
    throw DomainError("cross entropy: label count does not match batch size");
  }
  Tape& t = logits.tape();
  Matrix probs(l.rows(), l.cols());
  double loss = 0.0;
  for (Index i = 0; i < l.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= l.cols()) throw DomainError("cross entropy: label out of range");
    const double mx = l.row(i).maxCoeff();
    const auto shifted = (l.row(i).array() - mx).exp();
    const double z = shifted.sum();
    probs.row(i) = (shifted / z).matrix();
    loss += std::log(z) + mx - l(i, y);
  }
  const double n = static_cast<double>(l.rows());
  std::vector<int> ys(labels.begin(), labels.end());
  return t.record(Matrix::Constant(1, 1, loss / n), {logits},
                  [&t, logits, probs = std::move(probs), ys = std::move(ys), n](const Matrix& g) {
                    Matrix gl = probs;
                    for (std::size_t i = 0; i < ys.size(); ++i) gl(static_cast<Index>(i), ys[i]) -= 1.0;
                    t.accumulate(logits, gl * (g(0, 0) / n));
                  });
}

Var consistency_from_cosines(const Var& cosines, double eps) {
  const Matrix& c = cosines.value();
  const Index n = c.rows();
  if (n != c.cols() || n < 2) throw DomainError("consistency loss: need a square matrix with T >= 2");
  Tape& t = cosines.tape();
  const double k = 2.0 / (static_cast<double>(n) * static_cast<double>(n - 1));
  double loss = 0.0;
  Matrix local = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double s = 0.5 * (c(i, j) + 1.0);
      if (s > eps) {
        loss -= std::log(s);
        local(i, j) = -k * 0.5 / s;
      } else {
        loss -= std::log(eps);
      }
    }
  }
  return t.record(Matrix::Constant(1, 1, k * loss), {cosines},
                  [&t, cosines, local = std::move(local)](const Matrix& g) {
                    t.accumulate(cosines, local * g(0, 0));
                  });
}

}  // namespace evclip::ad
