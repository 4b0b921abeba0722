#pragma once

// Cosine geometry over embedding vectors. Inputs may be any dense Eigen
// vector expression (float or double); all accumulation happens in double.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "evclip/error.hpp"

namespace evclip {

using Embedding = Eigen::VectorXd;

namespace detail {

template <typename Derived>
double checked_norm(const Eigen::MatrixBase<Derived>& v, const char* which) {
  const double n = v.template cast<double>().norm();
  if (!(n > 0.0)) {
    throw DomainError(std::string("cosine: argument '") + which + "' has zero norm");
  }
  return n;
}

template <typename A, typename B>
void check_same_dim(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw DomainError("embedding dimensions differ (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

template <typename A, typename B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  detail::check_same_dim(a, b);
  const double na = detail::checked_norm(a, "a");
  const double nb = detail::checked_norm(b, "b");
  return a.template cast<double>().dot(b.template cast<double>()) / (na * nb);
}

template <typename A, typename B>
double cosine_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return 1.0 - cosine_similarity(a, b);
}

/// Componentwise mean of a non-empty set of equal-length vectors.
template <typename Vec>
Embedding class_centroid(std::span<const Vec> members) {
  if (members.empty()) throw DomainError("class_centroid: empty member list");
  const auto dim = members.front().size();
  Embedding sum = Embedding::Zero(dim);
  for (const auto& m : members) {
    if (m.size() != dim) throw DomainError("class_centroid: dimension mismatch");
    sum += m.template cast<double>();
  }
  return sum / static_cast<double>(members.size());
}

template <typename Vec>
Embedding class_centroid(const std::vector<Vec>& members) {
  return class_centroid(std::span<const Vec>(members));
}

/// Mean cosine distance over all unordered pairs, 2/(M(M-1)) * sum_{i<j} d(p_i, p_j).
template <typename Vec>
double pairwise_mean_distance(std::span<const Vec> points) {
  const std::size_t m = points.size();
  if (m < 2) throw DomainError("pairwise_mean_distance: need at least 2 points");
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) sum += cosine_distance(points[i], points[j]);
  }
  return 2.0 * sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

template <typename Vec>
double pairwise_mean_distance(const std::vector<Vec>& points) {
  return pairwise_mean_distance(std::span<const Vec>(points));
}

/// Columnwise view helpers: embeddings stored as the columns of a d x N matrix.
inline std::vector<Embedding> columns(const Eigen::MatrixXd& m) {
  std::vector<Embedding> out;
  out.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.emplace_back(m.col(j));
  return out;
}

}  // namespace evclip
