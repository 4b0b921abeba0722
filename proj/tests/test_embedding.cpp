#include <doctest.h>

#include <cmath>
#include <vector>

#include "evclip/embedding.hpp"
#include "evclip/error.hpp"
#include "support.hpp"

using namespace evclip;

namespace {
Embedding vec(std::initializer_list<double> v) {
  Embedding e(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) e(i++) = x;
  return e;
}
}  // namespace

TEST_CASE("cosine similarity closed forms") {
  const Embedding v = vec({0.3, -1.2, 2.5});
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == 0.0);
  CHECK(cosine_similarity(vec({1, 1}), vec({1, 0})) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(cosine_similarity(vec({1, 1}), vec({1, 0})) == doctest::Approx(0.70710678).epsilon(1e-8));
}

TEST_CASE("cosine distance closed forms") {
  const Embedding v = vec({0.3, -1.2, 2.5});
  CHECK(std::abs(cosine_distance(v, v)) < 1e-15);
  CHECK(cosine_distance(v, Embedding(-v)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cosine_distance(vec({1, 1}), vec({1, 0})) == doctest::Approx(0.29289322).epsilon(1e-8));
}

TEST_CASE("zero norm argument is named") {
  const Embedding z = Embedding::Zero(3);
  const Embedding v = vec({1, 2, 3});
  CHECK_THROWS_AS(cosine_similarity(z, v), DomainError);
  try {
    cosine_similarity(z, v);
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  try {
    cosine_distance(v, z);
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(cosine_similarity(vec({1, 2}), vec({1, 2, 3})), DomainError);
}

TEST_CASE("float inputs accumulate in double") {
  Eigen::VectorXf a(2), b(2);
  a << 1.0f, 1.0f;
  b << 1.0f, 0.0f;
  CHECK(cosine_similarity(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-7));
}

TEST_CASE("class centroid") {
  CHECK(class_centroid(std::vector<Embedding>{vec({1, 0})}) == vec({1, 0}));
  CHECK(class_centroid(std::vector<Embedding>{vec({1, 0}), vec({0, 1})}) == vec({0.5, 0.5}));
  CHECK_THROWS_AS(class_centroid(std::vector<Embedding>{}), DomainError);
}

TEST_CASE("pairwise mean distance matches the double loop") {
  Rng rng(5);
  std::vector<Embedding> pts;
  for (int i = 0; i < 6; ++i) pts.push_back(test::random_matrix(7, 1, rng));
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      sum += 1.0 - pts[i].dot(pts[j]) / (pts[i].norm() * pts[j].norm());
      ++pairs;
    }
  }
  CHECK(pairwise_mean_distance(pts) == doctest::Approx(sum / pairs).epsilon(1e-13));
  CHECK_THROWS_AS(pairwise_mean_distance(std::vector<Embedding>{vec({1})}), DomainError);
}

TEST_CASE("cosine properties on random vectors") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const Embedding a = test::random_matrix(5, 1, rng);
    const Embedding b = test::random_matrix(5, 1, rng);
    const double s = cosine_similarity(a, b);
    CHECK(s >= -1.0 - 1e-15);
    CHECK(s <= 1.0 + 1e-15);
    CHECK(s == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-15));
    const double k = 0.1 + 10.0 * rng.uniform();
    CHECK(cosine_similarity(Embedding(k * a), b) == doctest::Approx(s).epsilon(1e-12));
    const double d = cosine_distance(a, b);
    CHECK(d >= -1e-15);
    CHECK(d <= 2.0 + 1e-15);
  }
}

TEST_CASE("columns helper") {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const auto cols = columns(m);
  REQUIRE(cols.size() == 3);
  CHECK(cols[1] == vec({2, 5}));
}
