#include <doctest.h>

#include <cmath>
#include <vector>

#include "evclip/error.hpp"
#include "evclip/losses.hpp"
#include "support.hpp"

using namespace evclip;

namespace {

double ce_oracle(const Eigen::MatrixXd& v, const Eigen::MatrixXd& t, const std::vector<int>& labels, double tau) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    std::vector<double> logits;
    for (Eigen::Index j = 0; j < t.cols(); ++j) {
      logits.push_back(v.col(i).dot(t.col(j)) / (v.col(i).norm() * t.col(j).norm()) / tau);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    total += std::log(z) - logits[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
  }
  return total / static_cast<double>(v.cols());
}

double cons_oracle(const Eigen::MatrixXd& r) {
  const Eigen::Index n = r.cols();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double c = r.col(i).dot(r.col(j)) / (r.col(i).norm() * r.col(j).norm());
      sum += std::log(std::max((c + 1.0) / 2.0, kConsistencyEps));
    }
  }
  return -sum * 2.0 / static_cast<double>(n * (n - 1));
}

}  // namespace

TEST_CASE("identical cosines give ln M") {
  for (int m : {2, 4, 8}) {
    Eigen::MatrixXd video = Eigen::MatrixXd::Zero(m, 1);
    video(0, 0) = 1.0;
    const Eigen::MatrixXd t = Eigen::MatrixXd::Ones(m, m);  // every text column equal
    const std::vector<int> labels{m - 1};
    CHECK(contrastive_ce_loss(video, t, labels, 0.01) == doctest::Approx(std::log(m)).epsilon(1e-12));
  }
  CHECK(std::log(4.0) == doctest::Approx(1.38629436).epsilon(1e-8));
}

TEST_CASE("cross-entropy matches the direct formula") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd v = test::random_matrix(7, 5, rng);
    const Eigen::MatrixXd t = test::random_matrix(7, 4, rng);
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) labels.push_back(static_cast<int>(rng.below(4)));
    const double tau = 0.05 + rng.uniform();
    const double got = contrastive_ce_loss(v, t, labels, tau);
    CHECK(got == doctest::Approx(ce_oracle(v, t, labels, tau)).epsilon(1e-12));
    CHECK(got >= 0.0);
    // Cosine logits ignore feature scale.
    CHECK(contrastive_ce_loss(3.0 * v, 0.5 * t, labels, tau) == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("consistency closed forms") {
  Eigen::MatrixXd same(3, 4);
  same.colwise() = Eigen::Vector3d(1, 2, 3);
  CHECK(consistency_loss(same) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(consistency_loss(same)) < 1e-12);

  Eigen::MatrixXd ortho(2, 2);
  ortho << 1, 0, 0, 1;
  CHECK(consistency_loss(ortho) == doctest::Approx(0.69314718).epsilon(1e-8));

  Eigen::MatrixXd anti(2, 2);
  anti << 1, -1, 0, 0;
  CHECK(consistency_loss(anti) == doctest::Approx(-std::log(kConsistencyEps)).epsilon(1e-12));
  CHECK(consistency_loss(anti) == doctest::Approx(13.8155).epsilon(1e-5));
}

TEST_CASE("consistency matches the pairwise formula and stays bounded") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const Eigen::MatrixXd r = test::random_matrix(6, n, rng);
    const double got = consistency_loss(r);
    CHECK(got == doctest::Approx(cons_oracle(r)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= -std::log(kConsistencyEps) + 1e-12);
    // Shifting every frame along a shared direction raises agreement.
    Eigen::MatrixXd shifted = r;
    shifted.colwise() += 100.0 * Eigen::VectorXd::Ones(6);
    CHECK(consistency_loss(shifted) < got + 1e-12);
  }
}

TEST_CASE("total loss and argument checks") {
  CHECK(total_loss(1.5, 2.0, 0.1) == doctest::Approx(1.7));
  CHECK(total_loss(1.5, 2.0, 0.0) == 1.5);
  ad::Tape tape(false);
  const ad::Var t = total_loss(tape.constant(Eigen::MatrixXd::Constant(1, 1, 1.5)),
                               tape.constant(Eigen::MatrixXd::Constant(1, 1, 2.0)), 10.0);
  CHECK(t.value()(0, 0) == doctest::Approx(21.5));
  const Eigen::MatrixXd v = Eigen::MatrixXd::Ones(3, 1);
  const std::vector<int> labels{0};
  CHECK_THROWS_AS(contrastive_ce_loss(v, v, labels, 0.0), ConfigError);
  CHECK_THROWS_AS(contrastive_ce_loss(v, v, labels, -1.0), ConfigError);
  CHECK_THROWS_AS(consistency_loss(v), DomainError);
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(3);
  const Eigen::MatrixXd t = test::random_matrix(5, 3, rng);
  const std::vector<int> labels{2, 0};
  const Eigen::MatrixXd v0 = test::random_matrix(5, 2, rng);
  const auto loss = [&](const Eigen::MatrixXd& v) {
    return total_loss(contrastive_ce_loss(v, t, labels, 0.5), consistency_loss(v), 0.3);
  };
  ad::Tape tape;
  const ad::Var v = tape.variable(v0);
  const ad::Var l = total_loss(contrastive_ce_loss(v, tape.constant(t), labels, 0.5), consistency_loss(v), 0.3);
  tape.backward(l);
  CHECK(test::max_rel_diff(tape.grad(v), test::numeric_gradient(loss, v0)) < 1e-7);
}

TEST_CASE("cross-entropy bounds on random batches") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 2 + static_cast<int>(rng.below(7));
    const double tau = 0.01 + 0.5 * rng.uniform();
    const Eigen::MatrixXd v = test::random_matrix(6, 4, rng);
    const Eigen::MatrixXd t = test::random_matrix(6, m, rng);
    std::vector<int> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(m))));
    const double l = contrastive_ce_loss(v, t, labels, tau);
    CHECK(l >= 0.0);
    CHECK(l <= std::log(m) + 2.0 / tau + 1e-9);
  }
}

TEST_CASE("logit shift leaves the cross-entropy unchanged") {
  Rng rng(5);
  const Eigen::MatrixXd logits = test::random_matrix(3, 5, rng, 10.0);
  Eigen::MatrixXd shifted = logits;
  for (Eigen::Index i = 0; i < 3; ++i) shifted.row(i).array() += 100.0 * rng.normal();
  const std::vector<int> labels{4, 0, 2};
  ad::Tape tape(false);
  const double a = ad::softmax_cross_entropy(tape.constant(logits), labels).value()(0, 0);
  const double b = ad::softmax_cross_entropy(tape.constant(shifted), labels).value()(0, 0);
  CHECK(std::abs(a - b) < 1e-10);
}
