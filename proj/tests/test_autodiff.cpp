#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "evclip/autodiff.hpp"
#include "evclip/error.hpp"
#include "support.hpp"

using namespace evclip;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

using Op = std::function<Var(Tape&, const std::vector<Var>&)>;

// Contracts op(inputs) with a fixed random weight so every output entry
// contributes, then compares tape gradients with central differences.
void check_gradients(const Op& op, const std::vector<Matrix>& inputs, double tol = 1e-7, std::uint64_t seed = 1) {
  Matrix weight;
  {
    Tape probe(false);
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(probe.constant(m));
    const Var out = op(probe, vars);
    Rng rng(seed);
    weight = test::random_matrix(out.rows(), out.cols(), rng);
  }
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  const Var loss = ad::sum(ad::cwise_mul(op(tape, vars), tape.constant(weight)));
  tape.backward(loss);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto f = [&](const Matrix& x) {
      Tape t(false);
      std::vector<Var> vs;
      for (std::size_t j = 0; j < inputs.size(); ++j) vs.push_back(t.constant(j == k ? x : inputs[j]));
      return op(t, vs).value().cwiseProduct(weight).sum();
    };
    const Matrix numeric = test::numeric_gradient(f, inputs[k]);
    CAPTURE(k);
    CHECK(test::max_rel_diff(tape.grad(vars[k]), numeric) < tol);
  }
}

Matrix rnd(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  return test::random_matrix(r, c, rng, scale);
}

}  // namespace

TEST_CASE("elementwise and linear ops") {
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::matmul(v[0], v[1]); }, {rnd(3, 4, 1), rnd(4, 2, 2)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return v[0] + v[1]; }, {rnd(3, 4, 3), rnd(3, 4, 4)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return v[0] - v[1]; }, {rnd(3, 4, 5), rnd(3, 4, 6)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::add_broadcast(v[0], v[1]); },
                  {rnd(3, 4, 7), rnd(1, 4, 8)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::add_broadcast(v[0], v[1]); },
                  {rnd(3, 4, 9), rnd(3, 1, 10)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::cwise_mul(v[0], v[1]); }, {rnd(2, 5, 11), rnd(2, 5, 12)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::mul_columns(v[0], v[1]); }, {rnd(4, 3, 13), rnd(4, 1, 14)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::scale(v[0], -2.5); }, {rnd(3, 3, 15)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::scale_by(v[0], v[1]); }, {rnd(3, 2, 16), rnd(1, 1, 17)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::tanh(v[0]); }, {rnd(3, 3, 18)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::gelu(v[0]); }, {rnd(3, 3, 19, 2.0)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::transpose(v[0]); }, {rnd(2, 5, 20)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::sum(v[0]); }, {rnd(2, 5, 21)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::row_sum(v[0]); }, {rnd(4, 3, 22)});
}

TEST_CASE("indexing ops") {
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::gather(v[0], 2, 3, {0, 0, 5, 3, 1, 1}); },
                  {rnd(3, 2, 30)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::reshape(v[0], 2, 6); }, {rnd(3, 4, 31)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::gather_rows(v[0], {2, 0, 2, 1}); }, {rnd(3, 2, 32)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::slice_rows(v[0], 1, 2); }, {rnd(4, 3, 33)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::slice_cols(v[0], 1, 2); }, {rnd(3, 4, 34)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::hcat(v); }, {rnd(3, 2, 35), rnd(3, 1, 36)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::vcat(v); }, {rnd(2, 3, 37), rnd(1, 3, 38)});
}

TEST_CASE("softmax ops") {
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::softmax_rows(v[0]); }, {rnd(3, 4, 40, 2.0)});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::softmax_all(v[0]); }, {rnd(6, 1, 41, 2.0)});
  Tape t(false);
  const Var s = ad::softmax_all(t.constant(rnd(5, 3, 42, 30.0)));
  CHECK(s.value().sum() == doctest::Approx(1.0).epsilon(1e-14));
  const Var r = ad::softmax_rows(t.constant(rnd(4, 3, 43, 30.0)));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(r.value().row(i).sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("minmax values and gradient") {
  Tape t(false);
  Matrix a(4, 1);
  a << 0.3, -1.0, 2.0, 0.5;
  const Var m = ad::minmax(t.constant(a));
  CHECK(m.value()(1, 0) == 0.0);
  CHECK(m.value()(2, 0) == 1.0);
  CHECK(m.value()(0, 0) == doctest::Approx(1.3 / 3.0).epsilon(1e-15));
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::minmax(v[0]); }, {a});
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::minmax(v[0]); }, {rnd(5, 2, 44)});
}

TEST_CASE("minmax on a constant field is all ones with zero gradient") {
  Tape t;
  const Var x = t.variable(Matrix::Constant(3, 2, 0.7));
  const Var m = ad::minmax(x);
  CHECK(m.value() == Matrix::Ones(3, 2));
  t.backward(ad::sum(m));
  CHECK(t.grad(x) == Matrix::Zero(3, 2));
}

TEST_CASE("cosine columns and cross entropy") {
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::cosine_columns(v[0], v[1]); },
                  {rnd(5, 3, 50), rnd(5, 4, 51)});
  const std::vector<int> labels = {2, 0, 1};
  check_gradients([&](Tape&, const std::vector<Var>& v) { return ad::softmax_cross_entropy(v[0], labels); },
                  {rnd(3, 4, 52, 3.0)});
  Tape t(false);
  CHECK_THROWS_AS(ad::cosine_columns(t.constant(Matrix::Zero(3, 1)), t.constant(rnd(3, 1, 53))), DomainError);
}

TEST_CASE("consistency from cosines") {
  Matrix c(3, 3);
  c << 1.0, 0.2, -0.4, 0.2, 1.0, 0.5, -0.4, 0.5, 1.0;
  check_gradients([](Tape&, const std::vector<Var>& v) { return ad::consistency_from_cosines(v[0], 1e-6); }, {c});
  Tape t(false);
  Matrix anti(2, 2);
  anti << 1.0, -1.0, -1.0, 1.0;
  CHECK(ad::consistency_from_cosines(t.constant(anti), 1e-6).value()(0, 0) ==
        doctest::Approx(-std::log(1e-6)).epsilon(1e-12));
}

TEST_CASE("constants carry no closures and get no gradient") {
  Tape t;
  const Var c = t.constant(rnd(2, 2, 60));
  const Var v = t.variable(rnd(2, 2, 61));
  const Var y = ad::matmul(c, c);
  CHECK_FALSE(y.requires_grad());
  t.backward(ad::sum(ad::cwise_mul(y, v)));
  CHECK(t.grad(c) == Matrix::Zero(2, 2));
  CHECK(t.grad(v) == y.value());
}

TEST_CASE("parameters map to a single leaf and accumulate") {
  const Parameter p{"p", rnd(2, 2, 62)};
  Tape t;
  const Var a = t.param(p);
  const Var b = t.param(p);
  CHECK(a.id() == b.id());
  t.backward(ad::sum(a + b));
  CHECK(t.grad(p) == Matrix::Constant(2, 2, 2.0));
  Tape off(false);
  CHECK_FALSE(off.param(p).requires_grad());
}

TEST_CASE("reused intermediates sum their gradients") {
  check_gradients(
      [](Tape&, const std::vector<Var>& v) {
        const Var h = ad::tanh(v[0]);
        return ad::cwise_mul(h, h) + ad::matmul(h, ad::transpose(h));
      },
      {rnd(3, 3, 70)});
}
