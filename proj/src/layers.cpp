#include "evclip/layers.hpp"

#include <cmath>

namespace evclip {

Linear make_linear(const std::string& name, int in, int out, Rng& rng) {
  Linear l = make_zero_linear(name, in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index j = 0; j < l.weight.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < l.weight.value.rows(); ++i) l.weight.value(i, j) = rng.uniform(-bound, bound);
  }
  return l;
}

Linear make_zero_linear(const std::string& name, int in, int out) {
  return Linear{Parameter{name + ".weight", Eigen::MatrixXd::Zero(in, out)},
                Parameter{name + ".bias", Eigen::MatrixXd::Zero(1, out)}};
}

ad::Var linear(ad::Tape& tape, const ad::Var& x, const Linear& layer) {
  return ad::add_broadcast(ad::matmul(x, tape.param(layer.weight)), tape.param(layer.bias));
}

}  // namespace evclip
