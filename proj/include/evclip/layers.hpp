#pragma once

#include <cstdint>
#include <string>

#include "evclip/autodiff.hpp"
#include "evclip/parameter.hpp"
#include "evclip/rng.hpp"

namespace evclip {

/// Affine map applied to row vectors: y = x W + b, W is in x out, b is 1 x out.
struct Linear {
  Parameter weight;
  Parameter bias;

  int in_features() const { return static_cast<int>(weight.value.rows()); }
  int out_features() const { return static_cast<int>(weight.value.cols()); }
};

/// Weights ~ U(-1/sqrt(in), 1/sqrt(in)), zero bias.
Linear make_linear(const std::string& name, int in, int out, Rng& rng);
/// All-zero weights and bias.
Linear make_zero_linear(const std::string& name, int in, int out);

ad::Var linear(ad::Tape& tape, const ad::Var& x, const Linear& layer);

}  // namespace evclip
