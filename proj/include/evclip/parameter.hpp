#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace evclip {

/// A named trainable tensor. Values are held in double; checkpoints store f32.
struct Parameter {
  std::string name;
  Eigen::MatrixXd value;
};

/// Flat, ordered view over the trainable tensors of one or more modules.
using ParameterRefs = std::vector<Parameter*>;
using ConstParameterRefs = std::vector<const Parameter*>;

inline Eigen::Index total_size(const ConstParameterRefs& refs) {
  Eigen::Index n = 0;
  for (const auto* p : refs) n += p->value.size();
  return n;
}

}  // namespace evclip
