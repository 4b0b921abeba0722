#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "evclip/autodiff.hpp"
#include "evclip/embedding.hpp"
#include "evclip/encoders.hpp"
#include "evclip/parameter.hpp"

namespace evclip {

/// p^c = alpha * (W z^t + b).
struct ContextGeneratorParams {
  Parameter weight;  ///< d x d_z
  Parameter bias;    ///< d x 1
  Parameter alpha;   ///< 1 x 1

  ParameterRefs parameters() { return {&weight, &bias, &alpha}; }
  ConstParameterRefs parameters() const { return {&weight, &bias, &alpha}; }
};

/// W ~ U(-1/sqrt(d_z), 1/sqrt(d_z)), b = 0, alpha = 1.
ContextGeneratorParams init_context_generator(int latent_dim, int embed_dim, std::uint64_t seed);

/// Mean of z over (t, y, x), one value per channel.
Eigen::VectorXd global_pool(const LatentFeature& z);

Embedding project_context(const Eigen::VectorXd& pooled, const ContextGeneratorParams& params);
ad::Var project_context(ad::Tape& tape, const ad::Var& pooled, const ContextGeneratorParams& params);

/// (p + sum_j r_j) / (T + 1) over the columns of frame_feats (d x T).
Embedding aggregate_video(const Eigen::MatrixXd& frame_feats, const Embedding& prompt);
ad::Var aggregate_video(const ad::Var& frame_feats, const ad::Var& prompt);

/// Prompt-free video feature: (1/T) sum_j r_j.
Embedding baseline_video_feature(const Eigen::MatrixXd& frame_feats);

}  // namespace evclip
