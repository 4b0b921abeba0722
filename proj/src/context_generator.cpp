#include "evclip/context_generator.hpp"

#include <cmath>

#include "evclip/error.hpp"
#include "evclip/rng.hpp"

namespace evclip {

ContextGeneratorParams init_context_generator(int latent_dim, int embed_dim, std::uint64_t seed) {
  if (latent_dim <= 0 || embed_dim <= 0) throw ConfigError("context generator: dimensions must be positive");
  Rng rng(mix_seed(seed, 21));
  ContextGeneratorParams p;
  p.weight = Parameter{"context_generator.W", Eigen::MatrixXd(embed_dim, latent_dim)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  for (Eigen::Index j = 0; j < latent_dim; ++j) {
    for (Eigen::Index i = 0; i < embed_dim; ++i) p.weight.value(i, j) = rng.uniform(-bound, bound);
  }
  p.bias = Parameter{"context_generator.b", Eigen::MatrixXd::Zero(embed_dim, 1)};
  p.alpha = Parameter{"context_generator.alpha", Eigen::MatrixXd::Ones(1, 1)};
  return p;
}

Eigen::VectorXd global_pool(const LatentFeature& z) {
  if (z.values.cols() == 0) throw DomainError("global_pool: empty latent");
  Eigen::VectorXd out(z.values.rows());
  for (Eigen::Index c = 0; c < z.values.rows(); ++c) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < z.values.cols(); ++j) acc += z.values(c, j);
    out(c) = acc / static_cast<double>(z.values.cols());
  }
  return out;
}

Embedding project_context(const Eigen::VectorXd& pooled, const ContextGeneratorParams& params) {
  ad::Tape tape(false);
  return project_context(tape, tape.constant(pooled), params).value().col(0);
}

ad::Var project_context(ad::Tape& tape, const ad::Var& pooled, const ContextGeneratorParams& params) {
  if (pooled.rows() != params.weight.value.cols() || pooled.cols() != 1) {
    throw ConfigError("project_context: pooled latent has " + std::to_string(pooled.rows()) +
                      " channels, projection expects " + std::to_string(params.weight.value.cols()));
  }
  ad::Var affine = ad::matmul(tape.param(params.weight), pooled) + tape.param(params.bias);
  return ad::scale_by(affine, tape.param(params.alpha));
}

Embedding aggregate_video(const Eigen::MatrixXd& frame_feats, const Embedding& prompt) {
  if (frame_feats.cols() == 0) throw DomainError("aggregate_video: no frame embeddings");
  if (prompt.size() != frame_feats.rows()) throw DomainError("aggregate_video: prompt dimension mismatch");
  Embedding acc = prompt;
  for (Eigen::Index j = 0; j < frame_feats.cols(); ++j) acc += frame_feats.col(j);
  return acc / static_cast<double>(frame_feats.cols() + 1);
}

ad::Var aggregate_video(const ad::Var& frame_feats, const ad::Var& prompt) {
  if (frame_feats.cols() == 0) throw DomainError("aggregate_video: no frame embeddings");
  return ad::scale(ad::row_sum(frame_feats) + prompt, 1.0 / static_cast<double>(frame_feats.cols() + 1));
}

Embedding baseline_video_feature(const Eigen::MatrixXd& frame_feats) {
  if (frame_feats.cols() == 0) throw DomainError("baseline_video_feature: no frame embeddings");
  Embedding acc = Embedding::Zero(frame_feats.rows());
  for (Eigen::Index j = 0; j < frame_feats.cols(); ++j) acc += frame_feats.col(j);
  return acc / static_cast<double>(frame_feats.cols());
}

}  // namespace evclip
