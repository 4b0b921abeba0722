#pragma once

#include <Eigen/Dense>

#include <span>

#include "evclip/autodiff.hpp"

namespace evclip {

inline constexpr double kConsistencyEps = 1e-6;

/// Temperature-scaled cross-entropy over class-wise cosine logits.
/// video_feats: d x N, text_feats: d x M, labels: N entries in [0, M).
double contrastive_ce_loss(const Eigen::MatrixXd& video_feats, const Eigen::MatrixXd& text_feats,
                           std::span<const int> labels, double temperature);
ad::Var contrastive_ce_loss(const ad::Var& video_feats, const ad::Var& text_feats, std::span<const int> labels,
                            double temperature);

/// Log-penalty on rescaled pairwise frame cosines; frame_feats is d x T, T >= 2.
double consistency_loss(const Eigen::MatrixXd& frame_feats);
ad::Var consistency_loss(const ad::Var& frame_feats);

inline double total_loss(double ce, double consistency, double lambda) { return ce + lambda * consistency; }
ad::Var total_loss(const ad::Var& ce, const ad::Var& consistency, double lambda);

}  // namespace evclip
