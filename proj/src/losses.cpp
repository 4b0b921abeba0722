#include "evclip/losses.hpp"

#include "evclip/error.hpp"

namespace evclip {

ad::Var contrastive_ce_loss(const ad::Var& video_feats, const ad::Var& text_feats, std::span<const int> labels,
                            double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("contrastive loss: temperature must be positive");
  const ad::Var logits = ad::scale(ad::cosine_columns(video_feats, text_feats), 1.0 / temperature);
  return ad::softmax_cross_entropy(logits, labels);
}

double contrastive_ce_loss(const Eigen::MatrixXd& video_feats, const Eigen::MatrixXd& text_feats,
                           std::span<const int> labels, double temperature) {
  ad::Tape tape(false);
  return contrastive_ce_loss(tape.constant(video_feats), tape.constant(text_feats), labels, temperature)
      .value()(0, 0);
}

ad::Var consistency_loss(const ad::Var& frame_feats) {
  if (frame_feats.cols() < 2) throw DomainError("consistency loss: need at least 2 frames");
  return ad::consistency_from_cosines(ad::cosine_columns(frame_feats, frame_feats), kConsistencyEps);
}

double consistency_loss(const Eigen::MatrixXd& frame_feats) {
  ad::Tape tape(false);
  return consistency_loss(tape.constant(frame_feats)).value()(0, 0);
}

ad::Var total_loss(const ad::Var& ce, const ad::Var& consistency, double lambda) {
  if (lambda < 0.0) throw ConfigError("total loss: lambda must be non-negative");
  return ce + ad::scale(consistency, lambda);
}

}  // namespace evclip
