#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>

#include "evclip/embedding.hpp"

namespace evclip {

/// T frames of C x H x W pixels. Frame j is column j of `frames`, laid out
/// channel-major: index c*H*W + y*W + x.
struct VideoClip {
  int channels = 0;
  int height = 0;
  int width = 0;
  Eigen::MatrixXd frames;
  int label = -1;
  std::string id;

  int num_frames() const { return static_cast<int>(frames.cols()); }
  Eigen::Index pixels_per_frame() const {
    return static_cast<Eigen::Index>(channels) * height * width;
  }
};

/// Video-model latent of shape d_z x T_half x h x w. Channel c is row c;
/// column (t*h + y)*w + x.
struct LatentFeature {
  int channels = 0;
  int time = 0;
  int height = 0;
  int width = 0;
  Eigen::MatrixXd values;

  double at(int c, int t, int y, int x) const { return values(c, (t * height + y) * width + x); }
};

struct EncoderDims {
  int embed_dim = 64;      ///< d
  int latent_dim = 32;     ///< d_z
  int latent_height = 4;   ///< h
  int latent_width = 4;    ///< w
  int frame_height = 32;   ///< H
  int frame_width = 32;    ///< W
  int channels = 3;        ///< C

  /// Throws ConfigError unless H/h == W/w is a power of two >= 4.
  void validate() const;
  int upscale() const { return frame_height / latent_height; }
};

/// Frozen visual, textual and video encoders. Implementations are immutable
/// after construction and safe to call concurrently.
class FrozenEncoderSet {
 public:
  virtual ~FrozenEncoderSet() = default;

  virtual const EncoderDims& dims() const = 0;
  /// Pixel range the encoders expect after preprocessing.
  virtual double input_min() const { return 0.0; }
  virtual double input_max() const { return 1.0; }

  /// f_v on one frame of C*H*W values.
  virtual Embedding encode_frame(const Eigen::Ref<const Eigen::VectorXd>& frame) const = 0;
  /// f_t on the templated prompt "A video of {label}".
  virtual Embedding encode_text(const std::string& label) const = 0;
  virtual LatentFeature encode_video_latent(const VideoClip& clip) const = 0;

  /// Vector-Jacobian product of f_v: given frames (columns), their embeddings
  /// and dL/d(embeddings), returns dL/d(frames). Encoder weights stay fixed.
  virtual Eigen::MatrixXd visual_backward(const Eigen::MatrixXd& frames,
                                          const Eigen::MatrixXd& embeddings,
                                          const Eigen::MatrixXd& grad_embeddings) const = 0;

  /// Encodes every column with encode_frame.
  Eigen::MatrixXd encode_frames(const Eigen::MatrixXd& frames) const;
};

/// The caption template applied before text encoding.
std::string text_prompt(const std::string& label);

/// Seeded stand-ins for the pretrained backbones.
///
/// visual: tanh(W x + b), W = dense Gaussian part + a region term in which
///   output coordinate k reads a signed average of one spatial block;
/// textual: Gaussian vector seeded by a hash of the templated prompt;
/// video: per latent cell (y, x), tanh(A_cell p + c_cell) where p holds the
///   per-channel means of the cell's pixel block in frames 2t and 2t+1
///   (weights shared along the time axis).
class ToyEncoderSet final : public FrozenEncoderSet {
 public:
  ToyEncoderSet(std::uint64_t seed, const EncoderDims& dims);

  const EncoderDims& dims() const override { return dims_; }
  Embedding encode_frame(const Eigen::Ref<const Eigen::VectorXd>& frame) const override;
  Embedding encode_text(const std::string& label) const override;
  LatentFeature encode_video_latent(const VideoClip& clip) const override;
  Eigen::MatrixXd visual_backward(const Eigen::MatrixXd& frames, const Eigen::MatrixXd& embeddings,
                                  const Eigen::MatrixXd& grad_embeddings) const override;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  EncoderDims dims_;
  Eigen::MatrixXd visual_weight_;   // d x (C*H*W)
  Eigen::VectorXd visual_bias_;     // d
  Eigen::MatrixXd video_weight_;    // d_z x (2C * cells), one d_z x 2C block per cell
  Eigen::MatrixXd video_bias_;      // d_z x cells
};

std::shared_ptr<const ToyEncoderSet> make_toy_encoders(std::uint64_t seed, const EncoderDims& dims);

}  // namespace evclip
