#pragma once

// Mask prompt generator: a shallow Swin-style decoder that turns the video
// latent z (d_z x T/2 x h x w) into an H x W pixel weight field in [0, 1].
//
//   z --time projection--> d_z x h x w
//     --[plain W-MSA block, shifted W-MSA block, 2x patch expand] x (log2(H/h) - 2)
//     --4x patch expand--> C_f x H x W --linear--> 1 x H x W
//     --softmax over pixels--> MinMax --> mask
//
// Feature maps are token matrices: row y*grid_w + x, one column per channel.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "evclip/autodiff.hpp"
#include "evclip/encoders.hpp"
#include "evclip/layers.hpp"

namespace evclip {

struct MaskGeneratorShape {
  int latent_dim = 32;
  int latent_time = 2;
  int latent_height = 4;
  int latent_width = 4;
  int frame_height = 32;
  int frame_width = 32;

  static MaskGeneratorShape from(const EncoderDims& dims, int frames);
  void validate() const;
  /// Number of 2x expand stages, log2(H/h) - 2.
  int num_stages() const;
};

/// Plain or shifted windowed self-attention block with feedforward.
struct AttentionBlockParams {
  Linear qkv;   ///< C -> 3C
  Linear proj;  ///< C -> C, residual branch output
  Linear fc1;   ///< C -> 2C
  Linear fc2;   ///< 2C -> C, residual branch output
  int heads = 1;
};

struct PatchExpandParams {
  Linear linear;  ///< C -> out_channels * factor^2
  int factor = 2;
  int out_channels = 16;
};

struct MaskStageParams {
  AttentionBlockParams plain;
  AttentionBlockParams shifted;
  PatchExpandParams expand;
};

struct MaskGeneratorParams {
  MaskGeneratorShape shape;
  Parameter temporal;  ///< T_half x 1 weights over the time axis
  std::vector<MaskStageParams> stages;
  PatchExpandParams final_expand;
  Linear head;  ///< C_f -> 1

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;
};

/// Channel count after an expand: C/factor, floored at min(C, 16).
int expanded_channels(int channels, int factor);
/// min(4, side), reduced to the largest divisor of side when 4 does not divide it.
int window_size_for(int side);
/// channels/16 heads (at least 1), reduced until it divides channels.
int heads_for(int channels);

MaskGeneratorParams init_mask_generator(const MaskGeneratorShape& shape, std::uint64_t seed);

struct MaskPrompt {
  Eigen::MatrixXd weights;  ///< H x W, entries in [0, 1]
  int height() const { return static_cast<int>(weights.rows()); }
  int width() const { return static_cast<int>(weights.cols()); }
};

// ---- differentiable building blocks ----------------------------------------

/// z^s[c, y, x] = sum_t w_t z[c, t, y, x]; returns (h*w) x d_z tokens.
ad::Var temporal_project(ad::Tape& tape, const LatentFeature& z, const Parameter& temporal);

ad::Var window_attention_block(ad::Tape& tape, const ad::Var& x, int grid_h, int grid_w, bool shift,
                               const AttentionBlockParams& block);

/// (grid_h*grid_w) x C -> (f*grid_h * f*grid_w) x out_channels.
ad::Var patch_expand(ad::Tape& tape, const ad::Var& x, int grid_h, int grid_w, const PatchExpandParams& p);

struct MaskTrace {
  ad::Var scores;   ///< (H*W) x 1, row-major pixels, before softmax
  ad::Var softmax;  ///< (H*W) x 1, sums to 1
  ad::Var mask;     ///< (H*W) x 1, MinMax-scaled
};

MaskTrace generate_mask(ad::Tape& tape, const LatentFeature& z, const MaskGeneratorParams& params);

// ---- value-level API ----------------------------------------------------------

Eigen::MatrixXd pixel_softmax(const Eigen::MatrixXd& scores);
/// (field - min)/(max - min); a constant field yields the all-ones mask.
MaskPrompt minmax_scale(const Eigen::MatrixXd& field);
MaskPrompt generate_mask(const LatentFeature& z, const MaskGeneratorParams& params);
MaskPrompt all_ones_mask(int height, int width);

/// x~[t, c, y, x] = x[t, c, y, x] * mask[y, x].
VideoClip apply_mask(const VideoClip& clip, const MaskPrompt& mask);
/// Differentiable form: frames (C*H*W) x T, mask (H*W) x 1.
ad::Var apply_mask(const ad::Var& frames, const ad::Var& mask, int channels);

}  // namespace evclip
