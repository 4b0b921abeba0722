#pragma once

// Clip sampling and frame preprocessing for training and testing.

#include <cstdint>
#include <vector>

#include "evclip/encoders.hpp"
#include "evclip/rng.hpp"

namespace evclip {

enum class Mode { kTrain, kTest };

/// round-half-up(k (L-1)/(T-1)) for k = 0..T-1.
std::vector<int> uniform_indices(int window, int frames);

struct SampledClip {
  VideoClip clip;
  int start = 0;
  bool looped = false;  ///< video was shorter than the window and got loop-padded
};

/// Picks an L-frame window (random start for train, centred for test) and
/// samples T frames uniformly inside it. `video` holds every frame of the
/// source as columns.
SampledClip sample_frames(const VideoClip& video, int frames, int window, Mode mode, Rng& rng);

/// Bilinear resize (half-pixel centres, edge clamp). Same size is a copy.
VideoClip resize_bilinear(const VideoClip& clip, int height, int width);

struct CropBox {
  int top = 0;
  int left = 0;
};

/// Test: centred, an odd margin gives the extra pixel to the top/left.
/// Train: uniform offsets from rng.
CropBox crop_box(int height, int width, int crop_height, int crop_width, Mode mode, Rng& rng);
VideoClip crop(const VideoClip& clip, const CropBox& box, int crop_height, int crop_width);

struct PreprocessConfig {
  int resize_height = 40;
  int resize_width = 52;
  int crop_height = 32;
  int crop_width = 32;
};

VideoClip preprocess(const VideoClip& clip, const PreprocessConfig& config, Mode mode, Rng& rng);

struct Episode {
  std::vector<int> train;  ///< indices into the video list, K per class
  std::vector<int> eval;   ///< remaining indices
};

/// Seeded K-shot split over videos labelled 0..classes-1.
Episode sample_episode(const std::vector<int>& labels, int classes, int shots, std::uint64_t seed);

}  // namespace evclip
