#pragma once

// Synthetic action videos: a bright square on a noisy static background.
// Each class places the square at its own spot on a ring around the frame
// centre and swings it along its own direction; darkness scales every pixel.

#include <cstdint>
#include <string>
#include <vector>

#include "evclip/encoders.hpp"

namespace evclip {

struct SynthSpec {
  int classes = 4;       ///< M
  int per_class = 20;
  int frames = 16;       ///< video length
  int height = 32;
  int width = 32;
  int channels = 3;
  double darkness = 1.0;  ///< pixel multiplier in (0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthDataset {
  std::vector<std::string> class_names;
  std::vector<VideoClip> videos;  ///< ordered class-major, ids "<class>_<k>"
};

std::string synth_class_name(int index);

SynthDataset generate_synthetic(const SynthSpec& spec);

}  // namespace evclip
