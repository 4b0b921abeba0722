#pragma once

// On-disk video datasets: a manifest plus one PPM per frame.
//
//   manifest.txt   classes = a,b,c / channels / height / width, then one
//                  `video = <id> <label> <relative dir> <frames>` per video
//   <dir>/frame_0000.ppm ...

#include <filesystem>
#include <string>
#include <vector>

#include "evclip/encoders.hpp"
#include "evclip/synth.hpp"

namespace evclip {

struct VideoDataset {
  std::vector<std::string> class_names;
  std::vector<VideoClip> videos;

  std::vector<int> labels() const;
};

inline constexpr const char* kManifestName = "manifest.txt";

std::filesystem::path frame_path(const std::filesystem::path& video_dir, int frame);

/// Writes the frames and manifest under `dir`; `notes` become manifest comments.
void write_dataset(const std::filesystem::path& dir, const std::vector<std::string>& class_names,
                   const std::vector<VideoClip>& videos, const std::vector<std::string>& notes = {});
VideoDataset load_dataset(const std::filesystem::path& dir);

/// Frames of one video directory (frame_*.ppm in name order).
VideoClip load_video_dir(const std::filesystem::path& dir, int channels);

}  // namespace evclip
