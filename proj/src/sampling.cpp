#include "evclip/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evclip/error.hpp"

namespace evclip {

std::vector<int> uniform_indices(int window, int frames) {
  if (frames < 1 || window < 1) throw DomainError("uniform_indices: window and frame count must be positive");
  if (frames == 1) return {0};
  std::vector<int> out(static_cast<std::size_t>(frames));
  const long long num = window - 1;
  const long long den = frames - 1;
  for (int k = 0; k < frames; ++k) {
    // floor(k*num/den + 1/2) in exact integer arithmetic.
    out[static_cast<std::size_t>(k)] = static_cast<int>((2 * k * num + den) / (2 * den));
  }
  return out;
}

SampledClip sample_frames(const VideoClip& video, int frames, int window, Mode mode, Rng& rng) {
  const int length = video.num_frames();
  if (length < 1) throw DomainError("sample_frames: video '" + video.id + "' has no frames");
  if (window < frames) throw ConfigError("sample_frames: clip window L must be >= T");
  SampledClip out;
  out.looped = length < window;
  const int span = std::max(length - window, 0);
  if (mode == Mode::kTrain) {
    out.start = static_cast<int>(rng.below(static_cast<std::uint64_t>(span) + 1));
  } else {
    out.start = span / 2;
  }
  out.clip.channels = video.channels;
  out.clip.height = video.height;
  out.clip.width = video.width;
  out.clip.label = video.label;
  out.clip.id = video.id;
  out.clip.frames.resize(video.frames.rows(), frames);
  const auto idx = uniform_indices(window, frames);
  for (int k = 0; k < frames; ++k) {
    out.clip.frames.col(k) = video.frames.col((out.start + idx[static_cast<std::size_t>(k)]) % length);
  }
  return out;
}

VideoClip resize_bilinear(const VideoClip& clip, int height, int width) {
  if (height < 1 || width < 1) throw ConfigError("resize: target size must be positive");
  if (height == clip.height && width == clip.width) return clip;
  VideoClip out = clip;
  out.height = height;
  out.width = width;
  out.frames.resize(static_cast<Eigen::Index>(clip.channels) * height * width, clip.frames.cols());
  const double sy = static_cast<double>(clip.height) / height;
  const double sx = static_cast<double>(clip.width) / width;
  struct Tap {
    int i0, i1;
    double w1;
  };
  auto taps = [](int n_out, int n_in, double s) {
    std::vector<Tap> t(static_cast<std::size_t>(n_out));
    for (int o = 0; o < n_out; ++o) {
      double src = (o + 0.5) * s - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, n_in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return t;
  };
  const auto ty = taps(height, clip.height, sy);
  const auto tx = taps(width, clip.width, sx);
  const Eigen::Index in_plane = static_cast<Eigen::Index>(clip.height) * clip.width;
  const Eigen::Index out_plane = static_cast<Eigen::Index>(height) * width;
  for (Eigen::Index f = 0; f < clip.frames.cols(); ++f) {
    for (int c = 0; c < clip.channels; ++c) {
      const auto src = [&](int y, int x) { return clip.frames(c * in_plane + static_cast<Eigen::Index>(y) * clip.width + x, f); };
      for (int y = 0; y < height; ++y) {
        const Tap& a = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
          const Tap& b = tx[static_cast<std::size_t>(x)];
          const double top = src(a.i0, b.i0) * (1.0 - b.w1) + src(a.i0, b.i1) * b.w1;
          const double bottom = src(a.i1, b.i0) * (1.0 - b.w1) + src(a.i1, b.i1) * b.w1;
          out.frames(c * out_plane + static_cast<Eigen::Index>(y) * width + x, f) = top * (1.0 - a.w1) + bottom * a.w1;
        }
      }
    }
  }
  return out;
}

CropBox crop_box(int height, int width, int crop_height, int crop_width, Mode mode, Rng& rng) {
  if (crop_height > height || crop_width > width) {
    throw ConfigError("crop " + std::to_string(crop_height) + "x" + std::to_string(crop_width) +
                      " is larger than the resized frame " + std::to_string(height) + "x" + std::to_string(width));
  }
  const int my = height - crop_height;
  const int mx = width - crop_width;
  if (mode == Mode::kTest) return {(my + 1) / 2, (mx + 1) / 2};
  const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(my) + 1));
  const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(mx) + 1));
  return {top, left};
}

VideoClip crop(const VideoClip& clip, const CropBox& box, int crop_height, int crop_width) {
  if (box.top < 0 || box.left < 0 || box.top + crop_height > clip.height || box.left + crop_width > clip.width) {
    throw ConfigError("crop: box outside the frame");
  }
  VideoClip out = clip;
  out.height = crop_height;
  out.width = crop_width;
  out.frames.resize(static_cast<Eigen::Index>(clip.channels) * crop_height * crop_width, clip.frames.cols());
  const Eigen::Index in_plane = static_cast<Eigen::Index>(clip.height) * clip.width;
  const Eigen::Index out_plane = static_cast<Eigen::Index>(crop_height) * crop_width;
  for (Eigen::Index f = 0; f < clip.frames.cols(); ++f) {
    for (int c = 0; c < clip.channels; ++c) {
      for (int y = 0; y < crop_height; ++y) {
        for (int x = 0; x < crop_width; ++x) {
          out.frames(c * out_plane + static_cast<Eigen::Index>(y) * crop_width + x, f) =
              clip.frames(c * in_plane + static_cast<Eigen::Index>(y + box.top) * clip.width + (x + box.left), f);
        }
      }
    }
  }
  return out;
}

VideoClip preprocess(const VideoClip& clip, const PreprocessConfig& config, Mode mode, Rng& rng) {
  if (clip.height < 1 || clip.width < 1) throw DomainError("preprocess: empty frame");
  VideoClip resized = resize_bilinear(clip, config.resize_height, config.resize_width);
  const CropBox box = crop_box(resized.height, resized.width, config.crop_height, config.crop_width, mode, rng);
  if (box.top == 0 && box.left == 0 && config.crop_height == resized.height && config.crop_width == resized.width) {
    return resized;
  }
  return crop(resized, box, config.crop_height, config.crop_width);
}

Episode sample_episode(const std::vector<int>& labels, int classes, int shots, std::uint64_t seed) {
  if (shots < 1) throw ConfigError("episode: shots K must be >= 1");
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= classes) throw DomainError("episode: label out of range");
    by_class[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
  }
  Rng rng(mix_seed(seed, 31));
  Episode ep;
  for (int c = 0; c < classes; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (static_cast<int>(members.size()) < shots) {
      throw DomainError("episode: class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                        " videos, fewer than K = " + std::to_string(shots));
    }
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[static_cast<std::size_t>(rng.below(i))]);
    }
    ep.train.insert(ep.train.end(), members.begin(), members.begin() + shots);
    ep.eval.insert(ep.eval.end(), members.begin() + shots, members.end());
  }
  std::sort(ep.train.begin(), ep.train.end());
  std::sort(ep.eval.begin(), ep.eval.end());
  return ep;
}

}  // namespace evclip
