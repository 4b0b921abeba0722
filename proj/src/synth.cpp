#include "evclip/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "evclip/error.hpp"
#include "evclip/rng.hpp"

namespace evclip {

namespace {

constexpr double kBackgroundLo = 0.15;
constexpr double kBackgroundHi = 0.45;
constexpr double kFrameNoise = 0.03;
constexpr double kRingRadius = 0.28;
constexpr double kSwing = 0.12;
constexpr double kJitter = 1.0 / 16.0;

}  // namespace

void SynthSpec::validate() const {
  if (classes < 1) throw ConfigError("synth: classes must be >= 1");
  if (per_class < 1) throw ConfigError("synth: per_class must be >= 1");
  if (frames < 1) throw ConfigError("synth: frames must be >= 1");
  if (height < 8 || width < 8) throw ConfigError("synth: frames must be at least 8x8");
  if (channels < 1) throw ConfigError("synth: channels must be >= 1");
  if (!(darkness > 0.0 && darkness <= 1.0)) throw ConfigError("synth: darkness must lie in (0, 1]");
}

std::string synth_class_name(int index) {
  static const char* const kNames[] = {"waving", "jumping", "clapping", "running",
                                       "throwing", "climbing", "rowing", "skipping"};
  if (index >= 0 && index < 8) return kNames[index];
  return "action" + std::to_string(index);
}

SynthDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  SynthDataset ds;
  const int hh = spec.height;
  const int ww = spec.width;
  const int side = std::max(2, std::min(hh, ww) / 4);
  const Eigen::Index plane = static_cast<Eigen::Index>(hh) * ww;
  for (int c = 0; c < spec.classes; ++c) ds.class_names.push_back(synth_class_name(c));

  for (int c = 0; c < spec.classes; ++c) {
    const double angle = 2.0 * std::numbers::pi * c / spec.classes;
    const double cy = 0.5 * hh + kRingRadius * hh * std::sin(angle);
    const double cx = 0.5 * ww + kRingRadius * ww * std::cos(angle);
    // Swing direction turns with the class index at a different rate than the
    // ring position, so neighbouring classes move differently.
    const double swing_angle = 2.0 * angle + 0.25 * std::numbers::pi;
    const double dy = std::sin(swing_angle);
    const double dx = std::cos(swing_angle);
    for (int k = 0; k < spec.per_class; ++k) {
      Rng rng(mix_seed(mix_seed(spec.seed, 17 + static_cast<std::uint64_t>(c)), static_cast<std::uint64_t>(k)));
      VideoClip v;
      v.channels = spec.channels;
      v.height = hh;
      v.width = ww;
      v.label = c;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03d", ds.class_names[static_cast<std::size_t>(c)].c_str(), k);
      v.id = id;
      Eigen::VectorXd background(v.pixels_per_frame());
      for (Eigen::Index i = 0; i < background.size(); ++i) background(i) = rng.uniform(kBackgroundLo, kBackgroundHi);
      const double oy = rng.uniform(-kJitter, kJitter) * hh;
      const double ox = rng.uniform(-kJitter, kJitter) * ww;
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      v.frames.resize(v.pixels_per_frame(), spec.frames);
      for (int f = 0; f < spec.frames; ++f) {
        const double s = std::sin(phase + 2.0 * std::numbers::pi * f / std::max(spec.frames, 8));
        const double py = cy + oy + kSwing * hh * s * dy;
        const double px = cx + ox + kSwing * ww * s * dx;
        const int top = std::clamp(static_cast<int>(std::lround(py - 0.5 * side)), 0, hh - side);
        const int left = std::clamp(static_cast<int>(std::lround(px - 0.5 * side)), 0, ww - side);
        for (int ch = 0; ch < spec.channels; ++ch) {
          for (int y = 0; y < hh; ++y) {
            for (int x = 0; x < ww; ++x) {
              const Eigen::Index i = ch * plane + static_cast<Eigen::Index>(y) * ww + x;
              double value = background(i) + rng.uniform(-kFrameNoise, kFrameNoise);
              if (y >= top && y < top + side && x >= left && x < left + side) value = 1.0;
              v.frames(i, f) = std::clamp(value, 0.0, 1.0) * spec.darkness;
            }
          }
        }
      }
      ds.videos.push_back(std::move(v));
    }
  }
  return ds;
}

}  // namespace evclip
