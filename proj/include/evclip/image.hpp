#pragma once

// Binary PPM (P6, maxval 255) images and conversions to frame columns.

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

#include "evclip/mask_generator.hpp"

namespace evclip {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;  ///< row-major, 3 bytes per pixel

  friend bool operator==(const Image&, const Image&) = default;
};

std::vector<unsigned char> encode_ppm(const Image& image);
Image decode_ppm(const std::vector<unsigned char>& bytes, const std::string& what = "ppm");
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// round(clamp(v, 0, 1) * 255).
unsigned char quantize(double v);

/// Frame column (C*H*W, C in {1, 3}) to an RGB image; one channel is gray.
Image frame_to_image(const Eigen::Ref<const Eigen::VectorXd>& frame, int channels, int height, int width);
/// Inverse of frame_to_image up to quantisation: byte / 255.
Eigen::VectorXd image_to_frame(const Image& image, int channels);
Image mask_to_image(const MaskPrompt& mask);

}  // namespace evclip
