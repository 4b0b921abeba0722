#include "evclip/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "evclip/binary_io.hpp"
#include "evclip/error.hpp"

namespace evclip {

std::vector<unsigned char> encode_ppm(const Image& image) {
  if (image.width < 1 || image.height < 1 ||
      image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw FormatError("ppm: pixel buffer does not match " + std::to_string(image.width) + "x" +
                      std::to_string(image.height));
  }
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), image.rgb.begin(), image.rgb.end());
  return out;
}

Image decode_ppm(const std::vector<unsigned char>& bytes, const std::string& what) {
  std::size_t pos = 0;
  const auto fail = [&](const std::string& msg) -> void {
    throw FormatError(what + ": " + msg + " (byte offset " + std::to_string(pos) + ")");
  };
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto number = [&](const char* field) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail(std::string("expected ") + field);
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1 << 20)) fail(std::string("implausible ") + field);
    }
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') fail("not a binary PPM (magic P6)");
  pos = 2;
  Image img;
  img.width = number("width");
  img.height = number("height");
  const int maxval = number("maxval");
  if (img.width < 1 || img.height < 1) fail("empty image");
  if (maxval != 255) fail("only maxval 255 is supported, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("missing separator after header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() - pos < n) fail("truncated pixel data");
  if (bytes.size() - pos > n) {
    pos += n;
    fail("trailing bytes after pixel data");
  }
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) { bin::write_file(path, encode_ppm(image)); }

Image read_ppm(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("image '" + path.string() + "' does not exist");
  return decode_ppm(bin::read_file(path), path.string());
}

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image frame_to_image(const Eigen::Ref<const Eigen::VectorXd>& frame, int channels, int height, int width) {
  if (channels != 1 && channels != 3) throw ConfigError("ppm export supports 1 or 3 channels, got " + std::to_string(channels));
  const Eigen::Index plane = static_cast<Eigen::Index>(height) * width;
  if (frame.size() != plane * channels) throw ConfigError("frame size does not match C x H x W");
  Image img{width, height, std::vector<unsigned char>(static_cast<std::size_t>(plane) * 3)};
  for (Eigen::Index p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) {
      img.rgb[static_cast<std::size_t>(p * 3 + c)] = quantize(frame((channels == 1 ? 0 : c) * plane + p));
    }
  }
  return img;
}

Eigen::VectorXd image_to_frame(const Image& image, int channels) {
  if (channels != 1 && channels != 3) throw ConfigError("ppm import supports 1 or 3 channels, got " + std::to_string(channels));
  const Eigen::Index plane = static_cast<Eigen::Index>(image.height) * image.width;
  Eigen::VectorXd frame(plane * channels);
  for (Eigen::Index p = 0; p < plane; ++p) {
    for (int c = 0; c < channels; ++c) frame(c * plane + p) = image.rgb[static_cast<std::size_t>(p * 3 + c)] / 255.0;
  }
  return frame;
}

Image mask_to_image(const MaskPrompt& mask) {
  Image img{mask.width(), mask.height(), {}};
  img.rgb.reserve(static_cast<std::size_t>(mask.width()) * mask.height() * 3);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const unsigned char v = quantize(mask.weights(y, x));
      img.rgb.insert(img.rgb.end(), {v, v, v});
    }
  }
  return img;
}

}  // namespace evclip
