#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "evclip/encoders.hpp"
#include "evclip/rng.hpp"

namespace evclip::test {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

/// Central-difference gradient of f at x, entry by entry.
inline Eigen::MatrixXd numeric_gradient(const std::function<double(const Eigen::MatrixXd&)>& f, Eigen::MatrixXd x,
                                        double h = 1e-5) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f(x);
    x.data()[i] = saved - h;
    const double down = f(x);
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-12});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Small encoder geometry for fast tests: 16x16x3 frames, 4x4 latent grid.
inline EncoderDims tiny_dims() {
  EncoderDims d;
  d.embed_dim = 12;
  d.latent_dim = 6;
  d.latent_height = 4;
  d.latent_width = 4;
  d.frame_height = 16;
  d.frame_width = 16;
  d.channels = 3;
  return d;
}

inline VideoClip random_clip(const EncoderDims& d, int frames, Rng& rng, int label = 0) {
  VideoClip v;
  v.channels = d.channels;
  v.height = d.frame_height;
  v.width = d.frame_width;
  v.label = label;
  v.id = "clip";
  v.frames.resize(v.pixels_per_frame(), frames);
  for (Eigen::Index i = 0; i < v.frames.size(); ++i) v.frames.data()[i] = rng.uniform();
  return v;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(reinterpret_cast<std::uintptr_t>(this) ^ static_cast<std::uint64_t>(std::hash<std::string>{}(tag)));
    path_ = std::filesystem::temp_directory_path() / ("evclip_" + tag + "_" + std::to_string(rng.next_u64() % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace evclip::test
