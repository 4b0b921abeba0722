#include "evclip/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "evclip/error.hpp"
#include "evclip/rng.hpp"

namespace evclip {

namespace {

constexpr double kDenseGain = 1.0;
constexpr double kRegionGain = 4.0;
constexpr double kVisualBiasStd = 0.1;
constexpr double kVideoGain = 3.0;
constexpr double kVideoBiasStd = 0.1;
constexpr int kRegionGrid = 8;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void EncoderDims::validate() const {
  if (embed_dim <= 0) throw ConfigError("encoder dims: embed_dim (d) must be positive");
  if (latent_dim <= 0) throw ConfigError("encoder dims: latent_dim (d_z) must be positive");
  if (channels <= 0) throw ConfigError("encoder dims: channels must be positive");
  if (latent_height <= 0 || latent_width <= 0 || frame_height <= 0 || frame_width <= 0) {
    throw ConfigError("encoder dims: spatial sizes must be positive");
  }
  if (frame_height % latent_height != 0 || frame_width % latent_width != 0) {
    throw ConfigError("encoder dims: latent grid must divide the frame size");
  }
  const int sy = frame_height / latent_height;
  const int sx = frame_width / latent_width;
  if (sy != sx) throw ConfigError("encoder dims: H/h must equal W/w");
  if (!is_power_of_two(sy) || sy < 4) {
    throw ConfigError("encoder dims: H/h must be a power of two >= 4, got " + std::to_string(sy));
  }
}

Eigen::MatrixXd FrozenEncoderSet::encode_frames(const Eigen::MatrixXd& frames) const {
  Eigen::MatrixXd out(dims().embed_dim, frames.cols());
  for (Eigen::Index j = 0; j < frames.cols(); ++j) out.col(j) = encode_frame(frames.col(j));
  return out;
}

std::string text_prompt(const std::string& label) { return "A video of " + label; }

ToyEncoderSet::ToyEncoderSet(std::uint64_t seed, const EncoderDims& dims) : seed_(seed), dims_(dims) {
  dims_.validate();
  const int d = dims_.embed_dim;
  const int c = dims_.channels;
  const int hh = dims_.frame_height;
  const int ww = dims_.frame_width;
  const Eigen::Index n = static_cast<Eigen::Index>(c) * hh * ww;

  Rng rng(mix_seed(seed, 1));
  visual_weight_.resize(d, n);
  const double dense_scale = kDenseGain / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int k = 0; k < d; ++k) visual_weight_(k, j) = dense_scale * rng.normal();
  }
  // Region term: coordinate k reads block (k mod regions) of the frame.
  const int grid_y = std::min(kRegionGrid, hh);
  const int grid_x = std::min(kRegionGrid, ww);
  const int regions = grid_y * grid_x;
  std::vector<int> region_size(static_cast<std::size_t>(regions), 0);
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < ww; ++x) ++region_size[static_cast<std::size_t>((y * grid_y / hh) * grid_x + x * grid_x / ww)];
  }
  for (int k = 0; k < d; ++k) {
    const int region = k % regions;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double w = sign * kRegionGain /
                     (static_cast<double>(region_size[static_cast<std::size_t>(region)]) * c);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < hh; ++y) {
        for (int x = 0; x < ww; ++x) {
          if ((y * grid_y / hh) * grid_x + x * grid_x / ww != region) continue;
          visual_weight_(k, (static_cast<Eigen::Index>(ch) * hh + y) * ww + x) += w;
        }
      }
    }
  }
  visual_bias_.resize(d);
  for (int k = 0; k < d; ++k) visual_bias_(k) = kVisualBiasStd * rng.normal();

  Rng vrng(mix_seed(seed, 2));
  const int cells = dims_.latent_height * dims_.latent_width;
  const int pooled = 2 * c;
  // One weight block per spatial cell; time steps share it so the latent
  // tracks content rather than clip position.
  video_weight_.resize(dims_.latent_dim, static_cast<Eigen::Index>(pooled) * cells);
  const double vscale = kVideoGain / std::sqrt(static_cast<double>(pooled));
  for (Eigen::Index j = 0; j < video_weight_.cols(); ++j) {
    for (int k = 0; k < dims_.latent_dim; ++k) video_weight_(k, j) = vscale * vrng.normal();
  }
  video_bias_.resize(dims_.latent_dim, cells);
  for (Eigen::Index j = 0; j < cells; ++j) {
    for (int k = 0; k < dims_.latent_dim; ++k) video_bias_(k, j) = kVideoBiasStd * vrng.normal();
  }
}

Embedding ToyEncoderSet::encode_frame(const Eigen::Ref<const Eigen::VectorXd>& frame) const {
  if (frame.size() != visual_weight_.cols()) {
    throw ConfigError("encode_frame: expected " + std::to_string(visual_weight_.cols()) +
                      " values (C x H x W = " + std::to_string(dims_.channels) + "x" +
                      std::to_string(dims_.frame_height) + "x" + std::to_string(dims_.frame_width) +
                      "), got " + std::to_string(frame.size()));
  }
  Embedding pre = visual_weight_ * frame + visual_bias_;
  return pre.array().tanh().matrix();
}

Embedding ToyEncoderSet::encode_text(const std::string& label) const {
  if (label.empty()) throw DomainError("encode_text: empty label");
  const std::string prompt = text_prompt(label);
  const std::uint64_t h = fnv1a(prompt.data(), prompt.size(), 0xcbf29ce484222325ULL ^ seed_);
  Rng rng(mix_seed(h, 3));
  Embedding out(dims_.embed_dim);
  for (int k = 0; k < dims_.embed_dim; ++k) out(k) = rng.normal();
  return out;
}

LatentFeature ToyEncoderSet::encode_video_latent(const VideoClip& clip) const {
  const int t = clip.num_frames();
  if (t < 2 || t % 2 != 0) {
    throw DomainError("encode_video_latent: frame count must be even (got " + std::to_string(t) +
                      "); sample an even number of frames");
  }
  if (clip.channels != dims_.channels || clip.height != dims_.frame_height ||
      clip.width != dims_.frame_width || clip.frames.rows() != clip.pixels_per_frame()) {
    throw ConfigError("encode_video_latent: clip shape does not match encoder input");
  }
  const int h = dims_.latent_height;
  const int w = dims_.latent_width;
  const int cell_h = dims_.frame_height / h;
  const int cell_w = dims_.frame_width / w;
  const int c = dims_.channels;
  const int pooled = 2 * c;
  const double inv_area = 1.0 / (static_cast<double>(cell_h) * cell_w);

  LatentFeature z;
  z.channels = dims_.latent_dim;
  z.time = t / 2;
  z.height = h;
  z.width = w;
  z.values.resize(dims_.latent_dim, static_cast<Eigen::Index>(z.time) * h * w);
  Eigen::VectorXd p(pooled);
  for (int tt = 0; tt < z.time; ++tt) {
    for (int cy = 0; cy < h; ++cy) {
      for (int cx = 0; cx < w; ++cx) {
        for (int f = 0; f < 2; ++f) {
          const auto frame = clip.frames.col(2 * tt + f);
          for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (int y = cy * cell_h; y < (cy + 1) * cell_h; ++y) {
              for (int x = cx * cell_w; x < (cx + 1) * cell_w; ++x) {
                acc += frame((static_cast<Eigen::Index>(ch) * dims_.frame_height + y) * dims_.frame_width + x);
              }
            }
            p(f * c + ch) = acc * inv_area;
          }
        }
        const int cell = cy * w + cx;
        const Eigen::VectorXd pre =
            video_weight_.middleCols(static_cast<Eigen::Index>(cell) * pooled, pooled) * p + video_bias_.col(cell);
        z.values.col((tt * h + cy) * w + cx) = pre.array().tanh().matrix();
      }
    }
  }
  return z;
}

Eigen::MatrixXd ToyEncoderSet::visual_backward(const Eigen::MatrixXd& /*frames*/,
                                               const Eigen::MatrixXd& embeddings,
                                               const Eigen::MatrixXd& grad_embeddings) const {
  const Eigen::MatrixXd local =
      grad_embeddings.cwiseProduct((1.0 - embeddings.array().square()).matrix());
  return visual_weight_.transpose() * local;
}

std::shared_ptr<const ToyEncoderSet> make_toy_encoders(std::uint64_t seed, const EncoderDims& dims) {
  return std::make_shared<const ToyEncoderSet>(seed, dims);
}

}  // namespace evclip
