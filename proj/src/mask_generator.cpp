#include "evclip/mask_generator.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "evclip/error.hpp"

namespace evclip {

using ad::Index;
using ad::Var;

MaskGeneratorShape MaskGeneratorShape::from(const EncoderDims& dims, int frames) {
  MaskGeneratorShape s;
  s.latent_dim = dims.latent_dim;
  s.latent_time = frames / 2;
  s.latent_height = dims.latent_height;
  s.latent_width = dims.latent_width;
  s.frame_height = dims.frame_height;
  s.frame_width = dims.frame_width;
  return s;
}

void MaskGeneratorShape::validate() const {
  if (latent_dim <= 0 || latent_time <= 0) throw ConfigError("mask generator: d_z and T/2 must be positive");
  if (latent_height <= 0 || latent_width <= 0 || frame_height % latent_height != 0 ||
      frame_width % latent_width != 0) {
    throw ConfigError("mask generator: latent grid must divide the frame size");
  }
  const int up = frame_height / latent_height;
  if (up != frame_width / latent_width || !std::has_single_bit(static_cast<unsigned>(up)) || up < 4) {
    throw ConfigError("mask generator: H/h must equal W/w and be a power of two >= 4");
  }
}

int MaskGeneratorShape::num_stages() const {
  const auto up = static_cast<unsigned>(frame_height / latent_height);
  return std::countr_zero(up) - 2;
}

int expanded_channels(int channels, int factor) {
  return std::max(channels / factor, std::min(channels, 16));
}

int window_size_for(int side) {
  int w = std::min(4, side);
  while (side % w != 0) --w;
  return w;
}

int heads_for(int channels) {
  int h = std::max(1, channels / 16);
  while (channels % h != 0) --h;
  return h;
}

namespace {

AttentionBlockParams make_block(const std::string& name, int channels, Rng& rng) {
  AttentionBlockParams b;
  b.qkv = make_linear(name + ".qkv", channels, 3 * channels, rng);
  b.proj = make_zero_linear(name + ".proj", channels, channels);
  b.fc1 = make_linear(name + ".fc1", channels, 2 * channels, rng);
  b.fc2 = make_zero_linear(name + ".fc2", 2 * channels, channels);
  b.heads = heads_for(channels);
  return b;
}

PatchExpandParams make_expand(const std::string& name, int channels, int factor, Rng& rng) {
  PatchExpandParams p;
  p.factor = factor;
  p.out_channels = expanded_channels(channels, factor);
  p.linear = make_linear(name, channels, p.out_channels * factor * factor, rng);
  return p;
}

void append(ParameterRefs& refs, Linear& l) {
  refs.push_back(&l.weight);
  refs.push_back(&l.bias);
}

void append(ParameterRefs& refs, AttentionBlockParams& b) {
  append(refs, b.qkv);
  append(refs, b.proj);
  append(refs, b.fc1);
  append(refs, b.fc2);
}

/// Row order that lays tokens out window by window, after a cyclic shift.
std::vector<Index> window_order(int grid_h, int grid_w, int win_h, int win_w, int shift_h, int shift_w) {
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(grid_h) * grid_w);
  for (int wy = 0; wy < grid_h / win_h; ++wy) {
    for (int wx = 0; wx < grid_w / win_w; ++wx) {
      for (int iy = 0; iy < win_h; ++iy) {
        for (int ix = 0; ix < win_w; ++ix) {
          const int y = (wy * win_h + iy + shift_h) % grid_h;
          const int x = (wx * win_w + ix + shift_w) % grid_w;
          order.push_back(static_cast<Index>(y) * grid_w + x);
        }
      }
    }
  }
  return order;
}

}  // namespace

ParameterRefs MaskGeneratorParams::parameters() {
  ParameterRefs refs{&temporal};
  for (auto& s : stages) {
    append(refs, s.plain);
    append(refs, s.shifted);
    append(refs, s.expand.linear);
  }
  append(refs, final_expand.linear);
  append(refs, head);
  return refs;
}

ConstParameterRefs MaskGeneratorParams::parameters() const {
  auto refs = const_cast<MaskGeneratorParams*>(this)->parameters();
  return {refs.begin(), refs.end()};
}

MaskGeneratorParams init_mask_generator(const MaskGeneratorShape& shape, std::uint64_t seed) {
  shape.validate();
  Rng rng(mix_seed(seed, 11));
  MaskGeneratorParams p;
  p.shape = shape;
  p.temporal = Parameter{"mask_generator.temporal",
                         Eigen::MatrixXd::Constant(shape.latent_time, 1, 1.0 / shape.latent_time)};
  int channels = shape.latent_dim;
  for (int s = 0; s < shape.num_stages(); ++s) {
    const std::string name = "mask_generator.stage" + std::to_string(s);
    MaskStageParams stage;
    stage.plain = make_block(name + ".plain", channels, rng);
    stage.shifted = make_block(name + ".shifted", channels, rng);
    stage.expand = make_expand(name + ".expand", channels, 2, rng);
    channels = stage.expand.out_channels;
    p.stages.push_back(std::move(stage));
  }
  p.final_expand = make_expand("mask_generator.final_expand", channels, 4, rng);
  p.head = make_linear("mask_generator.head", p.final_expand.out_channels, 1, rng);
  return p;
}

Var temporal_project(ad::Tape& tape, const LatentFeature& z, const Parameter& temporal) {
  if (temporal.value.rows() != z.time || temporal.value.cols() != 1) {
    throw ConfigError("temporal_project: expected " + std::to_string(temporal.value.rows()) +
                      " latent time steps, got " + std::to_string(z.time));
  }
  const Index tokens = static_cast<Index>(z.height) * z.width;
  ad::Matrix stacked(tokens * z.channels, z.time);
  for (int c = 0; c < z.channels; ++c) {
    for (int t = 0; t < z.time; ++t) {
      for (Index k = 0; k < tokens; ++k) stacked(k + c * tokens, t) = z.values(c, t * tokens + k);
    }
  }
  Var projected = ad::matmul(tape.constant(std::move(stacked)), tape.param(temporal));
  return ad::reshape(projected, tokens, z.channels);
}

Var window_attention_block(ad::Tape& tape, const Var& x, int grid_h, int grid_w, bool shift,
                           const AttentionBlockParams& block) {
  const Index channels = x.cols();
  if (x.rows() != static_cast<Index>(grid_h) * grid_w) {
    throw ConfigError("window_attention_block: token count does not match grid");
  }
  if (block.qkv.in_features() != channels) throw ConfigError("window_attention_block: channel mismatch");
  const int win_h = window_size_for(grid_h);
  const int win_w = window_size_for(grid_w);
  if (win_h > grid_h || win_w > grid_w || grid_h % win_h != 0 || grid_w % win_w != 0) {
    throw std::logic_error("window_attention_block: window does not tile the feature map");
  }
  const int shift_h = shift ? win_h / 2 : 0;
  const int shift_w = shift ? win_w / 2 : 0;
  const auto order = window_order(grid_h, grid_w, win_h, win_w, shift_h, shift_w);
  std::vector<Index> inverse(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) inverse[static_cast<std::size_t>(order[k])] = static_cast<Index>(k);

  const Index per_window = static_cast<Index>(win_h) * win_w;
  const Index windows = x.rows() / per_window;
  const int heads = block.heads;
  const Index head_dim = channels / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Var qkv = linear(tape, ad::gather_rows(x, order), block.qkv);
  std::vector<Var> window_out;
  window_out.reserve(static_cast<std::size_t>(windows));
  for (Index w = 0; w < windows; ++w) {
    Var rows = ad::slice_rows(qkv, w * per_window, per_window);
    std::vector<Var> head_out;
    for (int h = 0; h < heads; ++h) {
      Var q = ad::slice_cols(rows, h * head_dim, head_dim);
      Var k = ad::slice_cols(rows, channels + h * head_dim, head_dim);
      Var v = ad::slice_cols(rows, 2 * channels + h * head_dim, head_dim);
      Var attn = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), scale));
      head_out.push_back(ad::matmul(attn, v));
    }
    window_out.push_back(heads == 1 ? head_out.front() : ad::hcat(head_out));
  }
  Var attended = windows == 1 ? window_out.front() : ad::vcat(window_out);
  Var residual = ad::gather_rows(linear(tape, attended, block.proj), inverse);
  Var x1 = x + residual;
  Var hidden = ad::gelu(linear(tape, x1, block.fc1));
  return x1 + linear(tape, hidden, block.fc2);
}

Var patch_expand(ad::Tape& tape, const Var& x, int grid_h, int grid_w, const PatchExpandParams& p) {
  if (x.rows() != static_cast<Index>(grid_h) * grid_w) throw ConfigError("patch_expand: token count mismatch");
  if (p.linear.in_features() != x.cols()) throw ConfigError("patch_expand: channel mismatch");
  const int f = p.factor;
  const Index cout = p.out_channels;
  Var expanded = linear(tape, x, p.linear);
  const Index n_in = x.rows();
  const int out_w = grid_w * f;
  const Index n_out = n_in * f * f;
  std::vector<Index> index(static_cast<std::size_t>(n_out * cout));
  for (int y = 0; y < grid_h; ++y) {
    for (int xx = 0; xx < grid_w; ++xx) {
      const Index src_token = static_cast<Index>(y) * grid_w + xx;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) {
          const Index out_token = static_cast<Index>(y * f + dy) * out_w + (xx * f + dx);
          for (Index c = 0; c < cout; ++c) {
            const Index src_col = static_cast<Index>(dy * f + dx) * cout + c;
            index[static_cast<std::size_t>(out_token + c * n_out)] = src_token + src_col * n_in;
          }
        }
      }
    }
  }
  return ad::gather(expanded, n_out, cout, std::move(index));
}

MaskTrace generate_mask(ad::Tape& tape, const LatentFeature& z, const MaskGeneratorParams& params) {
  const auto& s = params.shape;
  if (z.channels != s.latent_dim || z.time != s.latent_time || z.height != s.latent_height ||
      z.width != s.latent_width) {
    throw ConfigError("generate_mask: latent shape " + std::to_string(z.channels) + "x" + std::to_string(z.time) +
                      "x" + std::to_string(z.height) + "x" + std::to_string(z.width) +
                      " does not match the generator");
  }
  Var x = temporal_project(tape, z, params.temporal);
  int gh = z.height;
  int gw = z.width;
  for (const auto& stage : params.stages) {
    x = window_attention_block(tape, x, gh, gw, false, stage.plain);
    x = window_attention_block(tape, x, gh, gw, true, stage.shifted);
    x = patch_expand(tape, x, gh, gw, stage.expand);
    gh *= stage.expand.factor;
    gw *= stage.expand.factor;
  }
  x = patch_expand(tape, x, gh, gw, params.final_expand);
  gh *= params.final_expand.factor;
  gw *= params.final_expand.factor;
  if (gh != s.frame_height || gw != s.frame_width) throw std::logic_error("generate_mask: stage arithmetic");
  MaskTrace trace;
  trace.scores = linear(tape, x, params.head);
  trace.softmax = ad::softmax_all(trace.scores);
  trace.mask = ad::minmax(trace.softmax);
  return trace;
}

namespace {

Eigen::MatrixXd to_row_major_column(const Eigen::MatrixXd& field) {
  Eigen::MatrixXd col(field.size(), 1);
  for (Index y = 0; y < field.rows(); ++y) {
    for (Index x = 0; x < field.cols(); ++x) col(y * field.cols() + x, 0) = field(y, x);
  }
  return col;
}

Eigen::MatrixXd from_row_major_column(const Eigen::MatrixXd& col, Index height, Index width) {
  Eigen::MatrixXd field(height, width);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) field(y, x) = col(y * width + x, 0);
  }
  return field;
}

}  // namespace

Eigen::MatrixXd pixel_softmax(const Eigen::MatrixXd& scores) {
  ad::Tape tape(false);
  Var out = ad::softmax_all(tape.constant(to_row_major_column(scores)));
  return from_row_major_column(out.value(), scores.rows(), scores.cols());
}

MaskPrompt minmax_scale(const Eigen::MatrixXd& field) {
  ad::Tape tape(false);
  Var out = ad::minmax(tape.constant(to_row_major_column(field)));
  return MaskPrompt{from_row_major_column(out.value(), field.rows(), field.cols())};
}

MaskPrompt generate_mask(const LatentFeature& z, const MaskGeneratorParams& params) {
  ad::Tape tape(false);
  const auto trace = generate_mask(tape, z, params);
  return MaskPrompt{from_row_major_column(trace.mask.value(), params.shape.frame_height, params.shape.frame_width)};
}

MaskPrompt all_ones_mask(int height, int width) { return MaskPrompt{Eigen::MatrixXd::Ones(height, width)}; }

VideoClip apply_mask(const VideoClip& clip, const MaskPrompt& mask) {
  if (mask.height() != clip.height || mask.width() != clip.width) {
    throw DomainError("apply_mask: mask is " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                      " but frames are " + std::to_string(clip.height) + "x" + std::to_string(clip.width));
  }
  VideoClip out = clip;
  const Index plane = static_cast<Index>(clip.height) * clip.width;
  for (Index t = 0; t < clip.frames.cols(); ++t) {
    for (int c = 0; c < clip.channels; ++c) {
      for (int y = 0; y < clip.height; ++y) {
        for (int x = 0; x < clip.width; ++x) {
          out.frames(c * plane + static_cast<Index>(y) * clip.width + x, t) *= mask.weights(y, x);
        }
      }
    }
  }
  return out;
}

Var apply_mask(const Var& frames, const Var& mask, int channels) {
  const Index plane = mask.rows();
  if (mask.cols() != 1 || frames.rows() != plane * channels) {
    throw DomainError("apply_mask: mask does not match the frame size");
  }
  std::vector<Index> tile(static_cast<std::size_t>(frames.rows()));
  for (Index i = 0; i < frames.rows(); ++i) tile[static_cast<std::size_t>(i)] = i % plane;
  return ad::mul_columns(frames, ad::gather(mask, frames.rows(), 1, std::move(tile)));
}

}  // namespace evclip
