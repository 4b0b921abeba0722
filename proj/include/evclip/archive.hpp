#pragma once

// EVCA embedding archive: precomputed frame embeddings, video latents and
// class text embeddings, so real backbones can be used offline.
//
// Layout (little-endian):
//   "EVCA" | u32 version=1 | u32 videos, classes, T, d, d_z, T_half, h, w
//   manifest: per video {u32 len, id bytes, u32 label}; per class {u32 len, name}
//   payload:  per class f32[d]; per video T x f32[d] then f32[d_z*T_half*h*w]
//   u64 checksum = sum of payload bytes mod 2^64

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evclip/encoders.hpp"

namespace evclip {

struct ArchiveVideo {
  std::string id;
  std::uint32_t label = 0;
  Eigen::MatrixXf frame_embeddings;  ///< d x T
  Eigen::VectorXf latent;            ///< d_z*T_half*h*w, row-major (c, t, y, x)
};

struct EmbeddingArchive {
  std::uint32_t frames = 0;  ///< T
  std::uint32_t embed_dim = 0;
  std::uint32_t latent_dim = 0;
  std::uint32_t latent_time = 0;
  std::uint32_t latent_height = 0;
  std::uint32_t latent_width = 0;
  std::vector<std::string> class_names;
  std::vector<Eigen::VectorXf> text_embeddings;
  std::vector<ArchiveVideo> videos;

  std::size_t latent_size() const {
    return static_cast<std::size_t>(latent_dim) * latent_time * latent_height * latent_width;
  }
  /// Throws FormatError when contents disagree with the declared counts.
  void validate() const;

  friend bool operator==(const EmbeddingArchive&, const EmbeddingArchive&);
};

/// Latent <-> row-major (c, t, y, x) f32 block.
Eigen::VectorXf flatten_latent(const LatentFeature& z);
LatentFeature unflatten_latent(const Eigen::VectorXf& block, int channels, int time, int height, int width);

std::vector<unsigned char> serialize_archive(const EmbeddingArchive& archive);
EmbeddingArchive parse_archive(const std::vector<unsigned char>& bytes);

void write_embedding_archive(const std::filesystem::path& path, const EmbeddingArchive& archive);
EmbeddingArchive load_embedding_archive(const std::filesystem::path& path);

}  // namespace evclip
