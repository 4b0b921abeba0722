#include "evclip/archive.hpp"

#include <fstream>
#include <iterator>
#include <set>

#include "evclip/binary_io.hpp"
#include "evclip/error.hpp"

namespace evclip {

namespace bin {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace bin

namespace {

constexpr char kMagic[4] = {'E', 'V', 'C', 'A'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

Eigen::VectorXf flatten_latent(const LatentFeature& z) {
  const Eigen::Index cols = z.values.cols();
  Eigen::VectorXf out(z.values.size());
  for (Eigen::Index c = 0; c < z.values.rows(); ++c) {
    for (Eigen::Index j = 0; j < cols; ++j) out(c * cols + j) = static_cast<float>(z.values(c, j));
  }
  return out;
}

LatentFeature unflatten_latent(const Eigen::VectorXf& block, int channels, int time, int height, int width) {
  const Eigen::Index cols = static_cast<Eigen::Index>(time) * height * width;
  if (block.size() != channels * cols) throw FormatError("latent block size does not match d_z x T_half x h x w");
  LatentFeature z;
  z.channels = channels;
  z.time = time;
  z.height = height;
  z.width = width;
  z.values.resize(channels, cols);
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index j = 0; j < cols; ++j) z.values(c, j) = block(c * cols + j);
  }
  return z;
}

void EmbeddingArchive::validate() const {
  if (frames == 0 || embed_dim == 0) throw FormatError("archive: T and d must be positive");
  if (class_names.size() != text_embeddings.size()) {
    throw FormatError("archive: class name and text embedding counts differ");
  }
  for (std::size_t c = 0; c < text_embeddings.size(); ++c) {
    if (text_embeddings[c].size() != static_cast<Eigen::Index>(embed_dim)) {
      throw FormatError("archive: text embedding for class '" + class_names[c] + "' has wrong size");
    }
  }
  std::set<std::string> seen;
  for (const auto& v : videos) {
    if (!seen.insert(v.id).second) throw FormatError("archive: duplicate video id '" + v.id + "'");
    if (v.label >= class_names.size()) throw FormatError("archive: video '" + v.id + "' label out of range");
    if (v.frame_embeddings.rows() != static_cast<Eigen::Index>(embed_dim) ||
        v.frame_embeddings.cols() != static_cast<Eigen::Index>(frames)) {
      throw FormatError("archive: video '" + v.id + "' frame embeddings are not d x T");
    }
    if (static_cast<std::size_t>(v.latent.size()) != latent_size()) {
      throw FormatError("archive: video '" + v.id + "' latent block has wrong size");
    }
  }
}

bool operator==(const EmbeddingArchive& a, const EmbeddingArchive& b) {
  if (a.frames != b.frames || a.embed_dim != b.embed_dim || a.latent_dim != b.latent_dim ||
      a.latent_time != b.latent_time || a.latent_height != b.latent_height ||
      a.latent_width != b.latent_width || a.class_names != b.class_names ||
      a.text_embeddings.size() != b.text_embeddings.size() || a.videos.size() != b.videos.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.text_embeddings.size(); ++i) {
    if (a.text_embeddings[i] != b.text_embeddings[i]) return false;
  }
  for (std::size_t i = 0; i < a.videos.size(); ++i) {
    const auto& x = a.videos[i];
    const auto& y = b.videos[i];
    if (x.id != y.id || x.label != y.label || x.frame_embeddings != y.frame_embeddings || x.latent != y.latent) {
      return false;
    }
  }
  return true;
}

std::vector<unsigned char> serialize_archive(const EmbeddingArchive& archive) {
  archive.validate();
  bin::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(archive.videos.size()));
  w.u32(static_cast<std::uint32_t>(archive.class_names.size()));
  w.u32(archive.frames);
  w.u32(archive.embed_dim);
  w.u32(archive.latent_dim);
  w.u32(archive.latent_time);
  w.u32(archive.latent_height);
  w.u32(archive.latent_width);
  for (const auto& v : archive.videos) {
    w.str(v.id);
    w.u32(v.label);
  }
  for (const auto& name : archive.class_names) w.str(name);

  const std::size_t payload_start = w.size();
  for (const auto& t : archive.text_embeddings) w.bytes(t.data(), sizeof(float) * static_cast<std::size_t>(t.size()));
  for (const auto& v : archive.videos) {
    // Column-major d x T: each frame embedding is contiguous.
    w.bytes(v.frame_embeddings.data(), sizeof(float) * static_cast<std::size_t>(v.frame_embeddings.size()));
    w.bytes(v.latent.data(), sizeof(float) * static_cast<std::size_t>(v.latent.size()));
  }
  const auto& buf = w.buffer();
  const std::uint64_t checksum = bin::byte_sum(buf.data() + payload_start, buf.size() - payload_start);
  w.u64(checksum);
  return w.take();
}

EmbeddingArchive parse_archive(const std::vector<unsigned char>& bytes) {
  bin::Reader r(bytes, "archive");
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic (expected \"EVCA\")", 0);
  const std::size_t version_at = r.offset();
  if (const auto version = r.u32("version"); version != kVersion) {
    r.fail("unsupported version " + std::to_string(version), version_at);
  }
  const std::size_t counts_at = r.offset();
  const std::uint32_t n_videos = r.u32("video count");
  const std::uint32_t n_classes = r.u32("class count");
  EmbeddingArchive a;
  a.frames = r.u32("T");
  a.embed_dim = r.u32("d");
  a.latent_dim = r.u32("d_z");
  a.latent_time = r.u32("T_half");
  a.latent_height = r.u32("h");
  a.latent_width = r.u32("w");
  if (a.frames == 0 || a.embed_dim == 0) r.fail("T and d must be positive", counts_at);
  if (a.embed_dim > (1u << 20) || a.frames > (1u << 16) || n_videos > bytes.size() || n_classes > bytes.size()) {
    r.fail("implausible dimensions", counts_at);
  }

  a.videos.resize(n_videos);
  for (auto& v : a.videos) {
    v.id = r.str("video id");
    const std::size_t label_at = r.offset();
    v.label = r.u32("video label");
    if (v.label >= n_classes) r.fail("label of video '" + v.id + "' out of range", label_at);
  }
  a.class_names.resize(n_classes);
  for (auto& name : a.class_names) name = r.str("class name");

  const std::size_t payload_start = r.offset();
  if (r.remaining() < sizeof(std::uint64_t)) r.fail("missing payload and checksum", payload_start);
  const std::size_t payload_end = bytes.size() - sizeof(std::uint64_t);
  auto payload_left = [&] { return payload_end - r.offset(); };

  const std::size_t d = a.embed_dim;
  a.text_embeddings.resize(n_classes);
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    if (payload_left() < d * sizeof(float)) {
      r.fail("truncated text embedding for class '" + a.class_names[c] + "'", r.offset());
    }
    a.text_embeddings[c].resize(static_cast<Eigen::Index>(d));
    r.bytes(a.text_embeddings[c].data(), d * sizeof(float), "text embedding");
  }
  const std::size_t frame_bytes = d * a.frames * sizeof(float);
  const std::size_t latent_bytes = a.latent_size() * sizeof(float);
  for (auto& v : a.videos) {
    if (payload_left() < frame_bytes) r.fail("video '" + v.id + "' has truncated frame embeddings", r.offset());
    v.frame_embeddings.resize(static_cast<Eigen::Index>(d), a.frames);
    r.bytes(v.frame_embeddings.data(), frame_bytes, "frame embeddings");
    if (payload_left() < latent_bytes) r.fail("video '" + v.id + "' lacks a latent block", r.offset());
    v.latent.resize(static_cast<Eigen::Index>(a.latent_size()));
    r.bytes(v.latent.data(), latent_bytes, "latent");
  }
  if (payload_left() != 0) r.fail("unexpected bytes after payload", r.offset());
  const std::uint64_t expected = bin::byte_sum(bytes.data() + payload_start, payload_end - payload_start);
  const std::size_t checksum_at = r.offset();
  if (r.u64("checksum") != expected) r.fail("checksum mismatch", checksum_at);
  a.validate();
  return a;
}

void write_embedding_archive(const std::filesystem::path& path, const EmbeddingArchive& archive) {
  bin::write_file(path, serialize_archive(archive));
}

EmbeddingArchive load_embedding_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("archive '" + path.string() + "' does not exist");
  return parse_archive(bin::read_file(path));
}

}  // namespace evclip
