#include <doctest.h>

#include <cstring>

#include "evclip/archive.hpp"
#include "evclip/binary_io.hpp"
#include "evclip/error.hpp"
#include "support.hpp"

using namespace evclip;

namespace {

EmbeddingArchive random_archive(Rng& rng, int videos, int classes) {
  EmbeddingArchive a;
  a.frames = 1 + static_cast<std::uint32_t>(rng.below(4));
  a.embed_dim = 1 + static_cast<std::uint32_t>(rng.below(6));
  a.latent_dim = 1 + static_cast<std::uint32_t>(rng.below(3));
  a.latent_time = 1 + static_cast<std::uint32_t>(rng.below(2));
  a.latent_height = 1 + static_cast<std::uint32_t>(rng.below(3));
  a.latent_width = 1 + static_cast<std::uint32_t>(rng.below(3));
  for (int c = 0; c < classes; ++c) {
    a.class_names.push_back("class " + std::to_string(c) + (c % 2 ? " \xc3\xa9t\xc3\xa9" : ""));
    a.text_embeddings.push_back(test::random_matrix(a.embed_dim, 1, rng).cast<float>());
  }
  for (int v = 0; v < videos; ++v) {
    ArchiveVideo av;
    av.id = "vid" + std::to_string(v);
    av.label = static_cast<std::uint32_t>(rng.below(static_cast<std::uint64_t>(classes)));
    av.frame_embeddings = test::random_matrix(a.embed_dim, a.frames, rng).cast<float>();
    av.latent = test::random_matrix(static_cast<Eigen::Index>(a.latent_size()), 1, rng).cast<float>();
    a.videos.push_back(std::move(av));
  }
  return a;
}

std::string message_of(const std::vector<unsigned char>& bytes) {
  try {
    parse_archive(bytes);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("two-video archive round trip") {
  Rng rng(1);
  const EmbeddingArchive a = random_archive(rng, 2, 2);
  test::TempDir dir("archive");
  write_embedding_archive(dir / "a.evca", a);
  const EmbeddingArchive b = load_embedding_archive(dir / "a.evca");
  CHECK(a == b);
  CHECK(serialize_archive(b) == bin::read_file(dir / "a.evca"));
}

TEST_CASE("randomized archive round trips are exact") {
  Rng rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const EmbeddingArchive a = random_archive(rng, static_cast<int>(rng.below(5)), 1 + static_cast<int>(rng.below(4)));
    const auto bytes = serialize_archive(a);
    const EmbeddingArchive b = parse_archive(bytes);
    CHECK(a == b);
    CHECK(serialize_archive(b) == bytes);
  }
}

TEST_CASE("header layout") {
  Rng rng(3);
  const EmbeddingArchive a = random_archive(rng, 1, 1);
  const auto bytes = serialize_archive(a);
  CHECK(std::memcmp(bytes.data(), "EVCA", 4) == 0);
  std::uint32_t version, videos, classes, t, d;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&videos, bytes.data() + 8, 4);
  std::memcpy(&classes, bytes.data() + 12, 4);
  std::memcpy(&t, bytes.data() + 16, 4);
  std::memcpy(&d, bytes.data() + 20, 4);
  CHECK(version == 1);
  CHECK(videos == 1);
  CHECK(classes == 1);
  CHECK(t == a.frames);
  CHECK(d == a.embed_dim);
}

TEST_CASE("checksum is the byte sum of the payload") {
  EmbeddingArchive a;
  a.frames = 1;
  a.embed_dim = 1;
  a.latent_dim = a.latent_time = a.latent_height = a.latent_width = 1;
  a.class_names = {"c"};
  a.text_embeddings = {Eigen::VectorXf::Constant(1, 1.0f)};
  ArchiveVideo v;
  v.id = "v";
  v.frame_embeddings = Eigen::MatrixXf::Constant(1, 1, 2.0f);
  v.latent = Eigen::VectorXf::Constant(1, -1.0f);
  a.videos = {v};
  const auto bytes = serialize_archive(a);
  // 1.0f = 00 00 80 3f, 2.0f = 00 00 00 40, -1.0f = 00 00 80 bf
  const std::uint64_t expected = (0x80 + 0x3f) + 0x40 + (0x80 + 0xbf);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  CHECK(stored == expected);
}

TEST_CASE("format errors carry byte offsets") {
  Rng rng(4);
  const auto good = serialize_archive(random_archive(rng, 2, 2));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(message_of(bad_magic).find("magic") != std::string::npos);
  CHECK(message_of(bad_magic).find("byte offset 0") != std::string::npos);
  auto bad_version = good;
  bad_version[4] = 9;
  CHECK(message_of(bad_version).find("version") != std::string::npos);
  auto flipped = good;
  flipped[flipped.size() - 12] ^= 0x01;
  CHECK(message_of(flipped).find("checksum") != std::string::npos);
  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(parse_archive(trailing), FormatError);
  const std::vector<unsigned char> tiny(good.begin(), good.begin() + 10);
  CHECK(message_of(tiny).find("truncated") != std::string::npos);
}

TEST_CASE("a video without its latent block is named") {
  Rng rng(5);
  EmbeddingArchive a = random_archive(rng, 2, 2);
  a.latent_dim = 2;
  a.latent_time = a.latent_height = a.latent_width = 1;
  for (auto& v : a.videos) v.latent = Eigen::VectorXf::Zero(2);
  auto bytes = serialize_archive(a);
  // Drop the last video's latent block and re-append a checksum.
  bytes.resize(bytes.size() - 8 - 2 * sizeof(float));
  for (int i = 0; i < 8; ++i) bytes.push_back(0);
  const std::string msg = message_of(bytes);
  CHECK(msg.find("'" + a.videos.back().id + "'") != std::string::npos);
  CHECK(msg.find("latent") != std::string::npos);
}

TEST_CASE("latent flattening is row-major over (c, t, y, x)") {
  LatentFeature z;
  z.channels = 2;
  z.time = 2;
  z.height = 2;
  z.width = 3;
  z.values.resize(2, 12);
  for (int c = 0; c < 2; ++c) {
    for (int t = 0; t < 2; ++t) {
      for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 3; ++x) z.values(c, (t * 2 + y) * 3 + x) = 1000 * c + 100 * t + 10 * y + x;
      }
    }
  }
  const Eigen::VectorXf flat = flatten_latent(z);
  int k = 0;
  for (int c = 0; c < 2; ++c) {
    for (int t = 0; t < 2; ++t) {
      for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 3; ++x) CHECK(flat(k++) == static_cast<float>(1000 * c + 100 * t + 10 * y + x));
      }
    }
  }
  CHECK(unflatten_latent(flat, 2, 2, 2, 3).values == z.values);
}

TEST_CASE("missing file is an I/O error") {
  CHECK_THROWS_AS(load_embedding_archive("/nonexistent/x.evca"), IoError);
}
