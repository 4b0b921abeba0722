#pragma once

// Little-endian byte writer/reader shared by the archive and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "evclip/error.hpp"

namespace evclip::bin {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::size_t size() const { return buf_.size(); }
  const std::vector<unsigned char>& buffer() const { return buf_; }
  std::vector<unsigned char> take() { return std::move(buf_); }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw FormatError(what_ + ": " + msg + " (byte offset " + std::to_string(at) + ")");
  }
  void need(std::size_t n, const char* field) const {
    if (remaining() < n) fail(std::string("truncated while reading ") + field, pos_);
  }
  void bytes(void* out, std::size_t n, const char* field) {
    need(n, field);
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* field) {
    std::uint32_t v;
    bytes(&v, sizeof v, field);
    return v;
  }
  std::uint64_t u64(const char* field) {
    std::uint64_t v;
    bytes(&v, sizeof v, field);
    return v;
  }
  float f32(const char* field) {
    float v;
    bytes(&v, sizeof v, field);
    return v;
  }
  std::string str(const char* field, std::uint32_t max_len = 1u << 20) {
    const std::size_t at = pos_;
    const std::uint32_t n = u32(field);
    if (n > max_len) fail(std::string("implausible length for ") + field, at);
    std::string s(n, '\0');
    bytes(s.data(), n, field);
    return s;
  }

 private:
  const std::vector<unsigned char>& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::uint64_t byte_sum(const unsigned char* data, std::size_t n) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < n; ++i) s += data[i];
  return s;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace evclip::bin
