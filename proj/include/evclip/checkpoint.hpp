#pragma once

// EVCK checkpoint (little-endian):
//   "EVCK" | u32 version=1 | u64 config digest | u64 seed | u32 epochs
//   u32 sections; per section {str name, u32 tensors,
//                              per tensor {str name, u32 rows, u32 cols, f32[rows*cols] row-major}}
//   u32 has_optimizer; if 1: u64 step, u32 tensors,
//                              per tensor {str name, u32 rows, u32 cols, f32 m[], f32 v[]}
//   u64 checksum = sum of all preceding bytes mod 2^64
// Strings are u32 length + UTF-8 bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evclip/training.hpp"

namespace evclip {

struct CheckpointTensor {
  std::string name;
  Eigen::MatrixXf value;

  friend bool operator==(const CheckpointTensor& a, const CheckpointTensor& b) {
    return a.name == b.name && a.value.rows() == b.value.rows() && a.value.cols() == b.value.cols() &&
           a.value == b.value;
  }
};

struct CheckpointSection {
  std::string name;
  std::vector<CheckpointTensor> tensors;

  friend bool operator==(const CheckpointSection&, const CheckpointSection&) = default;
};

struct CheckpointMoments {
  std::string name;
  Eigen::MatrixXf first;
  Eigen::MatrixXf second;

  friend bool operator==(const CheckpointMoments& a, const CheckpointMoments& b) {
    return a.name == b.name && a.first.rows() == b.first.rows() && a.first.cols() == b.first.cols() &&
           a.first == b.first && a.second == b.second;
  }
};

struct Checkpoint {
  std::uint64_t digest = 0;
  std::uint64_t seed = 0;
  std::uint32_t epochs = 0;
  std::vector<CheckpointSection> sections;
  bool has_optimizer = false;
  std::uint64_t optimizer_step = 0;
  std::vector<CheckpointMoments> moments;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const std::vector<unsigned char>& bytes, const std::string& what = "checkpoint");
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Packs prompt parameters (and optionally the Adam moments of `trainable`).
Checkpoint make_checkpoint(const PromptParams& params, std::uint64_t digest, std::uint64_t seed, int epochs,
                           const AdamState* optimizer = nullptr, const ParameterRefs& trainable = {});

/// Copies tensors into `params` by name; every parameter must be present
/// with its shape, otherwise FormatError.
void restore_prompts(const Checkpoint& ck, PromptParams& params);

}  // namespace evclip
