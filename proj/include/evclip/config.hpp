#pragma once

// Run configuration file: `key = value` lines, '#' comments. Unknown keys are
// rejected with their line number; keys left out take their defaults and are
// listed as notices.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evclip/encoders.hpp"
#include "evclip/synth.hpp"
#include "evclip/training.hpp"

namespace evclip {

struct RunConfig {
  TrainConfig train;
  EncoderDims encoder;  ///< frame size follows the crop size
  std::uint64_t encoder_seed = 0;
  SynthSpec synth;
  std::string dataset;     ///< dataset directory
  std::string out = ".";   ///< output directory

  /// Keys that were not set and fell back to defaults.
  std::vector<std::string> defaulted;

  void validate() const;
};

/// Keys accepted in a config file, in documentation order.
const std::vector<std::string>& config_keys();

RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& config);

/// Digest of the settings a checkpoint depends on (architecture, T, encoder seed).
std::uint64_t architecture_digest(const RunConfig& config, int classes);

}  // namespace evclip
