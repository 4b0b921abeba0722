#pragma once

#include <stdexcept>
#include <string>

namespace evclip {

/// Invalid argument values: zero norms, empty lists, odd frame counts.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or settings that do not fit together.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed archive, checkpoint or image file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures; the message carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evclip
