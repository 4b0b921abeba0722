#pragma once

// Finite-difference verification of the analytic gradients on a tiny setup.

#include <cstdint>
#include <string>
#include <vector>

namespace evclip {

struct GradCheckConfig {
  std::uint64_t seed = 0;
  double step = 1e-3;
  double tolerance = 1e-4;
  int max_entries = 64;  ///< per tensor; larger tensors are sampled
  double temperature = 0.01;
  double lambda = 0.5;
  double parameter_noise = 0.1;  ///< std of the offset added to the initial parameters
};

struct GradCheckEntry {
  std::string group;  ///< mask, context or losses
  std::string name;
  int checked = 0;
  /// ||a - n|| / max(||a||, ||n||, floor) over the checked entries.
  double max_rel_error = 0.0;
  /// Largest single-entry relative error; informational, small entries are
  /// dominated by the O(step^2) truncation of the central difference.
  double worst_entry_error = 0.0;
  double max_abs_grad = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  double lambda = 0.0;

  double group_error(const std::string& group) const;
  bool passed() const;
  std::string to_text() const;
};

/// |a - n| / max(|a|, |n|, floor). The floor is 1e-3 of the largest analytic
/// entry in the group, which keeps exactly-zero gradients from reading as 100%.
double relative_error(double analytic, double numeric, double floor);

GradCheckReport grad_check(const GradCheckConfig& config);

}  // namespace evclip
