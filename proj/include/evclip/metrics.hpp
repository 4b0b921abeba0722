#pragma once

// Evaluation metrics file: `key = value` lines written by `evclip eval`.

#include <map>
#include <string>

namespace evclip {

struct MetricsReport {
  std::string split = "eval";
  int videos = 0;
  bool ablate_mask = false;
  bool ablate_context = false;
  double top1 = 0.0;
  double top5 = 0.0;
  std::map<std::string, double> class_top1;  ///< by class name
  std::map<std::string, int> predictions;    ///< by video id

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

std::string format_metrics(const MetricsReport& m);
MetricsReport parse_metrics(const std::string& text);

}  // namespace evclip
