#pragma once

// Dataset-level domain-shift statistics over unprompted embeddings:
//   vtm   mean cosine distance between a video and its class text
//   iavd  mean pairwise distance between class centroids of video features
//   iasd  mean pairwise distance between class text embeddings
//   md    mean distance between adjacent frame embeddings

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evclip/archive.hpp"
#include "evclip/embedding.hpp"

namespace evclip {

struct EmbeddedDataset {
  std::string name;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<Eigen::MatrixXd> frames;  ///< per video d x T
  std::vector<std::string> class_names;
  Eigen::MatrixXd text;                 ///< d x M

  int num_videos() const { return static_cast<int>(frames.size()); }
  int num_classes() const { return static_cast<int>(text.cols()); }
  int num_frames() const { return frames.empty() ? 0 : static_cast<int>(frames.front().cols()); }
  /// Unprompted video feature: the mean of the frame embeddings.
  Embedding video(int i) const;
  void validate() const;
};

EmbeddedDataset from_archive(const EmbeddingArchive& archive, std::string name);

double vtm(const EmbeddedDataset& ds);
double iavd(const EmbeddedDataset& ds);
double iasd(const EmbeddedDataset& ds);
double motion_dynamics(const EmbeddedDataset& ds);

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"vtm", "iavd", "iasd", "md"};
  return names;
}

struct DomainShiftReport {
  std::string dataset;
  int videos = 0;
  int classes = 0;
  int frames = 0;
  std::map<std::string, std::optional<double>> metrics;  ///< keyed by metric_names()
  std::map<std::string, std::string> reasons;            ///< why a metric is null
  std::optional<double> accuracy;

  friend bool operator==(const DomainShiftReport&, const DomainShiftReport&) = default;
};

/// All four metrics; a metric whose precondition fails is null with a reason.
DomainShiftReport probe(const EmbeddedDataset& ds);

/// Spearman rank correlation with average ranks for ties; null when fewer
/// than two points or either side is constant.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

struct ProbeSummary {
  std::vector<DomainShiftReport> datasets;
  std::map<std::string, std::optional<double>> correlation;  ///< metric vs accuracy

  friend bool operator==(const ProbeSummary&, const ProbeSummary&) = default;
};

/// Correlates each metric with accuracy over the reports that carry both.
ProbeSummary summarize(std::vector<DomainShiftReport> reports);

std::string format_probe(const ProbeSummary& summary);
ProbeSummary parse_probe(const std::string& text);

}  // namespace evclip
