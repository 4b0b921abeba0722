#include "evclip/domain_shift.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "evclip/error.hpp"
#include "evclip/text_format.hpp"

namespace evclip {

Embedding EmbeddedDataset::video(int i) const {
  const auto& r = frames[static_cast<std::size_t>(i)];
  return r.rowwise().mean();
}

void EmbeddedDataset::validate() const {
  if (labels.size() != frames.size() || ids.size() != frames.size()) {
    throw DomainError("dataset '" + name + "': ids, labels and frame blocks disagree in count");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes()) {
      throw DomainError("dataset '" + name + "': label of video '" + ids[i] + "' outside [0, M)");
    }
    if (frames[i].rows() != text.rows() || frames[i].cols() != frames.front().cols()) {
      throw DomainError("dataset '" + name + "': video '" + ids[i] + "' has inconsistent embedding shape");
    }
  }
}

EmbeddedDataset from_archive(const EmbeddingArchive& archive, std::string name) {
  archive.validate();
  EmbeddedDataset ds;
  ds.name = std::move(name);
  ds.class_names = archive.class_names;
  ds.text.resize(archive.embed_dim, static_cast<Eigen::Index>(archive.class_names.size()));
  for (std::size_t c = 0; c < archive.text_embeddings.size(); ++c) {
    ds.text.col(static_cast<Eigen::Index>(c)) = archive.text_embeddings[c].cast<double>();
  }
  for (const auto& v : archive.videos) {
    ds.ids.push_back(v.id);
    ds.labels.push_back(static_cast<int>(v.label));
    ds.frames.push_back(v.frame_embeddings.cast<double>());
  }
  ds.validate();
  return ds;
}

double vtm(const EmbeddedDataset& ds) {
  if (ds.num_videos() == 0) throw DomainError("vtm: dataset '" + ds.name + "' has no videos");
  double sum = 0.0;
  for (int i = 0; i < ds.num_videos(); ++i) {
    sum += cosine_distance(ds.video(i), ds.text.col(ds.labels[static_cast<std::size_t>(i)]));
  }
  return sum / ds.num_videos();
}

double iavd(const EmbeddedDataset& ds) {
  if (ds.num_classes() < 2) throw DomainError("iavd: needs at least 2 classes, got " + std::to_string(ds.num_classes()));
  std::vector<std::vector<Embedding>> members(static_cast<std::size_t>(ds.num_classes()));
  for (int i = 0; i < ds.num_videos(); ++i) {
    members[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(ds.video(i));
  }
  std::vector<Embedding> centroids;
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) {
      const std::string label = c < ds.class_names.size() ? ds.class_names[c] : std::to_string(c);
      throw DomainError("iavd: class '" + label + "' has no videos");
    }
    centroids.push_back(class_centroid(members[c]));
  }
  return pairwise_mean_distance(centroids);
}

double iasd(const EmbeddedDataset& ds) {
  if (ds.num_classes() < 2) throw DomainError("iasd: needs at least 2 classes, got " + std::to_string(ds.num_classes()));
  return pairwise_mean_distance(columns(ds.text));
}

double motion_dynamics(const EmbeddedDataset& ds) {
  if (ds.num_videos() == 0) throw DomainError("md: dataset '" + ds.name + "' has no videos");
  const int t = ds.num_frames();
  if (t < 2) throw DomainError("md: needs at least 2 frames per video, got " + std::to_string(t));
  double sum = 0.0;
  for (const auto& r : ds.frames) {
    for (int j = 1; j < t; ++j) sum += cosine_distance(r.col(j), r.col(j - 1));
  }
  return sum / (static_cast<double>(ds.num_videos()) * (t - 1));
}

DomainShiftReport probe(const EmbeddedDataset& ds) {
  DomainShiftReport r;
  r.dataset = ds.name;
  r.videos = ds.num_videos();
  r.classes = ds.num_classes();
  r.frames = ds.num_frames();
  const std::pair<const char*, double (*)(const EmbeddedDataset&)> metrics[] = {
      {"vtm", vtm}, {"iavd", iavd}, {"iasd", iasd}, {"md", motion_dynamics}};
  for (const auto& [name, fn] : metrics) {
    try {
      r.metrics[name] = fn(ds);
    } catch (const DomainError& e) {
      r.metrics[name] = std::nullopt;
      r.reasons[name] = e.what();
    }
  }
  return r;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DomainError("spearman: sequences differ in length");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

ProbeSummary summarize(std::vector<DomainShiftReport> reports) {
  ProbeSummary s;
  s.datasets = std::move(reports);
  for (const auto& m : metric_names()) {
    std::vector<double> x, y;
    for (const auto& r : s.datasets) {
      const auto it = r.metrics.find(m);
      if (!r.accuracy || it == r.metrics.end() || !it->second) continue;
      x.push_back(*it->second);
      y.push_back(*r.accuracy);
    }
    s.correlation[m] = spearman(x, y);
  }
  return s;
}

std::string format_probe(const ProbeSummary& summary) {
  std::ostringstream out;
  for (const auto& r : summary.datasets) {
    out << "[dataset " << r.dataset << "]\n";
    out << "videos = " << r.videos << "\n";
    out << "classes = " << r.classes << "\n";
    out << "frames = " << r.frames << "\n";
    for (const auto& m : metric_names()) {
      const auto it = r.metrics.find(m);
      if (it != r.metrics.end() && it->second) {
        out << m << " = " << format_real(*it->second) << "\n";
      } else {
        out << m << " = null\n";
        const auto reason = r.reasons.find(m);
        out << m << "_reason = " << (reason == r.reasons.end() ? "not computed" : reason->second) << "\n";
      }
    }
    if (r.accuracy) out << "accuracy = " << format_real(*r.accuracy) << "\n";
  }
  if (!summary.correlation.empty()) {
    out << "[correlation]\n";
    for (const auto& m : metric_names()) {
      const auto it = summary.correlation.find(m);
      if (it == summary.correlation.end()) continue;
      out << m << " = " << (it->second ? format_real(*it->second) : std::string("null")) << "\n";
    }
  }
  return out.str();
}

ProbeSummary parse_probe(const std::string& text) {
  ProbeSummary s;
  enum class Section { kNone, kDataset, kCorrelation } section = Section::kNone;
  for (const auto& line : parse_key_value_lines(text, /*allow_sections=*/true)) {
    if (line.is_section) {
      if (line.key.rfind("dataset ", 0) == 0) {
        section = Section::kDataset;
        s.datasets.emplace_back();
        s.datasets.back().dataset = line.key.substr(8);
      } else if (line.key == "correlation") {
        section = Section::kCorrelation;
      } else {
        throw FormatError("report line " + std::to_string(line.number) + ": unknown section [" + line.key + "]");
      }
      continue;
    }
    const auto where = "report line " + std::to_string(line.number) + ": ";
    if (section == Section::kNone) throw FormatError(where + "key outside any section");
    const auto& names = metric_names();
    const bool is_metric = std::find(names.begin(), names.end(), line.key) != names.end();
    if (section == Section::kCorrelation) {
      if (!is_metric) throw FormatError(where + "unknown correlation key '" + line.key + "'");
      s.correlation[line.key] = line.value == "null" ? std::nullopt : std::optional<double>(parse_real(line.value, where));
      continue;
    }
    auto& r = s.datasets.back();
    if (line.key == "videos") {
      r.videos = parse_int(line.value, where);
    } else if (line.key == "classes") {
      r.classes = parse_int(line.value, where);
    } else if (line.key == "frames") {
      r.frames = parse_int(line.value, where);
    } else if (line.key == "accuracy") {
      r.accuracy = parse_real(line.value, where);
    } else if (is_metric) {
      r.metrics[line.key] = line.value == "null" ? std::nullopt : std::optional<double>(parse_real(line.value, where));
    } else if (line.key.size() > 7 && line.key.ends_with("_reason") &&
               std::find(names.begin(), names.end(), line.key.substr(0, line.key.size() - 7)) != names.end()) {
      r.reasons[line.key.substr(0, line.key.size() - 7)] = line.value;
    } else {
      throw FormatError(where + "unknown key '" + line.key + "'");
    }
  }
  return s;
}

}  // namespace evclip
