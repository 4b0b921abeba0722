#include "evclip/metrics.hpp"

#include <sstream>

#include "evclip/error.hpp"
#include "evclip/text_format.hpp"

namespace evclip {

namespace {

constexpr const char* kClassPrefix = "class_top1.";
constexpr const char* kPredictionPrefix = "prediction.";

}  // namespace

std::string format_metrics(const MetricsReport& m) {
  std::ostringstream out;
  out << "split = " << m.split << "\n";
  out << "videos = " << m.videos << "\n";
  out << "ablate_mask = " << (m.ablate_mask ? "true" : "false") << "\n";
  out << "ablate_context = " << (m.ablate_context ? "true" : "false") << "\n";
  out << "top1 = " << format_real(m.top1) << "\n";
  out << "top5 = " << format_real(m.top5) << "\n";
  for (const auto& [name, acc] : m.class_top1) out << kClassPrefix << name << " = " << format_real(acc) << "\n";
  for (const auto& [id, pred] : m.predictions) out << kPredictionPrefix << id << " = " << pred << "\n";
  return out.str();
}

MetricsReport parse_metrics(const std::string& text) {
  MetricsReport m;
  for (const auto& kv : parse_key_value_lines(text, false)) {
    const std::string where = "metrics line " + std::to_string(kv.number) + ": ";
    if (kv.key == "split") {
      m.split = kv.value;
    } else if (kv.key == "videos") {
      m.videos = static_cast<int>(parse_int(kv.value, where));
    } else if (kv.key == "ablate_mask") {
      m.ablate_mask = parse_bool(kv.value, where);
    } else if (kv.key == "ablate_context") {
      m.ablate_context = parse_bool(kv.value, where);
    } else if (kv.key == "top1") {
      m.top1 = parse_real(kv.value, where);
    } else if (kv.key == "top5") {
      m.top5 = parse_real(kv.value, where);
    } else if (kv.key.rfind(kClassPrefix, 0) == 0) {
      m.class_top1[kv.key.substr(std::string(kClassPrefix).size())] = parse_real(kv.value, where);
    } else if (kv.key.rfind(kPredictionPrefix, 0) == 0) {
      m.predictions[kv.key.substr(std::string(kPredictionPrefix).size())] = static_cast<int>(parse_int(kv.value, where));
    } else {
      throw FormatError(where + "unknown key '" + kv.key + "'");
    }
  }
  return m;
}

}  // namespace evclip
