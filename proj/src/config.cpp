#include "evclip/config.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "evclip/binary_io.hpp"
#include "evclip/error.hpp"
#include "evclip/rng.hpp"
#include "evclip/text_format.hpp"

namespace evclip {

namespace {

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field int_field(std::string key, T RunConfig::*group, int T::*member) {
  return {key,
          [group, member](RunConfig& c, const std::string& v, const std::string& w) {
            (c.*group).*member = static_cast<int>(parse_int(v, w));
          },
          [group, member](const RunConfig& c) { return std::to_string((c.*group).*member); }};
}

template <typename T>
Field real_field(std::string key, T RunConfig::*group, double T::*member) {
  return {key,
          [group, member](RunConfig& c, const std::string& v, const std::string& w) {
            (c.*group).*member = parse_real(v, w);
          },
          [group, member](const RunConfig& c) { return format_real((c.*group).*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"dataset", [](RunConfig& c, const std::string& v, const std::string&) { c.dataset = v; },
       [](const RunConfig& c) { return c.dataset; }},
      {"out", [](RunConfig& c, const std::string& v, const std::string&) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
      {"seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.seed = parse_u64(v, w); },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      int_field("shots", &RunConfig::train, &TrainConfig::shots),
      int_field("frames", &RunConfig::train, &TrainConfig::frames),
      int_field("clip_window", &RunConfig::train, &TrainConfig::clip_window),
      real_field("temperature", &RunConfig::train, &TrainConfig::temperature),
      real_field("lambda", &RunConfig::train, &TrainConfig::lambda),
      int_field("epochs", &RunConfig::train, &TrainConfig::epochs),
      real_field("learning_rate", &RunConfig::train, &TrainConfig::learning_rate),
      int_field("batch_size", &RunConfig::train, &TrainConfig::batch_size),
      {"resize_height",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.train.preprocess.resize_height = static_cast<int>(parse_int(v, w));
       },
       [](const RunConfig& c) { return std::to_string(c.train.preprocess.resize_height); }},
      {"resize_width",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.train.preprocess.resize_width = static_cast<int>(parse_int(v, w));
       },
       [](const RunConfig& c) { return std::to_string(c.train.preprocess.resize_width); }},
      {"crop_height",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.train.preprocess.crop_height = static_cast<int>(parse_int(v, w));
       },
       [](const RunConfig& c) { return std::to_string(c.train.preprocess.crop_height); }},
      {"crop_width",
       [](RunConfig& c, const std::string& v, const std::string& w) {
         c.train.preprocess.crop_width = static_cast<int>(parse_int(v, w));
       },
       [](const RunConfig& c) { return std::to_string(c.train.preprocess.crop_width); }},
      {"use_mask", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.prompts.mask = parse_bool(v, w); },
       [](const RunConfig& c) { return std::string(c.train.prompts.mask ? "true" : "false"); }},
      {"use_context",
       [](RunConfig& c, const std::string& v, const std::string& w) { c.train.prompts.context = parse_bool(v, w); },
       [](const RunConfig& c) { return std::string(c.train.prompts.context ? "true" : "false"); }},
      int_field("embed_dim", &RunConfig::encoder, &EncoderDims::embed_dim),
      int_field("latent_dim", &RunConfig::encoder, &EncoderDims::latent_dim),
      int_field("latent_height", &RunConfig::encoder, &EncoderDims::latent_height),
      int_field("latent_width", &RunConfig::encoder, &EncoderDims::latent_width),
      int_field("channels", &RunConfig::encoder, &EncoderDims::channels),
      {"encoder_seed", [](RunConfig& c, const std::string& v, const std::string& w) { c.encoder_seed = parse_u64(v, w); },
       [](const RunConfig& c) { return std::to_string(c.encoder_seed); }},
      int_field("synth_classes", &RunConfig::synth, &SynthSpec::classes),
      int_field("synth_per_class", &RunConfig::synth, &SynthSpec::per_class),
      int_field("synth_frames", &RunConfig::synth, &SynthSpec::frames),
      int_field("synth_height", &RunConfig::synth, &SynthSpec::height),
      int_field("synth_width", &RunConfig::synth, &SynthSpec::width),
      real_field("synth_darkness", &RunConfig::synth, &SynthSpec::darkness),
  };
  return f;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void RunConfig::validate() const {
  train.validate();
  encoder.validate();
  if (encoder.frame_height != train.preprocess.crop_height || encoder.frame_width != train.preprocess.crop_width) {
    throw ConfigError("encoder frame size must equal the crop size");
  }
  if (train.preprocess.crop_height > train.preprocess.resize_height ||
      train.preprocess.crop_width > train.preprocess.resize_width) {
    throw ConfigError("crop " + std::to_string(train.preprocess.crop_height) + "x" +
                      std::to_string(train.preprocess.crop_width) + " is larger than the resize " +
                      std::to_string(train.preprocess.resize_height) + "x" +
                      std::to_string(train.preprocess.resize_width));
  }
  synth.validate();
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig c;
  std::set<std::string> seen;
  std::vector<KeyValueLine> lines;
  try {
    lines = parse_key_value_lines(text, false);
  } catch (const FormatError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  for (const auto& kv : lines) {
    const std::string where = source + " line " + std::to_string(kv.number) + ": ";
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == kv.key; });
    if (it == fs.end()) throw ConfigError(where + "unknown key '" + kv.key + "'");
    if (!seen.insert(kv.key).second) throw ConfigError(where + "duplicate key '" + kv.key + "'");
    try {
      it->set(c, kv.value, where);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
  }
  c.encoder.frame_height = c.train.preprocess.crop_height;
  c.encoder.frame_width = c.train.preprocess.crop_width;
  c.synth.channels = c.encoder.channels;
  c.synth.seed = c.train.seed;
  for (const auto& f : fields()) {
    if (!seen.count(f.key)) c.defaulted.push_back(f.key);
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("config file '" + path.string() + "' does not exist");
  const auto bytes = bin::read_file(path);
  return parse_run_config(std::string(bytes.begin(), bytes.end()), path.string());
}

std::string format_run_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(config) << "\n";
  return out.str();
}

std::uint64_t architecture_digest(const RunConfig& config, int classes) {
  std::ostringstream s;
  const auto& e = config.encoder;
  s << "d=" << e.embed_dim << ";dz=" << e.latent_dim << ";h=" << e.latent_height << ";w=" << e.latent_width
    << ";H=" << e.frame_height << ";W=" << e.frame_width << ";C=" << e.channels << ";T=" << config.train.frames
    << ";M=" << classes << ";encoder_seed=" << config.encoder_seed;
  const std::string key = s.str();
  return fnv1a(key.data(), key.size());
}

}  // namespace evclip
