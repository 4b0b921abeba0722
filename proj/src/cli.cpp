#include "evclip/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "evclip/archive.hpp"
#include "evclip/binary_io.hpp"
#include "evclip/checkpoint.hpp"
#include "evclip/config.hpp"
#include "evclip/dataset.hpp"
#include "evclip/domain_shift.hpp"
#include "evclip/error.hpp"
#include "evclip/gradcheck.hpp"
#include "evclip/image.hpp"
#include "evclip/metrics.hpp"
#include "evclip/synth.hpp"
#include "evclip/text_format.hpp"
#include "evclip/training.hpp"

namespace evclip::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string command;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool ablate_mask = false;
  bool ablate_context = false;
  std::string checkpoint;
  std::string dataset;
  std::vector<std::string> archives;
  std::string video;
  std::string accuracy;
  bool ignore_digest = false;
};

class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  bin::write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

RunConfig resolve_config(const Options& o, std::ostream& err) {
  RunConfig c;
  if (o.config.empty()) {
    c = parse_run_config("", "defaults");
    err << "notice: no --config given; all settings take their defaults\n";
  } else {
    c = load_run_config(o.config);
    for (const auto& key : c.defaulted) err << "notice: '" << key << "' not set in " << o.config << "; using the default\n";
  }
  if (o.seed) {
    c.train.seed = *o.seed;
    c.synth.seed = *o.seed;
  }
  if (!o.dataset.empty()) c.dataset = o.dataset;
  c.train.threads = threads_from_env();
  c.validate();
  return c;
}

fs::path out_dir(const Options& o, const RunConfig& c) { return o.out.empty() ? fs::path(c.out) : fs::path(o.out); }

Eigen::MatrixXd text_matrix(const FrozenEncoderSet& enc, const std::vector<std::string>& names) {
  Eigen::MatrixXd text(enc.dims().embed_dim, static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) text.col(static_cast<Eigen::Index>(c)) = enc.encode_text(names[c]);
  return text;
}

VideoDataset load_configured_dataset(const RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("no dataset given (set 'dataset' in the config or pass --dataset)");
  VideoDataset ds = load_dataset(c.dataset);
  if (!ds.videos.empty() && ds.videos.front().channels != c.encoder.channels) {
    throw ConfigError("dataset has " + std::to_string(ds.videos.front().channels) + " channels, config expects " +
                      std::to_string(c.encoder.channels));
  }
  return ds;
}

std::vector<VideoClip> pick(const VideoDataset& ds, const std::vector<int>& idx) {
  std::vector<VideoClip> out;
  for (int i : idx) out.push_back(ds.videos[static_cast<std::size_t>(i)]);
  return out;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o, err);
  const fs::path dir = out_dir(o, c);
  const SynthDataset ds = generate_synthetic(c.synth);
  std::ostringstream spec;
  spec << "synthetic: classes=" << c.synth.classes << " per_class=" << c.synth.per_class
       << " frames=" << c.synth.frames << " size=" << c.synth.height << "x" << c.synth.width
       << " darkness=" << format_real(c.synth.darkness) << " seed=" << c.synth.seed;
  write_dataset(dir, ds.class_names, ds.videos, {spec.str()});

  // Unprompted embeddings of the test-mode clips, for the probe.
  const auto enc = make_toy_encoders(c.encoder_seed, c.encoder);
  EmbeddingArchive archive;
  archive.frames = static_cast<std::uint32_t>(c.train.frames);
  archive.embed_dim = static_cast<std::uint32_t>(c.encoder.embed_dim);
  archive.latent_dim = static_cast<std::uint32_t>(c.encoder.latent_dim);
  archive.latent_time = static_cast<std::uint32_t>(c.train.frames / 2);
  archive.latent_height = static_cast<std::uint32_t>(c.encoder.latent_height);
  archive.latent_width = static_cast<std::uint32_t>(c.encoder.latent_width);
  archive.class_names = ds.class_names;
  for (const auto& name : ds.class_names) archive.text_embeddings.push_back(enc->encode_text(name).cast<float>());
  for (const auto& v : ds.videos) {
    const VideoClip clip = test_clip(v, c.train);
    archive.videos.push_back({v.id, static_cast<std::uint32_t>(v.label), enc->encode_frames(clip.frames).cast<float>(),
                              flatten_latent(enc->encode_video_latent(clip))});
  }
  write_embedding_archive(dir / "embeddings.evca", archive);
  out << "wrote " << ds.videos.size() << " videos (" << ds.class_names.size() << " classes) to " << dir.string()
      << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o, err);
  const VideoDataset ds = load_configured_dataset(c);
  const int classes = static_cast<int>(ds.class_names.size());
  const auto enc = make_toy_encoders(c.encoder_seed, c.encoder);
  const Eigen::MatrixXd text = text_matrix(*enc, ds.class_names);
  const Episode ep = sample_episode(ds.labels(), classes, c.train.shots, c.train.seed);

  TrainResult result = train(c.train, pick(ds, ep.train), text, *enc);
  const fs::path dir = out_dir(o, c);
  std::string log;
  for (const auto& r : result.log) log += format_log_record(r) + "\n";
  write_text(dir / "train.log", log);
  const auto trainable = result.params.trainable(c.train.prompts);
  write_checkpoint(dir / "checkpoint.evck",
                   make_checkpoint(result.params, architecture_digest(c, classes), c.train.seed,
                                   result.epochs_completed, &result.optimizer, trainable));
  if (!result.diagnostic.empty()) err << result.diagnostic;
  if (!result.log.empty()) out << format_log_record(result.log.back()) << "\n";
  out << "checkpoint = " << (dir / "checkpoint.evck").string() << "\n";
  if (result.aborted) {
    err << "error: training aborted after " << result.epochs_completed
        << " epochs; the checkpoint holds the last finite parameters\n";
    return kExitConfig;
  }
  return kExitOk;
}

PromptParams load_prompts(const Options& o, const RunConfig& c, int classes, std::uint64_t* seed_out) {
  const fs::path path = o.checkpoint.empty() ? fs::path(c.out) / "checkpoint.evck" : fs::path(o.checkpoint);
  const Checkpoint ck = load_checkpoint(path);
  const std::uint64_t digest = architecture_digest(c, classes);
  if (ck.digest != digest && !o.ignore_digest) {
    throw ConfigError("checkpoint '" + path.string() +
                      "' was written for a different architecture/encoder config (digest mismatch); "
                      "pass --ignore-digest to load it anyway");
  }
  PromptParams params = init_prompts(c.encoder, c.train.frames, c.train.seed);
  restore_prompts(ck, params);
  if (seed_out) *seed_out = ck.seed;
  return params;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o, err);
  const VideoDataset ds = load_configured_dataset(c);
  const int classes = static_cast<int>(ds.class_names.size());
  const auto enc = make_toy_encoders(c.encoder_seed, c.encoder);
  const Eigen::MatrixXd text = text_matrix(*enc, ds.class_names);
  std::uint64_t seed = 0;
  const PromptParams params = load_prompts(o, c, classes, &seed);
  const Episode ep = sample_episode(ds.labels(), classes, c.train.shots, seed);
  if (ep.eval.empty()) throw DomainError("no held-out videos: every video is in the training episode");
  const PromptSwitches on{c.train.prompts.mask && !o.ablate_mask, c.train.prompts.context && !o.ablate_context};
  const auto eval_videos = pick(ds, ep.eval);
  const EvalResult r = evaluate(params, eval_videos, text, *enc, c.train, on);

  MetricsReport m;
  m.videos = static_cast<int>(eval_videos.size());
  m.ablate_mask = o.ablate_mask;
  m.ablate_context = o.ablate_context;
  m.top1 = r.top1;
  m.top5 = r.top5;
  for (int k = 0; k < classes; ++k) {
    m.class_top1[ds.class_names[static_cast<std::size_t>(k)]] = r.per_class[static_cast<std::size_t>(k)];
  }
  for (std::size_t i = 0; i < eval_videos.size(); ++i) m.predictions[eval_videos[i].id] = r.predictions[i];
  const fs::path path = o.out.empty() ? fs::path(c.out) / "metrics.txt" : fs::path(o.out);
  write_text(path, format_metrics(m));
  out << "top1 = " << format_real(r.top1) << "\ntop5 = " << format_real(r.top5) << "\nmetrics = " << path.string()
      << "\n";
  return kExitOk;
}

int cmd_probe(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.archives.empty()) throw ConfigError("probe needs at least one --archive PATH");
  std::map<std::string, double> accuracy;
  if (!o.accuracy.empty()) {
    if (!fs::exists(o.accuracy)) throw IoError("accuracy table '" + o.accuracy + "' does not exist");
    const auto bytes = bin::read_file(o.accuracy);
    for (const auto& kv : parse_key_value_lines(std::string(bytes.begin(), bytes.end()), false)) {
      accuracy[kv.key] = parse_real(kv.value, o.accuracy + " line " + std::to_string(kv.number) + ": ");
    }
  }
  std::vector<DomainShiftReport> reports;
  for (const auto& a : o.archives) {
    const std::string name = fs::path(a).stem().string();
    DomainShiftReport r = probe(from_archive(load_embedding_archive(a), name));
    const auto it = accuracy.find(name);
    if (it != accuracy.end()) r.accuracy = it->second;
    for (const auto& [metric, reason] : r.reasons) err << "notice: " << name << ": " << metric << " is null: " << reason << "\n";
    reports.push_back(std::move(r));
  }
  ProbeSummary summary = summarize(std::move(reports));
  if (accuracy.empty()) summary.correlation.clear();
  const std::string text = format_probe(summary);
  if (!o.out.empty()) write_text(o.out, text);
  out << text;
  return kExitOk;
}

int cmd_export_mask(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = resolve_config(o, err);
  if (o.video.empty()) throw ConfigError("export-mask needs --video DIR (a directory of frame_*.ppm files)");
  const VideoClip raw = load_video_dir(o.video, c.encoder.channels);
  const auto enc = make_toy_encoders(c.encoder_seed, c.encoder);
  PromptParams params = init_prompts(c.encoder, c.train.frames, c.train.seed);
  if (!o.ablate_mask) {
    // The digest covers the class count, taken from the dataset when one is configured.
    int classes = c.synth.classes;
    if (!c.dataset.empty()) classes = static_cast<int>(load_configured_dataset(c).class_names.size());
    params = load_prompts(o, c, classes, nullptr);
  }
  const VideoClip clip = test_clip(raw, c.train);
  const PromptSwitches on{!o.ablate_mask, false};
  const ForwardResult r = forward_pass(clip, params, *enc, on);
  const VideoClip reweighted = apply_mask(clip, r.mask);
  const fs::path dir = o.out.empty() ? fs::path(c.out) / "masks" : fs::path(o.out);
  const Image mask_img = mask_to_image(r.mask);
  for (int f = 0; f < clip.num_frames(); ++f) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%04d", f);
    write_ppm(dir / (std::string(stem) + "_original.ppm"),
              frame_to_image(clip.frames.col(f), clip.channels, clip.height, clip.width));
    write_ppm(dir / (std::string(stem) + "_mask.ppm"), mask_img);
    write_ppm(dir / (std::string(stem) + "_reweighted.ppm"),
              frame_to_image(reweighted.frames.col(f), clip.channels, clip.height, clip.width));
  }
  out << "wrote " << clip.num_frames() << " frame triples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream&) {
  GradCheckConfig gc;
  if (o.seed) gc.seed = *o.seed;
  const GradCheckReport report = grad_check(gc);
  const std::string text = report.to_text();
  if (!o.out.empty()) write_text(o.out, text);
  out << text;
  if (!report.passed()) throw VerificationFailure("gradient check failed");
  return kExitOk;
}

}  // namespace

int threads_from_env() {
  const char* v = std::getenv("EVCLIP_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  long long n = 0;
  try {
    n = parse_int(v, "EVCLIP_THREADS: ");
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  if (n < 0 || n > 1024) throw ConfigError("EVCLIP_THREADS must lie in [0, 1024], got " + std::string(v));
  return static_cast<int>(n);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"evclip: prompt adaptation of frozen video-language encoders"};
  app.name("evclip");
  Options o;
  std::uint64_t seed = 0;
  app.add_option("command", o.command, "synth | train | eval | probe | export-mask | gradcheck")
      ->required()
      ->check(CLI::IsMember({"synth", "train", "eval", "probe", "export-mask", "gradcheck"}));
  app.add_option("--config", o.config, "run config file (key = value)");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");
  app.add_option("--out", o.out, "output directory (synth, train, export-mask) or file (eval, probe, gradcheck)");
  app.add_flag("--ablate-mask", o.ablate_mask, "replace the mask prompt with the all-ones mask");
  app.add_flag("--ablate-context", o.ablate_context, "drop the context prompt (divisor T)");
  app.add_option("--checkpoint", o.checkpoint, "checkpoint path (default: checkpoint.evck in the config's out directory)");
  app.add_option("--dataset", o.dataset, "dataset directory (overrides the config)");
  app.add_option("--archive", o.archives, "embedding archive for probe (repeatable)");
  app.add_option("--video", o.video, "directory of frame_*.ppm files for export-mask");
  app.add_option("--accuracy", o.accuracy, "per-dataset accuracy table for probe (name = value)");
  app.add_flag("--ignore-digest", o.ignore_digest, "load a checkpoint whose config digest differs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "usage: evclip <synth|train|eval|probe|export-mask|gradcheck> [options]\n";
    return kExitConfig;
  }
  if (seed_opt->count() > 0) o.seed = seed;

  try {
    if (o.command == "synth") return cmd_synth(o, out, err);
    if (o.command == "train") return cmd_train(o, out, err);
    if (o.command == "eval") return cmd_eval(o, out, err);
    if (o.command == "probe") return cmd_probe(o, out, err);
    if (o.command == "export-mask") return cmd_export_mask(o, out, err);
    return cmd_gradcheck(o, out, err);
  } catch (const VerificationFailure& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerify;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace evclip::cli
