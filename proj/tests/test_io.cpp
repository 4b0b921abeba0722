#include <doctest.h>

#include <cmath>
#include <fstream>

#include "evclip/binary_io.hpp"
#include "evclip/checkpoint.hpp"
#include "evclip/config.hpp"
#include "evclip/dataset.hpp"
#include "evclip/error.hpp"
#include "evclip/image.hpp"
#include "evclip/metrics.hpp"
#include "evclip/synth.hpp"
#include "support.hpp"

using namespace evclip;

namespace {

std::string error_text(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults and notices") {
  const RunConfig c = parse_run_config("seed = 7\nepochs = 3\n");
  CHECK(c.train.seed == 7);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.shots == 4);
  CHECK(c.train.frames == 8);
  CHECK(c.train.clip_window == 32);
  CHECK(c.train.temperature == 0.01);
  CHECK(c.train.lambda == 0.1);
  CHECK(c.train.learning_rate == 5e-4);
  CHECK(c.train.preprocess.resize_height == 40);
  CHECK(c.train.preprocess.resize_width == 52);
  CHECK(c.encoder.frame_height == 32);
  CHECK(c.synth.seed == 7);
  CHECK(std::find(c.defaulted.begin(), c.defaulted.end(), "shots") != c.defaulted.end());
  CHECK(std::find(c.defaulted.begin(), c.defaulted.end(), "seed") == c.defaulted.end());
}

TEST_CASE("config errors carry the line number") {
  const std::string unknown = error_text([] { parse_run_config("seed = 1\n# note\nbogus = 2\n", "run.cfg"); });
  CHECK(unknown.find("run.cfg line 3") != std::string::npos);
  CHECK(unknown.find("bogus") != std::string::npos);
  CHECK_THROWS_AS(parse_run_config("bogus = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("frames = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("temperature = 0\n"), ConfigError);
  CHECK_THROWS(parse_run_config("epochs = many\n"));
}

TEST_CASE("config text round trip") {
  const RunConfig c = parse_run_config("seed = 3\nlearning_rate = 0.005\nuse_context = false\nsynth_darkness = 0.2\n");
  const std::string text = format_run_config(c);
  const RunConfig back = parse_run_config(text);
  CHECK(format_run_config(back) == text);
  CHECK(back.train.learning_rate == 0.005);
  CHECK_FALSE(back.train.prompts.context);
  CHECK(back.synth.darkness == 0.2);
  CHECK(back.defaulted.empty());
}

TEST_CASE("architecture digest tracks the architecture only") {
  const RunConfig a = parse_run_config("seed = 1\n");
  const RunConfig b = parse_run_config("seed = 2\nepochs = 9\n");
  const RunConfig c = parse_run_config("embed_dim = 32\n");
  CHECK(architecture_digest(a, 4) == architecture_digest(b, 4));
  CHECK(architecture_digest(a, 4) != architecture_digest(a, 5));
  CHECK(architecture_digest(a, 4) != architecture_digest(c, 4));
}

TEST_CASE("checkpoint round trips byte for byte") {
  const EncoderDims d = test::tiny_dims();
  Rng rng(1);
  PromptParams params = init_prompts(d, 4, 1);
  for (auto* p : params.parameters()) p->value += test::random_matrix(p->value.rows(), p->value.cols(), rng, 0.1);
  AdamState adam;
  const auto trainable = params.trainable({});
  for (auto* p : trainable) {
    adam.first.push_back(test::random_matrix(p->value.rows(), p->value.cols(), rng));
    adam.second.push_back(test::random_matrix(p->value.rows(), p->value.cols(), rng).cwiseAbs());
  }
  adam.step = 17;
  const Checkpoint ck = make_checkpoint(params, 0xabcdef, 9, 17, &adam, trainable);
  CHECK(ck.sections.size() == 2);
  CHECK(ck.sections[0].name == "mask_generator");
  CHECK(ck.sections[1].name == "context_generator");

  test::TempDir dir("ckpt");
  write_checkpoint(dir / "a.evck", ck);
  const Checkpoint loaded = load_checkpoint(dir / "a.evck");
  CHECK(loaded == ck);
  write_checkpoint(dir / "b.evck", loaded);
  CHECK(bin::read_file(dir / "a.evck") == bin::read_file(dir / "b.evck"));

  PromptParams restored = init_prompts(d, 4, 2);
  restore_prompts(loaded, restored);
  const auto got = restored.parameters();
  const auto want = params.parameters();
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i]->value == want[i]->value.cast<float>().cast<double>());
  }
}

TEST_CASE("corrupt or mismatched checkpoints are rejected") {
  const EncoderDims d = test::tiny_dims();
  const PromptParams params = init_prompts(d, 4, 1);
  std::vector<unsigned char> bytes = serialize_checkpoint(make_checkpoint(params, 1, 2, 3));
  CHECK(parse_checkpoint(bytes) == make_checkpoint(params, 1, 2, 3));
  std::vector<unsigned char> flipped = bytes;
  flipped[30] ^= 0x40;
  CHECK_THROWS_AS(parse_checkpoint(flipped), FormatError);
  std::vector<unsigned char> cut(bytes.begin(), bytes.end() - 9);
  CHECK_THROWS_AS(parse_checkpoint(cut), FormatError);
  std::vector<unsigned char> magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(magic), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/evclip.evck"), IoError);

  EncoderDims wider = d;
  wider.embed_dim = 20;
  PromptParams other = init_prompts(wider, 4, 1);
  CHECK_THROWS_AS(restore_prompts(parse_checkpoint(bytes), other), FormatError);
}

TEST_CASE("ppm round trip and errors") {
  Image img;
  img.width = 3;
  img.height = 2;
  for (int i = 0; i < 18; ++i) img.rgb.push_back(static_cast<unsigned char>(i * 13));
  const auto bytes = encode_ppm(img);
  CHECK(std::string(bytes.begin(), bytes.begin() + 2) == "P6");
  CHECK(decode_ppm(bytes) == img);
  // Header comments are skipped.
  const std::string header = "P6 #c\n3 2\n255\n";
  std::vector<unsigned char> commented(header.begin(), header.end());
  commented.insert(commented.end(), img.rgb.begin(), img.rgb.end());
  CHECK(decode_ppm(commented) == img);

  std::vector<unsigned char> p5 = bytes;
  p5[1] = '5';
  CHECK_THROWS_AS(decode_ppm(p5), FormatError);
  std::vector<unsigned char> short_body(bytes.begin(), bytes.end() - 1);
  const std::string msg = error_text([&] { decode_ppm(short_body); });
  CHECK(msg.find("byte offset") != std::string::npos);
  std::string deep = "P6 3 2 65535\n";
  CHECK_THROWS_AS(decode_ppm(std::vector<unsigned char>(deep.begin(), deep.end())), FormatError);
  CHECK_THROWS_AS(read_ppm("/nonexistent/frame.ppm"), IoError);

  test::TempDir dir("ppm");
  write_ppm(dir / "x.ppm", img);
  CHECK(read_ppm(dir / "x.ppm") == img);
}

TEST_CASE("frame and image conversions") {
  CHECK(quantize(0.0) == 0);
  CHECK(quantize(1.0) == 255);
  CHECK(quantize(-3.0) == 0);
  CHECK(quantize(7.0) == 255);
  CHECK(quantize(0.5) == 128);
  Rng rng(2);
  Eigen::VectorXd frame(3 * 4 * 5);
  for (Eigen::Index i = 0; i < frame.size(); ++i) frame(i) = static_cast<double>(rng.below(256)) / 255.0;
  const Image img = frame_to_image(frame, 3, 4, 5);
  CHECK(img.width == 5);
  CHECK(img.height == 4);
  CHECK(img.rgb[3 * (2 * 5 + 1) + 2] == quantize(frame(2 * 20 + 2 * 5 + 1)));
  CHECK((image_to_frame(img, 3) - frame).cwiseAbs().maxCoeff() < 1e-15);
  const Image gray = frame_to_image(frame.head(20), 1, 4, 5);
  CHECK(gray.rgb[0] == gray.rgb[1]);
  CHECK(gray.rgb[1] == gray.rgb[2]);
  CHECK_THROWS_AS(frame_to_image(frame, 2, 4, 5), ConfigError);
}

TEST_CASE("synthetic generator is seeded and darkness scales pixels") {
  SynthSpec s;
  s.per_class = 3;
  s.frames = 6;
  s.seed = 4;
  const SynthDataset a = generate_synthetic(s);
  const SynthDataset b = generate_synthetic(s);
  REQUIRE(a.videos.size() == 12);
  CHECK(a.class_names == std::vector<std::string>{"waving", "jumping", "clapping", "running"});
  CHECK(a.videos[0].id == "waving_000");
  CHECK(a.videos[11].label == 3);
  for (std::size_t i = 0; i < a.videos.size(); ++i) CHECK(a.videos[i].frames == b.videos[i].frames);
  s.seed = 5;
  CHECK(generate_synthetic(s).videos[0].frames != a.videos[0].frames);
  s.seed = 4;
  s.darkness = 0.2;
  const SynthDataset dark = generate_synthetic(s);
  double bright_sum = 0.0;
  double dark_sum = 0.0;
  for (std::size_t i = 0; i < a.videos.size(); ++i) {
    CHECK((dark.videos[i].frames - 0.2 * a.videos[i].frames).cwiseAbs().maxCoeff() < 1e-12);
    bright_sum += a.videos[i].frames.mean();
    dark_sum += dark.videos[i].frames.mean();
  }
  CHECK(std::abs(dark_sum / bright_sum - 0.2) < 1e-6);
  CHECK(a.videos[0].frames.minCoeff() >= 0.0);
  CHECK(a.videos[0].frames.maxCoeff() == 1.0);
  s.darkness = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("dataset directories round trip through ppm") {
  SynthSpec s;
  s.per_class = 2;
  s.frames = 3;
  s.height = s.width = 8;
  const SynthDataset data = generate_synthetic(s);
  test::TempDir dir("dataset");
  write_dataset(dir.path(), data.class_names, data.videos, {"a note"});
  CHECK(std::filesystem::exists(dir / "manifest.txt"));
  CHECK(std::filesystem::exists(frame_path(dir / "videos" / "waving_000", 2)));
  const VideoDataset back = load_dataset(dir.path());
  CHECK(back.class_names == data.class_names);
  REQUIRE(back.videos.size() == data.videos.size());
  for (std::size_t i = 0; i < back.videos.size(); ++i) {
    CHECK(back.videos[i].id == data.videos[i].id);
    CHECK(back.videos[i].label == data.videos[i].label);
    CHECK((back.videos[i].frames - data.videos[i].frames).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
  }
  CHECK(back.labels() == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3});
  const VideoClip v = load_video_dir(dir / "videos" / "jumping_001", 3);
  CHECK(v.num_frames() == 3);
  CHECK(v.frames == back.videos[3].frames);
  const std::string missing = error_text([] { load_dataset("/nonexistent/evclip_data"); });
  CHECK(missing.find("manifest.txt") != std::string::npos);
  CHECK_THROWS_AS(load_dataset("/nonexistent/evclip_data"), IoError);
}

TEST_CASE("metrics file round trip") {
  MetricsReport m;
  m.videos = 3;
  m.ablate_mask = true;
  m.top1 = 2.0 / 3.0;
  m.top5 = 1.0;
  m.class_top1 = {{"waving", 1.0}, {"jumping", 0.5}};
  m.predictions = {{"waving_000", 0}, {"jumping_002", 3}, {"jumping_003", 1}};
  const std::string text = format_metrics(m);
  CHECK(text.find("top1 = ") != std::string::npos);
  CHECK(text.find("class_top1.jumping = 0.5") != std::string::npos);
  CHECK(text.find("prediction.jumping_002 = 3") != std::string::npos);
  CHECK(parse_metrics(text) == m);
  CHECK_THROWS_AS(parse_metrics("top1 = x\n"), FormatError);
}
