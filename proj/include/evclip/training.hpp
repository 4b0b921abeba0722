#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "evclip/autodiff.hpp"
#include "evclip/context_generator.hpp"
#include "evclip/encoders.hpp"
#include "evclip/mask_generator.hpp"
#include "evclip/sampling.hpp"

namespace evclip {

/// Which prompts take part. A disabled mask is the all-ones mask; a disabled
/// context prompt drops out of the pooling (divisor T instead of T + 1).
struct PromptSwitches {
  bool mask = true;
  bool context = true;
};

struct PromptParams {
  MaskGeneratorParams mask;
  ContextGeneratorParams context;

  ParameterRefs parameters();
  ConstParameterRefs parameters() const;
  /// Parameters that receive updates under the given switches.
  ParameterRefs trainable(const PromptSwitches& on);
};

PromptParams init_prompts(const EncoderDims& dims, int frames, std::uint64_t seed);

/// Differentiable f_v over the columns of `frames`; the encoder stays frozen.
ad::Var encode_frames(ad::Tape& tape, const ad::Var& frames, const FrozenEncoderSet& enc);

struct ForwardGraph {
  ad::Var video;        ///< d x 1
  ad::Var frame_feats;  ///< d x T, embeddings of the (masked) frames
  std::optional<MaskTrace> mask;
  std::optional<ad::Var> context;
};

ForwardGraph forward_graph(ad::Tape& tape, const VideoClip& clip, const PromptParams& params,
                           const FrozenEncoderSet& enc, PromptSwitches on = {});

struct ForwardResult {
  Embedding video;
  Eigen::MatrixXd frame_feats;
  MaskPrompt mask;
  Embedding context;  ///< zero vector when the context prompt is off
};

ForwardResult forward_pass(const VideoClip& clip, const PromptParams& params, const FrozenEncoderSet& enc,
                           PromptSwitches on = {});

struct TrainConfig {
  int shots = 4;             ///< K
  int frames = 8;            ///< T, even
  int clip_window = 32;      ///< L
  double temperature = 0.01;
  double lambda = 0.1;
  int epochs = 200;
  double learning_rate = 5e-4;
  std::uint64_t seed = 0;
  int batch_size = 0;        ///< 0: whole episode when K*M <= 64, else 32
  PreprocessConfig preprocess;
  PromptSwitches prompts;
  int threads = 0;           ///< 0: single-threaded

  void validate() const;
};

struct TrainLogRecord {
  int epoch = 0;
  double loss = 0.0;
  double ce = 0.0;
  double cons = 0.0;
  double lr = 0.0;
};

std::string format_log_record(const TrainLogRecord& r);

struct AdamState {
  std::vector<Eigen::MatrixXd> first;
  std::vector<Eigen::MatrixXd> second;
  std::int64_t step = 0;
};

/// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction.
void adam_step(const ParameterRefs& params, const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               double learning_rate);

struct TrainResult {
  PromptParams params;
  AdamState optimizer;
  std::vector<TrainLogRecord> log;
  int epochs_completed = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Loss and per-parameter gradients over a batch of preprocessed clips.
struct BatchGradient {
  double loss = 0.0;
  double ce = 0.0;
  double cons = 0.0;
  std::vector<Eigen::MatrixXd> grads;  ///< aligned with PromptParams::parameters()
};

BatchGradient batch_gradient(const std::vector<VideoClip>& clips, const Eigen::MatrixXd& text_feats,
                             const PromptParams& params, const FrozenEncoderSet& enc, const TrainConfig& config);

/// Optimises the prompt generators on the K-shot training videos (raw,
/// full-length). text_feats is d x M. Encoders are never modified.
TrainResult train(const TrainConfig& config, const std::vector<VideoClip>& train_videos,
                  const Eigen::MatrixXd& text_feats, const FrozenEncoderSet& enc,
                  std::optional<PromptParams> init = std::nullopt);

struct EvalResult {
  double top1 = 0.0;
  double top5 = 0.0;
  std::vector<double> per_class;
  std::vector<int> predictions;
};

/// Argmax over class cosines with ties to the lowest index.
int predict(const Embedding& video, const Eigen::MatrixXd& text_feats);
/// Rank of `label` among the class cosines (0 = best), same tie rule.
int label_rank(const Embedding& video, const Eigen::MatrixXd& text_feats, int label);

EvalResult evaluate(const PromptParams& params, const std::vector<VideoClip>& videos,
                    const Eigen::MatrixXd& text_feats, const FrozenEncoderSet& enc, const TrainConfig& config,
                    PromptSwitches on);

/// Prompt-free pipeline: encode each test-sampled frame, average, classify.
EvalResult evaluate_vanilla(const std::vector<VideoClip>& videos, const Eigen::MatrixXd& text_feats,
                            const FrozenEncoderSet& enc, const TrainConfig& config);

/// Test-mode clip: centred window, centred crop.
VideoClip test_clip(const VideoClip& video, const TrainConfig& config);

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 or 1: inline).
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace evclip
