#include "evclip/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <thread>

#include "evclip/error.hpp"
#include "evclip/losses.hpp"

namespace evclip {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

ParameterRefs PromptParams::parameters() {
  ParameterRefs refs = mask.parameters();
  for (auto* p : context.parameters()) refs.push_back(p);
  return refs;
}

ConstParameterRefs PromptParams::parameters() const {
  auto refs = const_cast<PromptParams*>(this)->parameters();
  return {refs.begin(), refs.end()};
}

ParameterRefs PromptParams::trainable(const PromptSwitches& on) {
  ParameterRefs refs;
  if (on.mask) refs = mask.parameters();
  if (on.context) {
    for (auto* p : context.parameters()) refs.push_back(p);
  }
  return refs;
}

PromptParams init_prompts(const EncoderDims& dims, int frames, std::uint64_t seed) {
  dims.validate();
  if (frames < 2 || frames % 2 != 0) throw ConfigError("frames T must be even and >= 2");
  return PromptParams{init_mask_generator(MaskGeneratorShape::from(dims, frames), seed),
                      init_context_generator(dims.latent_dim, dims.embed_dim, seed)};
}

ad::Var encode_frames(ad::Tape& tape, const ad::Var& frames, const FrozenEncoderSet& enc) {
  ad::Matrix out = enc.encode_frames(frames.value());
  ad::Matrix kept = out;
  return tape.record(std::move(out), {frames}, [&tape, &enc, frames, kept = std::move(kept)](const ad::Matrix& g) {
    tape.accumulate(frames, enc.visual_backward(frames.value(), kept, g));
  });
}

ForwardGraph forward_graph(ad::Tape& tape, const VideoClip& clip, const PromptParams& params,
                           const FrozenEncoderSet& enc, PromptSwitches on) {
  const LatentFeature z = enc.encode_video_latent(clip);
  ForwardGraph g;
  if (on.mask) {
    g.mask = generate_mask(tape, z, params.mask);
    const ad::Var masked = apply_mask(tape.constant(clip.frames), g.mask->mask, clip.channels);
    g.frame_feats = encode_frames(tape, masked, enc);
  } else {
    g.frame_feats = tape.constant(enc.encode_frames(clip.frames));
  }
  if (on.context) {
    g.context = project_context(tape, tape.constant(global_pool(z)), params.context);
    g.video = aggregate_video(g.frame_feats, *g.context);
  } else if (g.frame_feats.requires_grad()) {
    g.video = ad::scale(ad::row_sum(g.frame_feats), 1.0 / static_cast<double>(clip.num_frames()));
  } else {
    g.video = tape.constant(baseline_video_feature(g.frame_feats.value()));
  }
  return g;
}

ForwardResult forward_pass(const VideoClip& clip, const PromptParams& params, const FrozenEncoderSet& enc,
                           PromptSwitches on) {
  ad::Tape tape(false);
  const ForwardGraph g = forward_graph(tape, clip, params, enc, on);
  ForwardResult r;
  r.video = g.video.value().col(0);
  r.frame_feats = g.frame_feats.value();
  if (g.mask) {
    r.mask.weights.resize(clip.height, clip.width);
    const auto& m = g.mask->mask.value();
    for (int y = 0; y < clip.height; ++y) {
      for (int x = 0; x < clip.width; ++x) r.mask.weights(y, x) = m(static_cast<Eigen::Index>(y) * clip.width + x, 0);
    }
  } else {
    r.mask = all_ones_mask(clip.height, clip.width);
  }
  r.context = g.context ? Embedding(g.context->value().col(0)) : Embedding::Zero(r.video.size());
  return r;
}

void TrainConfig::validate() const {
  if (shots < 1) throw ConfigError("shots K must be >= 1");
  if (frames < 2 || frames % 2 != 0) throw ConfigError("frames T must be even and >= 2, got " + std::to_string(frames));
  if (clip_window < frames) throw ConfigError("clip_window L must be >= frames T");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 0) throw ConfigError("batch_size must be non-negative");
  if (threads < 0) throw ConfigError("threads must be non-negative");
}

std::string format_log_record(const TrainLogRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch=%d loss=%.9g ce=%.9g cons=%.9g lr=%.9g", r.epoch, r.loss, r.ce, r.cons, r.lr);
  return buf;
}

void adam_step(const ParameterRefs& params, const std::vector<Eigen::MatrixXd>& grads, AdamState& state,
               double learning_rate) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  if (grads.size() != params.size()) throw std::logic_error("adam_step: gradient count mismatch");
  if (state.first.empty()) {
    for (const auto* p : params) {
      state.first.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
      state.second.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first[i];
    auto& v = state.second[i];
    m = beta1 * m + (1.0 - beta1) * grads[i];
    v = beta2 * v + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
    params[i]->value.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

BatchGradient batch_gradient(const std::vector<VideoClip>& clips, const Eigen::MatrixXd& text_feats,
                             const PromptParams& params, const FrozenEncoderSet& enc, const TrainConfig& config) {
  const auto refs = params.parameters();
  const int n = static_cast<int>(clips.size());
  if (n == 0) throw DomainError("batch_gradient: empty batch");
  struct PerClip {
    double ce = 0.0;
    double cons = 0.0;
    std::vector<Eigen::MatrixXd> grads;
  };
  std::vector<PerClip> results(static_cast<std::size_t>(n));
  const double inv_n = 1.0 / n;
  parallel_for(n, config.threads, [&](int i) {
    const VideoClip& clip = clips[static_cast<std::size_t>(i)];
    ad::Tape tape;
    const ForwardGraph g = forward_graph(tape, clip, params, enc, config.prompts);
    const int label = clip.label;
    const ad::Var ce = contrastive_ce_loss(g.video, tape.constant(text_feats), std::span<const int>(&label, 1),
                                           config.temperature);
    const ad::Var cons = consistency_loss(g.frame_feats);
    const ad::Var loss = ad::scale(total_loss(ce, cons, config.lambda), inv_n);
    PerClip& out = results[static_cast<std::size_t>(i)];
    out.ce = ce.value()(0, 0);
    out.cons = cons.value()(0, 0);
    if (loss.requires_grad()) tape.backward(loss);
    out.grads.reserve(refs.size());
    for (const auto* p : refs) out.grads.push_back(tape.grad(*p));
  });
  BatchGradient bg;
  for (const auto* p : refs) bg.grads.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  for (const auto& r : results) {
    bg.ce += r.ce * inv_n;
    bg.cons += r.cons * inv_n;
    for (std::size_t k = 0; k < refs.size(); ++k) bg.grads[k] += r.grads[k];
  }
  bg.loss = total_loss(bg.ce, bg.cons, config.lambda);
  return bg;
}

TrainResult train(const TrainConfig& config, const std::vector<VideoClip>& train_videos,
                  const Eigen::MatrixXd& text_feats, const FrozenEncoderSet& enc, std::optional<PromptParams> init) {
  config.validate();
  if (train_videos.empty()) throw DomainError("train: empty training set");
  if (text_feats.rows() != enc.dims().embed_dim) throw ConfigError("train: text embedding dimension mismatch");
  for (const auto& v : train_videos) {
    if (v.label < 0 || v.label >= text_feats.cols()) throw DomainError("train: label of '" + v.id + "' out of range");
  }

  TrainResult result;
  result.params = init ? std::move(*init) : init_prompts(enc.dims(), config.frames, config.seed);
  const auto all = result.params.parameters();
  const auto trainable = result.params.trainable(config.prompts);
  std::vector<std::size_t> slot;
  for (auto* p : trainable) {
    slot.push_back(static_cast<std::size_t>(std::find(all.begin(), all.end(), p) - all.begin()));
  }

  const int n = static_cast<int>(train_videos.size());
  const int classes = static_cast<int>(text_feats.cols());
  int batch = n;
  if (config.shots * classes > 64 || n > 64) batch = config.batch_size > 0 ? config.batch_size : 32;
  batch = std::min(batch, n);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    if (batch < n) {
      Rng shuffle(mix_seed(epoch_seed, 7));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.below(i))]);
    }
    double loss_sum = 0.0;
    double ce_sum = 0.0;
    double cons_sum = 0.0;
    for (int start = 0; start < n; start += batch) {
      const int count = std::min(batch, n - start);
      std::vector<VideoClip> clips;
      clips.reserve(static_cast<std::size_t>(count));
      for (int b = 0; b < count; ++b) {
        const int idx = order[static_cast<std::size_t>(start + b)];
        Rng rng(mix_seed(epoch_seed, 100 + static_cast<std::uint64_t>(idx)));
        SampledClip s = sample_frames(train_videos[static_cast<std::size_t>(idx)], config.frames, config.clip_window,
                                      Mode::kTrain, rng);
        if (s.looped && epoch == 1) {
          result.diagnostic += "notice: video '" + s.clip.id + "' shorter than clip window; loop-padded\n";
        }
        clips.push_back(preprocess(s.clip, config.preprocess, Mode::kTrain, rng));
      }
      BatchGradient bg = batch_gradient(clips, text_feats, result.params, enc, config);
      bool finite = std::isfinite(bg.loss);
      for (std::size_t k : slot) finite = finite && all_finite(bg.grads[k]);
      if (!finite) {
        result.aborted = true;
        result.diagnostic += "non-finite loss or gradient at epoch " + std::to_string(epoch) +
                             "; keeping parameters from epoch " + std::to_string(result.epochs_completed) + "\n";
        return result;
      }
      std::vector<Eigen::MatrixXd> grads;
      grads.reserve(slot.size());
      for (std::size_t k : slot) grads.push_back(std::move(bg.grads[k]));
      std::vector<Eigen::MatrixXd> backup;
      for (const auto* p : trainable) backup.push_back(p->value);
      adam_step(trainable, grads, result.optimizer, config.learning_rate);
      for (std::size_t k = 0; k < trainable.size(); ++k) {
        if (!all_finite(trainable[k]->value)) {
          for (std::size_t j = 0; j < trainable.size(); ++j) trainable[j]->value = backup[j];
          result.aborted = true;
          result.diagnostic += "parameter '" + trainable[k]->name + "' became non-finite at epoch " +
                               std::to_string(epoch) + "\n";
          return result;
        }
      }
      loss_sum += bg.loss * count;
      ce_sum += bg.ce * count;
      cons_sum += bg.cons * count;
    }
    result.log.push_back(TrainLogRecord{epoch, loss_sum / n, ce_sum / n, cons_sum / n, config.learning_rate});
    result.epochs_completed = epoch;
  }
  return result;
}

int predict(const Embedding& video, const Eigen::MatrixXd& text_feats) {
  int best = 0;
  double best_cos = -std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < text_feats.cols(); ++c) {
    const double cs = cosine_similarity(video, text_feats.col(c));
    if (cs > best_cos) {
      best_cos = cs;
      best = static_cast<int>(c);
    }
  }
  return best;
}

int label_rank(const Embedding& video, const Eigen::MatrixXd& text_feats, int label) {
  const double own = cosine_similarity(video, text_feats.col(label));
  int rank = 0;
  for (Eigen::Index c = 0; c < text_feats.cols(); ++c) {
    if (c == label) continue;
    const double cs = cosine_similarity(video, text_feats.col(c));
    if (cs > own || (cs == own && c < label)) ++rank;
  }
  return rank;
}

VideoClip test_clip(const VideoClip& video, const TrainConfig& config) {
  Rng unused(0);
  SampledClip s = sample_frames(video, config.frames, config.clip_window, Mode::kTest, unused);
  return preprocess(s.clip, config.preprocess, Mode::kTest, unused);
}

namespace {

EvalResult score(const std::vector<Embedding>& videos, const std::vector<VideoClip>& source,
                 const Eigen::MatrixXd& text_feats) {
  EvalResult r;
  const int classes = static_cast<int>(text_feats.cols());
  std::vector<int> correct(static_cast<std::size_t>(classes), 0);
  std::vector<int> total(static_cast<std::size_t>(classes), 0);
  int top1 = 0;
  int top5 = 0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const int label = source[i].label;
    const int pred = predict(videos[i], text_feats);
    r.predictions.push_back(pred);
    ++total[static_cast<std::size_t>(label)];
    if (pred == label) {
      ++top1;
      ++correct[static_cast<std::size_t>(label)];
    }
    if (label_rank(videos[i], text_feats, label) < 5) ++top5;
  }
  const double n = static_cast<double>(videos.size());
  r.top1 = top1 / n;
  r.top5 = top5 / n;
  for (int c = 0; c < classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    r.per_class.push_back(total[k] > 0 ? static_cast<double>(correct[k]) / total[k]
                                       : std::numeric_limits<double>::quiet_NaN());
  }
  return r;
}

}  // namespace

EvalResult evaluate(const PromptParams& params, const std::vector<VideoClip>& videos,
                    const Eigen::MatrixXd& text_feats, const FrozenEncoderSet& enc, const TrainConfig& config,
                    PromptSwitches on) {
  if (videos.empty()) throw DomainError("evaluate: empty evaluation set");
  std::vector<Embedding> feats(videos.size());
  parallel_for(static_cast<int>(videos.size()), config.threads, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    feats[k] = forward_pass(test_clip(videos[k], config), params, enc, on).video;
  });
  return score(feats, videos, text_feats);
}

EvalResult evaluate_vanilla(const std::vector<VideoClip>& videos, const Eigen::MatrixXd& text_feats,
                            const FrozenEncoderSet& enc, const TrainConfig& config) {
  if (videos.empty()) throw DomainError("evaluate: empty evaluation set");
  std::vector<Embedding> feats;
  for (const auto& v : videos) {
    const VideoClip clip = test_clip(v, config);
    Eigen::MatrixXd r(enc.dims().embed_dim, clip.num_frames());
    for (int j = 0; j < clip.num_frames(); ++j) r.col(j) = enc.encode_frame(clip.frames.col(j));
    feats.push_back(baseline_video_feature(r));
  }
  return score(feats, videos, text_feats);
}

}  // namespace evclip
