#include "evclip/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>

#include "evclip/losses.hpp"
#include "evclip/rng.hpp"
#include "evclip/synth.hpp"
#include "evclip/training.hpp"

namespace evclip {

namespace {

constexpr double kFloorFraction = 1e-3;
constexpr double kAbsoluteFloor = 1e-12;

struct PendingTensor {
  std::string group;
  std::string name;
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
};

// Fills errors once the whole group is sampled, because the floor is a
// fraction of the largest analytic entry in the group.
void finish(const std::vector<PendingTensor>& pending, GradCheckReport& report) {
  std::map<std::string, double> scale;
  for (const auto& p : pending) {
    scale[p.group] = std::max(scale[p.group], p.analytic.cwiseAbs().maxCoeff());
  }
  for (const auto& p : pending) {
    const double floor = std::max(kFloorFraction * scale[p.group], kAbsoluteFloor);
    GradCheckEntry e{p.group, p.name};
    e.checked = static_cast<int>(p.analytic.size());
    e.max_abs_grad = p.analytic.cwiseAbs().maxCoeff();
    const double denom = std::max({p.analytic.norm(), p.numeric.norm(), floor});
    e.max_rel_error = (p.analytic - p.numeric).norm() / denom;
    for (Eigen::Index i = 0; i < p.analytic.size(); ++i) {
      e.worst_entry_error = std::max(e.worst_entry_error, relative_error(p.analytic(i), p.numeric(i), floor));
    }
    report.entries.push_back(std::move(e));
  }
}

std::vector<Eigen::Index> pick_entries(Eigen::Index size, int limit, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (size <= limit) return idx;
  Rng rng(seed);
  for (int i = 0; i < limit; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(size - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Central differences of `loss` while `value` is perturbed in place, at the
// sampled entries; analytic and numeric columns are returned side by side.
struct TensorSample {
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
};

TensorSample sample_tensor(Eigen::MatrixXd& value, const Eigen::MatrixXd& analytic,
                           const std::function<double()>& loss, const GradCheckConfig& config, std::uint64_t seed) {
  const auto picks = pick_entries(value.size(), config.max_entries, seed);
  TensorSample t{Eigen::VectorXd(static_cast<Eigen::Index>(picks.size())),
                 Eigen::VectorXd(static_cast<Eigen::Index>(picks.size()))};
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    double& v = value.data()[picks[k]];
    const double saved = v;
    v = saved + config.step;
    const double up = loss();
    v = saved - config.step;
    const double down = loss();
    v = saved;
    t.numeric(row) = (up - down) / (2.0 * config.step);
    t.analytic(row) = analytic.data()[picks[k]];
  }
  return t;
}

double clip_loss(const std::vector<VideoClip>& clips, const Eigen::MatrixXd& text, const PromptParams& params,
                 const FrozenEncoderSet& enc, const TrainConfig& config) {
  double total = 0.0;
  for (const auto& clip : clips) {
    const ForwardResult r = forward_pass(clip, params, enc, config.prompts);
    const int label = clip.label;
    const double ce = contrastive_ce_loss(Eigen::MatrixXd(r.video), text, std::span<const int>(&label, 1),
                                          config.temperature);
    total += total_loss(ce, consistency_loss(r.frame_feats), config.lambda);
  }
  return total / static_cast<double>(clips.size());
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::group_error(const std::string& group) const {
  double worst = 0.0;
  for (const auto& e : entries) {
    if (e.group == group) worst = std::max(worst, e.max_rel_error);
  }
  return worst;
}

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [&](const GradCheckEntry& e) {
    return std::isfinite(e.max_rel_error) && e.max_rel_error < tolerance;
  });
}

std::string GradCheckReport::to_text() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "tolerance = %.3g\nlambda = %.6g\n", tolerance, lambda);
  out += buf;
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%s %s checked=%d rel_error=%.3e worst_entry=%.3e max_abs_grad=%.3e\n",
                  e.group.c_str(), e.name.c_str(), e.checked, e.max_rel_error, e.worst_entry_error, e.max_abs_grad);
    out += buf;
  }
  for (const char* g : {"mask", "context", "losses"}) {
    std::snprintf(buf, sizeof buf, "group %s max_rel_error = %.3e\n", g, group_error(g));
    out += buf;
  }
  out += passed() ? "result = pass\n" : "result = fail\n";
  return out;
}

GradCheckReport grad_check(const GradCheckConfig& config) {
  EncoderDims dims;
  dims.embed_dim = 16;
  dims.latent_dim = 8;
  dims.latent_height = 4;
  dims.latent_width = 4;
  dims.frame_height = 32;
  dims.frame_width = 32;
  dims.channels = 3;
  const auto enc = make_toy_encoders(mix_seed(config.seed, 1), dims);

  SynthSpec spec;
  spec.classes = 3;
  spec.per_class = 1;
  spec.frames = 4;
  spec.height = dims.frame_height;
  spec.width = dims.frame_width;
  spec.seed = mix_seed(config.seed, 2);
  const SynthDataset ds = generate_synthetic(spec);
  std::vector<VideoClip> clips(ds.videos.begin(), ds.videos.begin() + 2);
  Eigen::MatrixXd text(dims.embed_dim, spec.classes);
  for (int c = 0; c < spec.classes; ++c) text.col(c) = enc->encode_text(ds.class_names[static_cast<std::size_t>(c)]);

  TrainConfig tc;
  tc.frames = 4;
  tc.clip_window = 4;
  tc.temperature = config.temperature;
  tc.lambda = config.lambda;

  // Zero-initialised residual outputs would hide the attention paths, so the
  // check runs at a random point in parameter space.
  PromptParams params = init_prompts(dims, tc.frames, mix_seed(config.seed, 3));
  Rng prng(mix_seed(config.seed, 4));
  for (auto* p : params.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += config.parameter_noise * prng.normal();
  }

  GradCheckReport report;
  report.tolerance = config.tolerance;
  report.lambda = config.lambda;

  const BatchGradient bg = batch_gradient(clips, text, params, *enc, tc);
  const auto refs = params.parameters();
  const auto mask_count = params.mask.parameters().size();
  const auto loss = [&] { return clip_loss(clips, text, params, *enc, tc); };
  std::vector<PendingTensor> pending;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    TensorSample t = sample_tensor(refs[k]->value, bg.grads[k], loss, config, mix_seed(config.seed, 100 + k));
    pending.push_back({k < mask_count ? "mask" : "context", refs[k]->name, std::move(t.analytic), std::move(t.numeric)});
  }

  // Loss inputs: video features and frame features fed directly.
  Rng lrng(mix_seed(config.seed, 5));
  Eigen::MatrixXd videos(dims.embed_dim, 3);
  Eigen::MatrixXd frames(dims.embed_dim, 4);
  for (Eigen::Index i = 0; i < videos.size(); ++i) videos.data()[i] = lrng.normal();
  for (Eigen::Index i = 0; i < frames.size(); ++i) frames.data()[i] = lrng.normal() + 0.5;
  const std::vector<int> labels = {0, 2, 1};
  const auto loss_value = [&] {
    return total_loss(contrastive_ce_loss(videos, text, labels, config.temperature), consistency_loss(frames),
                      config.lambda);
  };
  ad::Tape tape;
  const ad::Var vv = tape.variable(videos);
  const ad::Var fv = tape.variable(frames);
  const ad::Var l = total_loss(contrastive_ce_loss(vv, tape.constant(text), labels, config.temperature),
                               consistency_loss(fv), config.lambda);
  tape.backward(l);
  const Eigen::MatrixXd gv = tape.grad(vv);
  const Eigen::MatrixXd gf = tape.grad(fv);
  TensorSample ts = sample_tensor(videos, gv, loss_value, config, mix_seed(config.seed, 200));
  pending.push_back({"losses", "video_features", std::move(ts.analytic), std::move(ts.numeric)});
  ts = sample_tensor(frames, gf, loss_value, config, mix_seed(config.seed, 201));
  pending.push_back({"losses", "frame_features", std::move(ts.analytic), std::move(ts.numeric)});
  finish(pending, report);
  return report;
}

}  // namespace evclip
