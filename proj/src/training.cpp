// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "cap2sum/dataset_io.hpp"
#include "cap2sum/log.hpp"

namespace cap2sum {

using ag::Var;

TrainMode parse_train_mode(const std::string& name) {
  if (name == "pretrain") return TrainMode::pretrain;
  if (name == "finetune_sup" || name == "sup") return TrainMode::finetune_sup;
  if (name == "finetune_weak" || name == "weak") return TrainMode::finetune_weak;
  throw ConfigError("unknown training mode '" + name + "'");
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::pretrain: return "pretrain";
    case TrainMode::finetune_sup: return "finetune_sup";
    case TrainMode::finetune_weak: return "finetune_weak";
  }
  return "pretrain";
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ValidationError("train.learning_rate", "must be >= 0");
  if (batch_size != 1) throw ValidationError("train.batch_size", "only batch size 1 is supported");
  if (epochs < 0) throw ValidationError("train.epochs", "must be >= 0");
  if (optimizer != "adam") throw ValidationError("train.optimizer", "only 'adam' is supported");
  if (checkpoint_every < 0) throw ValidationError("train.checkpoint_every", "must be >= 0");
  if (!(grad_clip >= 0.0)) throw ValidationError("train.grad_clip", "must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0))
    throw ValidationError("train.adam_beta1", "must lie in [0,1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ValidationError("train.adam_beta2", "must lie in [0,1)");
  if (!(adam_eps > 0.0)) throw ValidationError("train.adam_eps", "must be > 0");
  if (!(split_ratio > 0.0 && split_ratio <= 1.0))
    throw ValidationError("train.split_ratio", "must lie in (0,1]");
}

nlohmann::json StepReport::to_json(bool include_wall_clock) const {
  nlohmann::json j = {{"step", step},
                      {"epoch", epoch},
                      {"video_id", video_id},
                      {"components",
                       {{"caption", caption},
                        {"prior", prior},
                        {"length", length},
                        {"variance", variance},
                        {"giou", giou},
                        {"cls", cls},
                        {"ec", ec},
                        {"pred", pred},
                        {"mse", mse}}},
                      {"total", total},
                      {"grad_norm", grad_norm},
                      {"lr", lr},
                      {"best_total", best_total}};
  if (include_wall_clock) j["wall_ms"] = wall_ms;
  return j;
}

NonFiniteLossError::NonFiniteLossError(nlohmann::json snapshot)
    : Error("non-finite loss: " + snapshot.dump()), snapshot_(std::move(snapshot)) {}

Trainer::Trainer(Models& models, TrainConfig cfg, LossWeights weights, FocalParams focal)
    : models_(models),
      cfg_(std::move(cfg)),
      weights_(weights),
      focal_(focal),
      rng_(cfg_.seed),
      trainable_([&] {
        auto p = collect(models.summarizer.parameters());
        if (models.captioner && !cfg_.freeze_captioner) {
          auto c = collect(models.captioner->parameters());
          p.insert(p.end(), c.begin(), c.end());
        }
        return p;
      }()),
      optimizer_(trainable_, AdamConfig{cfg_.learning_rate, cfg_.adam_beta1, cfg_.adam_beta2,
                                        cfg_.adam_eps}) {
  cfg_.validate();
  weights_.validate();
  if (cfg_.mode != TrainMode::finetune_sup && !models_.captioner)
    throw ConfigError(to_string(cfg_.mode) + " requires a captioner");
}

nn::ForwardContext Trainer::summarizer_ctx() {
  return {true, models_.summarizer.config().dropout, &rng_};
}

nn::ForwardContext Trainer::captioner_ctx() {
  return {true, models_.captioner->config().dropout, &rng_};
}

StepReport Trainer::start(const std::string& video_id) const {
  StepReport r;
  r.step = step_ + 1;
  r.epoch = epoch_;
  r.video_id = video_id;
  r.lr = cfg_.learning_rate;
  return r;
}

CaptionLossTerms Trainer::caption_terms(const Var& weighted,
                                        const DenseCaptionAnnotation& captions,
                                        const nn::ForwardContext& ctx,
                                        const StepReport& report) const {
  const Captioner& cap = *models_.captioner;
  const ProposalGraph g = cap.forward_proposals(weighted, ctx);

  CaptionTargets targets;
  targets.segments = normalized_segments(captions);
  for (const auto& e : captions.events)
    targets.tokens.push_back(cap.config().vocab.encode_target(e.sentence,
                                                              cap.config().max_caption_len));
  targets.event_count = static_cast<int>(captions.events.size());

  std::vector<Segment> segs;
  std::vector<double> conf;
  for (Index i = 0; i < g.segments.rows(); ++i) {
    segs.push_back({g.segments.value()(i, 0), g.segments.value()(i, 1)});
    conf.push_back(g.confidence_logits.value()(i, 0));
  }
  // NaN proposals cannot be matched; fail the same way a NaN loss would
  if (!g.segments.value().allFinite() || !g.confidence_logits.value().allFinite()) {
    nlohmann::json snapshot = report.to_json(false);
    snapshot["reason"] = "non-finite captioner proposals";
    throw NonFiniteLossError(snapshot);
  }
  const Assignment a =
      match_proposals(segs, conf, targets.segments, MatchWeights{weights_.giou, weights_.cls});

  CaptionPrediction pred{g.segments, g.confidence_logits, g.count_logits, {}};
  for (const auto& pair : a.pairs) {
    pred.caption_logits.push_back(cap.teacher_forced_logits(
        g, pair.proposal, targets.tokens[static_cast<std::size_t>(pair.gt)], ctx));
  }
  return caption_loss(pred, targets, a, weights_, focal_);
}

void Trainer::update(const Var& loss, StepReport& report) {
  const bool finite = std::isfinite(report.total) && std::isfinite(report.caption) &&
                      std::isfinite(report.prior) && std::isfinite(report.length) &&
                      std::isfinite(report.variance) && std::isfinite(report.mse);
  if (!finite) throw NonFiniteLossError(report.to_json(false));
  optimizer_.zero_grad();
  if (models_.captioner) models_.captioner->parameters().zero_grad();
  loss.backward();
  report.grad_norm = clip_grad_norm(trainable_, cfg_.grad_clip);
  optimizer_.step();
}

void Trainer::finish(StepReport& report, std::chrono::steady_clock::time_point t0) {
  ++step_;
  best_total_ = step_ == 1 ? report.total : std::min(best_total_, report.total);
  report.best_total = best_total_;
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

StepReport Trainer::pretrain_step(const FrameFeatures& video,
                                  const DenseCaptionAnnotation& captions,
                                  const ClipPrior& prior) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!models_.captioner) throw ConfigError("pretraining requires a captioner");
  StepReport r = start(video.video_id);
  const Var f = feature_var(video.features);
  const Var s = models_.summarizer.forward(f, summarizer_ctx());
  LossComponents c{Var{}, prior_loss(s, prior.prior), length_loss(s, weights_.target_length),
                   variance_loss(s)};
  r.prior = c.prior.item();
  r.length = c.length.item();
  r.variance = c.variance.item();
  const CaptionLossTerms cap =
      caption_terms(weight_features(f, s), captions, captioner_ctx(), r);
  c.caption = cap.total;
  const Var total = total_loss(c, weights_);
  r.caption = cap.total.item();
  r.giou = cap.giou.item();
  r.cls = cap.cls.item();
  r.ec = cap.ec.item();
  r.pred = cap.pred.item();
  r.total = total.item();
  update(total, r);
  finish(r, t0);
  return r;
}

StepReport Trainer::finetune_sup_step(const FrameFeatures& video, const GroundTruthSummary& gt) {
  const auto t0 = std::chrono::steady_clock::now();
  StepReport r = start(video.video_id);
  if (gt.frames() != video.frames())
    throw ShapeError("ground truth for " + video.video_id + " has " +
                     std::to_string(gt.frames()) + " frames, features have " +
                     std::to_string(video.frames()));
  const Var s = models_.summarizer.forward(feature_var(video.features), summarizer_ctx());
  const Var loss = finetune_mse(s, rescale_min_max(gt.consensus_scores));
  r.mse = loss.item();
  r.total = r.mse;
  update(loss, r);
  finish(r, t0);
  return r;
}

StepReport Trainer::finetune_weak_step(const FrameFeatures& video,
                                       const DenseCaptionAnnotation& captions) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!models_.captioner) throw ConfigError("weak fine-tuning requires a captioner");
  StepReport r = start(video.video_id);
  const Var f = feature_var(video.features);
  const Var s = models_.summarizer.forward(f, summarizer_ctx());
  const CaptionLossTerms cap =
      caption_terms(weight_features(f, s), captions, captioner_ctx(), r);
  r.caption = cap.total.item();
  r.giou = cap.giou.item();
  r.cls = cap.cls.item();
  r.ec = cap.ec.item();
  r.pred = cap.pred.item();
  r.total = r.caption;
  update(cap.total, r);
  finish(r, t0);
  return r;
}

std::vector<StepReport> Trainer::run(std::span<const TrainingSample> data,
                                     const std::function<void(const StepReport&)>& on_step) {
  for (const auto& sample : data) {
    const auto& id = sample.features.video_id;
    switch (cfg_.mode) {
      case TrainMode::pretrain:
        if (!sample.captions) throw ValidationError("captions", "missing for video " + id);
        if (!sample.prior) throw ValidationError("prior", "missing for video " + id);
        break;
      case TrainMode::finetune_weak:
        if (!sample.captions) throw ValidationError("captions", "missing for video " + id);
        break;
      case TrainMode::finetune_sup:
        if (!sample.summary) throw ValidationError("summary", "missing for video " + id);
        break;
    }
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data[a].features.video_id < data[b].features.video_id;
  });
  std::vector<StepReport> history;
  for (int e = 0; e < cfg_.epochs; ++e) {
    epoch_ = e;
    std::shuffle(order.begin(), order.end(), rng_);
    for (const std::size_t i : order) {
      const auto& sample = data[i];
      StepReport r;
      switch (cfg_.mode) {
        case TrainMode::pretrain:
          r = pretrain_step(sample.features, *sample.captions, *sample.prior);
          break;
        case TrainMode::finetune_sup:
          r = finetune_sup_step(sample.features, *sample.summary);
          break;
        case TrainMode::finetune_weak:
          r = finetune_weak_step(sample.features, *sample.captions);
          break;
      }
      if (on_step) on_step(r);
      history.push_back(std::move(r));
    }
  }
  return history;
}

void write_history(const std::filesystem::path& path, std::span<const StepReport> history,
                   bool include_wall_clock) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write history " + path.string());
  for (const auto& r : history) out << r.to_json(include_wall_clock).dump() << '\n';
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_videos(
    std::vector<std::string> ids, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ValidationError("split_ratio", "must lie in (0,1]");
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n_train =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(ids.size())));
  std::vector<std::string> train(ids.begin(), ids.begin() + static_cast<long>(n_train));
  std::vector<std::string> held(ids.begin() + static_cast<long>(n_train), ids.end());
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

ClipPrior load_or_generate_prior(const std::filesystem::path& dir, const FrameFeatures& features,
                                 const Matrix& prompt_embeddings, const PriorConfig& cfg) {
  const auto path = dir / (sanitize_file_stem(features.video_id) + ".prior");
  if (std::filesystem::exists(path)) {
    ClipPrior p = read_prior(path, features.video_id);
    if (p.prior.size() == features.frames()) return p;
    log_warning("cached prior for " + features.video_id + " has the wrong length; recomputing");
  }
  ClipPrior p = generate_prior(features, prompt_embeddings, cfg);
  std::filesystem::create_directories(dir);
  write_prior(path, p);
  return p;
}

Vocabulary build_vocabulary(std::span<const DenseCaptionAnnotation> annotations) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& a : annotations)
    for (const auto& e : a.events) sentences.push_back(e.sentence);
  return Vocabulary::build(sentences);
}

}  // namespace cap2sum
