// SPDX-License-Identifier: Apache-2.0
/**
 * @file training.hpp
 * @brief Pre-training and the two fine-tuning modes.
 *
 * One Trainer owns the optimizer and the run's random stream (data order
 * and dropout), both seeded from TrainConfig::seed.
 */
#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cap2sum/checkpoint.hpp"
#include "cap2sum/clip_prior.hpp"
#include "cap2sum/error.hpp"
#include "cap2sum/objectives.hpp"
#include "cap2sum/optim.hpp"

namespace cap2sum {

enum class TrainMode { pretrain, finetune_sup, finetune_weak };
TrainMode parse_train_mode(const std::string& name);
std::string to_string(TrainMode mode);

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 1;
  int epochs = 1;
  std::uint64_t seed = 0;
  std::string optimizer = "adam";
  TrainMode mode = TrainMode::pretrain;
  int checkpoint_every = 0;  // steps; 0 disables periodic checkpoints
  bool freeze_captioner = false;
  double grad_clip = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double split_ratio = 0.8;

  void validate() const;
};

struct TrainingSample {
  FrameFeatures features;
  std::optional<DenseCaptionAnnotation> captions;
  std::optional<ClipPrior> prior;
  std::optional<GroundTruthSummary> summary;
};

struct StepReport {
  long step = 0;
  int epoch = 0;
  std::string video_id;
  double caption = 0.0;
  double prior = 0.0;
  double length = 0.0;
  double variance = 0.0;
  double giou = 0.0;
  double cls = 0.0;
  double ec = 0.0;
  double pred = 0.0;
  double mse = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
  double best_total = 0.0;

  nlohmann::json to_json(bool include_wall_clock = true) const;
};

/// Thrown when a loss turns NaN/Inf; `snapshot()` names the video and the
/// component values at the failing step.
class NonFiniteLossError : public Error {
 public:
  explicit NonFiniteLossError(nlohmann::json snapshot);
  const nlohmann::json& snapshot() const { return snapshot_; }

 private:
  nlohmann::json snapshot_;
};

class Trainer {
 public:
  Trainer(Models& models, TrainConfig cfg, LossWeights weights = {}, FocalParams focal = {});

  StepReport pretrain_step(const FrameFeatures& video, const DenseCaptionAnnotation& captions,
                           const ClipPrior& prior);
  StepReport finetune_sup_step(const FrameFeatures& video, const GroundTruthSummary& gt);
  StepReport finetune_weak_step(const FrameFeatures& video,
                                const DenseCaptionAnnotation& captions);

  /// cfg.epochs passes over `data` in a per-epoch shuffled order, using the
  /// step function of cfg.mode.
  std::vector<StepReport> run(std::span<const TrainingSample> data,
                              const std::function<void(const StepReport&)>& on_step = {});

  const TrainConfig& config() const { return cfg_; }
  long steps() const { return step_; }

 private:
  CaptionLossTerms caption_terms(const ag::Var& weighted, const DenseCaptionAnnotation& captions,
                                 const nn::ForwardContext& ctx, const StepReport& report) const;
  nn::ForwardContext summarizer_ctx();
  nn::ForwardContext captioner_ctx();
  void update(const ag::Var& loss, StepReport& report);
  StepReport start(const std::string& video_id) const;
  void finish(StepReport& report, std::chrono::steady_clock::time_point t0);

  Models& models_;
  TrainConfig cfg_;
  LossWeights weights_;
  FocalParams focal_;
  std::mt19937_64 rng_;
  std::vector<ag::Var> trainable_;
  Adam optimizer_;
  long step_ = 0;
  int epoch_ = 0;
  double best_total_ = 0.0;
};

/// JSON lines, one record per step.
void write_history(const std::filesystem::path& path, std::span<const StepReport> history,
                   bool include_wall_clock = true);

/// Seeded shuffle of `ids` split into round(ratio·n) training ids and the
/// rest; both halves are returned sorted.
std::pair<std::vector<std::string>, std::vector<std::string>> split_videos(
    std::vector<std::string> ids, double ratio, std::uint64_t seed);

/// Loads `<dir>/<stem>.prior` when present, otherwise computes the prior
/// and stores it there.
ClipPrior load_or_generate_prior(const std::filesystem::path& dir, const FrameFeatures& features,
                                 const Matrix& prompt_embeddings, const PriorConfig& cfg);

/// Vocabulary over every caption of `annotations`.
Vocabulary build_vocabulary(std::span<const DenseCaptionAnnotation> annotations);

}  // namespace cap2sum
