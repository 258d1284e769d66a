// SPDX-License-Identifier: Apache-2.0
/**
 * @file captioner.hpp
 * @brief Set-prediction dense video captioner driven by weighted features.
 *
 * A transformer encoder turns the weighted features into a memory; a fixed
 * set of learned event queries attends to it through decoder blocks. Each
 * decoded query feeds a localization head (sigmoid center/width), a
 * confidence head, and a one-layer autoregressive caption decoder whose
 * cross-attention is biased toward the proposal's temporal window. The
 * event counter classifies the mean query feature.
 *
 * The captioner exists to send gradients back into the summarizer through
 * the weighted features.
 */
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cap2sum/autograd.hpp"
#include "cap2sum/nn.hpp"
#include "cap2sum/objectives.hpp"
#include "cap2sum/types.hpp"
#include "cap2sum/vocabulary.hpp"

namespace cap2sum {

struct CaptionerConfig {
  Index input_dim = 512;
  Index embed_dim = 256;
  int num_heads = 4;
  int num_queries = 10;
  int max_caption_len = 20;
  int enc_layers = 2;
  int dec_layers = 2;
  int max_event_count = -1;  // negative: same as num_queries
  double mlp_ratio = 4.0;
  double dropout = 0.1;
  Vocabulary vocab;

  int event_classes() const { return (max_event_count < 0 ? num_queries : max_event_count) + 1; }
  void validate() const;
  nlohmann::json to_json() const;
  static CaptionerConfig from_json(const nlohmann::json& j);
  bool operator==(const CaptionerConfig&) const = default;
};

/// Differentiable captioner state for one video.
struct ProposalGraph {
  ag::Var memory;             // T×E
  ag::Var queries;            // N×E decoded event queries
  ag::Var centers_widths;     // N×2 after sigmoid
  ag::Var segments;           // N×2 normalized (start, end)
  ag::Var confidence_logits;  // N×1
  ag::Var count_logits;       // 1×C
};

class Captioner {
 public:
  Captioner(CaptionerConfig cfg, std::uint64_t seed);
  Captioner(const Captioner&) = delete;
  Captioner& operator=(const Captioner&) = delete;
  Captioner(Captioner&&) = default;
  Captioner& operator=(Captioner&&) = default;

  ProposalGraph forward_proposals(const ag::Var& weighted, const nn::ForwardContext& ctx) const;

  /// Logits (one row per input position) for proposal `proposal` given the
  /// decoder input tokens, starting with BOS.
  ag::Var caption_logits(const ProposalGraph& graph, Index proposal,
                         std::span<const int> input_tokens,
                         const nn::ForwardContext& ctx) const;

  /// Teacher-forced logits for a length-L target [w1..wk, EOS, PAD...]:
  /// the decoder input is [BOS, target[0..L-2]].
  ag::Var teacher_forced_logits(const ProposalGraph& graph, Index proposal,
                                std::span<const int> target,
                                const nn::ForwardContext& ctx) const;

  /// Eval-mode forward pass with greedy caption decoding for every query.
  CaptionerOutput caption_forward(const FeatureMatrix& weighted) const;
  CaptionerOutput caption_forward(const Matrix& weighted) const;

  const CaptionerConfig& config() const { return cfg_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }

 private:
  CaptionerConfig cfg_;
  nn::ParameterStore params_;
  nn::Linear input_proj_;
  std::vector<nn::TransformerBlock> encoder_;
  nn::LayerNorm enc_norm_;
  ag::Var query_embed_;
  std::vector<nn::TransformerBlock> decoder_;
  nn::LayerNorm dec_norm_;
  nn::Mlp loc_head_;
  nn::Linear conf_head_;
  nn::Linear count_head_;
  ag::Var token_embed_;
  nn::TransformerBlock caption_block_;
  nn::LayerNorm caption_norm_;
  nn::Linear caption_out_;
};

struct MatchWeights {
  double giou = 4.0;
  double cls = 2.0;
};

/// Minimum-cost one-to-one assignment of gt events to proposals with cost
/// giou·(1 − gIoU) + cls·(1 − sigmoid(confidence)). When there are more
/// events than proposals the longest events are kept (ties by index).
Assignment match_proposals(std::span<const Segment> predicted,
                           std::span<const double> confidence_logits,
                           std::span<const Segment> gt, MatchWeights w = {});

/// Convenience overload on model outputs; gt times are normalized by the
/// annotation duration.
Assignment match_proposals(const CaptionerOutput& pred, const DenseCaptionAnnotation& gt,
                           MatchWeights w = {});

/// Sum of pair costs of an assignment.
double assignment_cost(std::span<const Segment> predicted,
                       std::span<const double> confidence_logits,
                       std::span<const Segment> gt, const Assignment& a, MatchWeights w = {});

/// Event segments normalized by the annotation duration.
std::vector<Segment> normalized_segments(const DenseCaptionAnnotation& gt);

struct DecodedCaption {
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::string sentence;
  double confidence = 0.0;
};

/// Proposals whose sigmoid confidence exceeds `confidence_threshold`,
/// argmax-decoded until EOS, with segments scaled to `duration_sec`.
std::vector<DecodedCaption> decode_captions(const CaptionerOutput& pred,
                                            double confidence_threshold,
                                            double duration_sec, const Vocabulary& vocab);

}  // namespace cap2sum
