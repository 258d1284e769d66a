// SPDX-License-Identifier: Apache-2.0
/**
 * @file summarizer.hpp
 * @brief Transformer mapping frame features to importance scores in (0,1).
 *
 * Frame features are projected to tokens, offset by a sinusoidal position
 * table, passed through pre-norm self-attention blocks, and read out by a
 * two-layer MLP with a sigmoid.
 */
#pragma once

#include <cstdint>
#include <random>

#include "json.hpp"

#include "cap2sum/autograd.hpp"
#include "cap2sum/nn.hpp"
#include "cap2sum/types.hpp"

namespace cap2sum {

struct SummarizerConfig {
  Index input_dim = 512;
  Index embed_dim = 256;
  int num_layers = 4;
  int num_heads = 4;
  double mlp_ratio = 4.0;
  double dropout = 0.1;
  Index max_frames = 2048;

  void validate() const;
  nlohmann::json to_json() const;
  static SummarizerConfig from_json(const nlohmann::json& j);
  bool operator==(const SummarizerConfig&) const = default;
};

/// F_w = S·F: row t of the features scaled by score t.
ag::Var weight_features(const ag::Var& features, const ag::Var& scores);
FeatureMatrix weight_features(const FrameFeatures& f, const SummaryScores& s);

class Summarizer {
 public:
  Summarizer(SummarizerConfig cfg, std::uint64_t seed);
  Summarizer(const Summarizer&) = delete;
  Summarizer& operator=(const Summarizer&) = delete;
  Summarizer(Summarizer&&) = default;
  Summarizer& operator=(Summarizer&&) = default;

  /// T×1 scores for T×D features.
  ag::Var forward(const ag::Var& features, const nn::ForwardContext& ctx) const;

  /// Eval-mode inference without building a graph.
  SummaryScores summarize(const FrameFeatures& f) const;

  const SummarizerConfig& config() const { return cfg_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }

 private:
  SummarizerConfig cfg_;
  nn::ParameterStore params_;
  nn::Linear embed_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm norm_;
  nn::Linear head_hidden_;
  nn::Linear head_out_;
};

/// Converts 32-bit features to a working-precision constant.
ag::Var feature_var(const FeatureMatrix& features);

}  // namespace cap2sum
