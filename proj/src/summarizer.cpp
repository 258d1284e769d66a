// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/summarizer.hpp"

#include "cap2sum/error.hpp"

namespace cap2sum {

using ag::Var;

void SummarizerConfig::validate() const {
  if (input_dim < 1) throw ValidationError("summarizer.input_dim", "must be >= 1");
  if (embed_dim < 1) throw ValidationError("summarizer.embed_dim", "must be >= 1");
  if (num_layers < 0) throw ValidationError("summarizer.num_layers", "must be >= 0");
  if (num_heads < 1 || embed_dim % num_heads != 0)
    throw ValidationError("summarizer.num_heads", "embed_dim must be divisible by num_heads");
  if (!(mlp_ratio > 0.0)) throw ValidationError("summarizer.mlp_ratio", "must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ValidationError("summarizer.dropout", "must lie in [0,1)");
  if (max_frames < 1) throw ValidationError("summarizer.max_frames", "must be >= 1");
}

nlohmann::json SummarizerConfig::to_json() const {
  return {{"input_dim", input_dim}, {"embed_dim", embed_dim}, {"num_layers", num_layers},
          {"num_heads", num_heads}, {"mlp_ratio", mlp_ratio}, {"dropout", dropout},
          {"max_frames", max_frames}};
}

SummarizerConfig SummarizerConfig::from_json(const nlohmann::json& j) {
  SummarizerConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.dropout = j.value("dropout", c.dropout);
  c.max_frames = j.value("max_frames", c.max_frames);
  return c;
}

Var weight_features(const Var& features, const Var& scores) {
  if (scores.cols() != 1 || scores.rows() != features.rows())
    throw ShapeError("weight_features: " + std::to_string(scores.rows()) + " scores for " +
                     std::to_string(features.rows()) + " frames");
  return ag::scale_rows(features, scores);
}

FeatureMatrix weight_features(const FrameFeatures& f, const SummaryScores& s) {
  if (s.scores.size() != f.frames())
    throw ShapeError("weight_features: " + std::to_string(s.scores.size()) +
                     " scores for " + std::to_string(f.frames()) + " frames");
  return (f.features.array().colwise() * s.scores.cast<float>().array()).matrix();
}

Var feature_var(const FeatureMatrix& features) {
  return Var::constant(features.cast<double>());
}

Summarizer::Summarizer(SummarizerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  embed_ = nn::Linear(params_, "summarizer.embed", cfg_.input_dim, cfg_.embed_dim, rng);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    blocks_.emplace_back(params_, "summarizer.block" + std::to_string(l), cfg_.embed_dim,
                         cfg_.num_heads, cfg_.mlp_ratio, false, rng);
  }
  norm_ = nn::LayerNorm(params_, "summarizer.norm", cfg_.embed_dim);
  head_hidden_ = nn::Linear(params_, "summarizer.head.fc1", cfg_.embed_dim, cfg_.embed_dim, rng);
  head_out_ = nn::Linear(params_, "summarizer.head.fc2", cfg_.embed_dim, 1, rng);
}

Var Summarizer::forward(const Var& features, const nn::ForwardContext& ctx) const {
  const Index frames = features.rows();
  if (frames < 1) throw ValidationError("features", "T must be >= 1");
  if (frames > cfg_.max_frames)
    throw ValidationError("features", "T = " + std::to_string(frames) +
                                          " exceeds max_frames = " +
                                          std::to_string(cfg_.max_frames) +
                                          "; chunk or re-sample the video");
  if (features.cols() != cfg_.input_dim)
    throw ShapeError("summarizer expects D = " + std::to_string(cfg_.input_dim) + ", got " +
                     std::to_string(features.cols()));
  Var x = embed_(features) + Var::constant(nn::sinusoidal_encoding(frames, cfg_.embed_dim));
  x = ctx.maybe_dropout(x);
  for (const auto& block : blocks_) x = block(x, ctx);
  return ag::sigmoid(head_out_(ag::gelu(head_hidden_(norm_(x)))));
}

SummaryScores Summarizer::summarize(const FrameFeatures& f) const {
  ag::NoGradGuard no_grad;
  const Var s = forward(feature_var(f.features), nn::ForwardContext{});
  return SummaryScores{f.video_id, s.value().col(0)};
}

}  // namespace cap2sum
