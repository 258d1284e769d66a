// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/encoder.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

#include "cap2sum/error.hpp"

namespace cap2sum {

namespace {

std::uint64_t fnv1a(char domain, std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto step = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  step(static_cast<std::uint8_t>(domain));
  for (auto b : bytes) step(b);
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

EncoderHandle EncoderHandle::stub(Index embed_dim, std::uint64_t seed, double logit_scale) {
  if (embed_dim < 1) throw ConfigError("encoder embed_dim must be >= 1");
  if (!(logit_scale > 0.0)) throw ConfigError("encoder logit_scale must be > 0");
  EncoderHandle h;
  h.name_ = "stub";
  h.embed_dim_ = embed_dim;
  h.seed_ = seed;
  h.logit_scale_ = logit_scale;
  return h;
}

EncoderHandle EncoderHandle::from_text_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open text embedding table " + path.string());
  EncoderHandle h;
  try {
    const auto j = nlohmann::json::parse(in);
    h.name_ = j.value("name", "table");
    h.embed_dim_ = j.at("embed_dim").get<Index>();
    h.logit_scale_ = j.value("logit_scale", 100.0);
    for (const auto& [text, values] : j.at("texts").items()) {
      const auto v = values.get<std::vector<double>>();
      if (static_cast<Index>(v.size()) != h.embed_dim_)
        throw ConfigError(path.string() + ": embedding for '" + text + "' has " +
                          std::to_string(v.size()) + " values, expected " +
                          std::to_string(h.embed_dim_));
      h.text_table_[text] = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (h.text_table_.empty()) throw ConfigError(path.string() + ": no text embeddings");
  return h;
}

Vector EncoderHandle::hashed_unit_vector(char domain,
                                         std::span<const std::uint8_t> bytes) const {
  std::mt19937_64 rng(splitmix64(fnv1a(domain, bytes) ^ splitmix64(seed_)));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(embed_dim_);
  double norm = 0.0;
  while (norm == 0.0) {
    for (Index i = 0; i < embed_dim_; ++i) v[i] = normal(rng);
    norm = v.norm();
  }
  return v / norm;
}

FrameFeatures EncoderHandle::encode_frames(const std::string& video_id,
                                           std::span<const std::vector<std::uint8_t>> frames,
                                           double fps) const {
  if (frames.empty()) throw ValidationError("frames", "frame sequence is empty");
  if (!is_stub())
    throw ConfigError("encoder '" + name_ +
                      "' cannot encode raw frames; supply precomputed features");
  FeatureMatrix m(static_cast<Index>(frames.size()), embed_dim_);
  for (std::size_t t = 0; t < frames.size(); ++t)
    m.row(static_cast<Index>(t)) = hashed_unit_vector('F', frames[t]).cast<float>().transpose();
  return encode_frames(video_id, m, fps);
}

FrameFeatures EncoderHandle::encode_frames(const std::string& video_id,
                                           const FeatureMatrix& precomputed,
                                           double fps) const {
  if (precomputed.rows() < 1) throw ValidationError("frames", "frame sequence is empty");
  if (precomputed.cols() != embed_dim_)
    throw ShapeError("feature dimension " + std::to_string(precomputed.cols()) +
                     " does not match encoder embed_dim " + std::to_string(embed_dim_));
  for (Index t = 0; t < precomputed.rows(); ++t) {
    if (precomputed.row(t).squaredNorm() == 0.0f)
      throw ValidationError("frames[" + std::to_string(t) + "]", "zero feature row");
  }
  FrameFeatures f;
  f.video_id = video_id;
  f.features = precomputed;
  f.fps = fps;
  f.duration_sec = static_cast<double>(precomputed.rows()) / fps;
  return validate(f);
}

Matrix EncoderHandle::encode_texts(std::span<const std::string> sentences) const {
  if (sentences.empty()) throw ValidationError("sentences", "sentence list is empty");
  Matrix out(static_cast<Index>(sentences.size()), embed_dim_);
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const auto& s = sentences[k];
    if (s.empty())
      throw ValidationError("sentences[" + std::to_string(k) + "]", "empty sentence");
    if (is_stub()) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
      out.row(static_cast<Index>(k)) = hashed_unit_vector('T', std::span(p, s.size())).transpose();
    } else {
      const auto it = text_table_.find(s);
      if (it == text_table_.end())
        throw NotFoundError("encoder '" + name_ + "' has no embedding for '" + s + "'");
      out.row(static_cast<Index>(k)) = it->second.transpose();
    }
  }
  return out;
}

}  // namespace cap2sum
