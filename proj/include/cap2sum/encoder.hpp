// SPDX-License-Identifier: Apache-2.0
/**
 * @file encoder.hpp
 * @brief Frozen vision-language encoder boundary.
 *
 * Two backends exist. The stub hashes every input together with a seed
 * into a pseudo-random unit vector, so it is deterministic and needs no
 * weights. The table backend serves text embeddings exported by a real
 * encoder ahead of time; frames for it must arrive as precomputed feature
 * rows.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cap2sum/types.hpp"

namespace cap2sum {

class EncoderHandle {
 public:
  /// Deterministic hash encoder.
  static EncoderHandle stub(Index embed_dim, std::uint64_t seed,
                            double logit_scale = 100.0);

  /// Loads `{"name": str, "embed_dim": int, "logit_scale": num,
  /// "texts": {sentence: [D floats]}}`.
  static EncoderHandle from_text_table(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  Index embed_dim() const { return embed_dim_; }
  double logit_scale() const { return logit_scale_; }
  std::uint64_t seed() const { return seed_; }
  bool is_stub() const { return text_table_.empty(); }

  /// Encodes raw frame payloads (stub backend only).
  FrameFeatures encode_frames(const std::string& video_id,
                              std::span<const std::vector<std::uint8_t>> frames,
                              double fps) const;
  /// Validates and passes precomputed rows through.
  FrameFeatures encode_frames(const std::string& video_id,
                              const FeatureMatrix& precomputed, double fps) const;

  /// K×D text embeddings.
  Matrix encode_texts(std::span<const std::string> sentences) const;

 private:
  EncoderHandle() = default;
  Vector hashed_unit_vector(char domain, std::span<const std::uint8_t> bytes) const;

  std::string name_;
  Index embed_dim_ = 0;
  double logit_scale_ = 100.0;
  std::uint64_t seed_ = 0;
  std::map<std::string, Vector> text_table_;
};

}  // namespace cap2sum
