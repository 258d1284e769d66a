// SPDX-License-Identifier: Apache-2.0
/**
 * @file synthetic.hpp
 * @brief Seeded synthetic fixture set for end-to-end checks.
 *
 * Caption videos hold one or two "concept" segments whose frames cluster
 * around a concept direction orthogonal to every label prompt, and whose
 * captions name the concept. Prior-only videos hold one segment of frames
 * close to a label prompt (so the object prior fires there) and a single
 * generic caption spanning the whole video. All other frames are noisy
 * copies of one background sequence shared by every video. Designated
 * frames are the concept and object segments.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cap2sum/clip_prior.hpp"
#include "cap2sum/encoder.hpp"
#include "cap2sum/types.hpp"
#include "cap2sum/vocabulary.hpp"

namespace cap2sum {

struct SyntheticConfig {
  int videos = 8;
  int prior_only_videos = 2;
  Index frames = 48;
  double fps = 1.0;
  Index segment_frames = 14;  // designated frames per video
  double frame_noise = 0.3;
  double feature_norm = 3.0;  // L2 norm of every frame row
  int annotators = 3;
  double annotator_noise = 0.05;
  Index shot_frames = 4;
  std::uint64_t seed = 0;
};

struct SyntheticVideo {
  FrameFeatures features;
  DenseCaptionAnnotation captions;
  GroundTruthSummary summary;
  Vector designated;  // 0/1
  bool prior_only = false;
};

struct SyntheticDataset {
  std::vector<SyntheticVideo> videos;
  Vocabulary vocab;
};

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& cfg, const EncoderHandle& encoder,
                                        const PriorConfig& prior);

/// Writes `features/` (feature store), `captions.json`, `summaries/`
/// (per-video records), `vocab.json` and `designated.json` under `dir`.
void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDataset& data);

/// Mean score over designated frames divided by the mean elsewhere.
double in_out_ratio(const Vector& scores, const Vector& designated);

}  // namespace cap2sum
