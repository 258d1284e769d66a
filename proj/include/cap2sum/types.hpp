// SPDX-License-Identifier: Apache-2.0
/**
 * @file types.hpp
 * @brief Shared domain types for the summarization pipeline.
 *
 * Every type is a plain aggregate. `validate` checks the invariants and
 * returns its argument unchanged, throwing ValidationError otherwise.
 */
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace cap2sum {

using Index = Eigen::Index;

/// T×D per-frame embeddings as emitted by the frozen encoder (32-bit).
using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Working precision matrix used by models and losses.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Temporal segment [start, end); units depend on context (seconds or
/// normalized).
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
};

struct FrameFeatures {
  std::string video_id;
  FeatureMatrix features;
  double fps = 0.0;
  double duration_sec = 0.0;

  Index frames() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

struct CaptionEvent {
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::vector<std::string> sentence;  // pre-tokenized
};

struct DenseCaptionAnnotation {
  std::string video_id;
  std::vector<CaptionEvent> events;
  double duration_sec = 0.0;
};

struct SummaryScores {
  std::string video_id;
  Vector scores;
};

/// Binary frame mask. Zero means "unconstrained", not "excluded".
struct ClipPrior {
  std::string video_id;
  Vector prior;
};

struct GroundTruthSummary {
  std::string video_id;
  Matrix annotator_scores;           // A×T
  std::vector<Index> shot_boundaries;  // 0 = b_0 < b_1 < ... < b_n = T
  Vector consensus_scores;           // mean over annotators
  bool synthetic_shots = false;      // boundaries were not in the source data

  Index annotators() const { return annotator_scores.rows(); }
  Index frames() const { return annotator_scores.cols(); }

  /// Builds a summary from raw annotator rows, computing the consensus.
  static GroundTruthSummary from_annotators(std::string video_id,
                                            Matrix annotator_scores,
                                            std::vector<Index> shot_boundaries,
                                            bool synthetic_shots = false);
};

struct Proposal {
  double center = 0.0;  // normalized to (0,1)
  double width = 0.0;   // normalized to (0,1)
  double confidence_logit = 0.0;
  Matrix caption_logits;  // L×V
};

struct CaptionerOutput {
  std::vector<Proposal> proposals;
  Vector event_count_logits;  // over {0..max_event_count}
};

const FrameFeatures& validate(const FrameFeatures& f);
const DenseCaptionAnnotation& validate(const DenseCaptionAnnotation& a);
const SummaryScores& validate(const SummaryScores& s);
const ClipPrior& validate(const ClipPrior& p);
const GroundTruthSummary& validate(const GroundTruthSummary& g);
const CaptionerOutput& validate(const CaptionerOutput& c);

/// Uniform shots of `shot_len` frames covering [0, frames); a shorter
/// trailing shot holds any remainder.
std::vector<Index> uniform_shot_boundaries(Index frames, Index shot_len);

}  // namespace cap2sum
