// SPDX-License-Identifier: Apache-2.0
/**
 * @file clip_prior.hpp
 * @brief Object-presence prior from frame/label similarity.
 *
 * Pipeline: prompts built from a fixed label list are embedded by the text
 * encoder; frame and text rows are L2-normalised and compared by a scaled
 * dot product; a softmax over labels gives per-frame label confidences.
 * For each label, maximal runs of frames whose confidence exceeds `tau`
 * are kept when `min_run_frames < length < max_run_fraction · T`, and the
 * kept runs of all labels are OR-ed into a binary mask.
 */
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cap2sum/encoder.hpp"
#include "cap2sum/types.hpp"

namespace cap2sum {

struct PriorConfig {
  std::vector<std::string> labels;
  std::string prompt_template = "An image of [object].";
  double tau = 0.4;
  int min_run_frames = 10;
  double max_run_fraction = 0.5;
  double logit_scale = 100.0;

  void validate() const;
  /// Prompt sentences with "[object]" substituted, one per label.
  std::vector<std::string> prompts() const;
};

/// One label per non-empty line; '#' starts a comment line.
std::vector<std::string> load_labels(const std::filesystem::path& path);
/// SHA-256 of the labels joined by '\n'; recorded in run manifests.
std::string label_set_hash(const std::vector<std::string>& labels);

/// T×K row-stochastic similarity, softmax over the label axis.
Matrix build_similarity(const Matrix& frame_features, const Matrix& text_features,
                        double logit_scale);

ClipPrior extract_prior(const Matrix& similarity, const PriorConfig& cfg,
                        std::string video_id = {});

/// Text embeddings for every prompt of `cfg`.
Matrix encode_prompts(const EncoderHandle& encoder, const PriorConfig& cfg);

/// Full pipeline for one video given precomputed prompt embeddings.
ClipPrior generate_prior(const FrameFeatures& features, const Matrix& prompt_embeddings,
                         const PriorConfig& cfg);

}  // namespace cap2sum
