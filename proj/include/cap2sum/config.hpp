// SPDX-License-Identifier: Apache-2.0
/**
 * @file config.hpp
 * @brief Declarative run configuration.
 *
 * A JSON tree of sections (summarizer, captioner, prior, loss, focal,
 * train, eval, captions, encoder, dataset, synthetic). A config file only
 * needs the keys it changes; `section.key=value` overrides apply last.
 * Unknown keys and type mismatches are errors naming the key path.
 */
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"

#include "cap2sum/captioner.hpp"
#include "cap2sum/clip_prior.hpp"
#include "cap2sum/objectives.hpp"
#include "cap2sum/select_eval.hpp"
#include "cap2sum/summarizer.hpp"
#include "cap2sum/synthetic.hpp"
#include "cap2sum/training.hpp"

namespace cap2sum {

/// Built-in defaults; `configs/default.json` holds the same tree.
const nlohmann::json& default_config();

/// Defaults, then the file (if any), then `key.path=value` overrides.
nlohmann::json load_config(const std::optional<std::filesystem::path>& file,
                           std::span<const std::string> overrides);

/// Applies one `a.b.c=value` override in place. The value is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& tree, const std::string& assignment);

struct EncoderSettings {
  std::string name = "stub";
  Index embed_dim = 512;
  std::uint64_t seed = 0;
  double logit_scale = 100.0;
  std::string text_table;
};

struct AppConfig {
  SummarizerConfig summarizer;
  CaptionerConfig captioner;  // vocabulary filled in from data
  PriorConfig prior;          // labels filled in from `labels_file`
  std::string labels_file;
  LossWeights loss;
  FocalParams focal;
  TrainConfig train;
  double budget_fraction = 0.15;
  Protocol protocol = Protocol::tvsum_avg;
  double confidence_threshold = 0.5;
  EncoderSettings encoder;
  double default_fps = 2.0;
  SyntheticConfig synthetic;

  /// Validates every section; errors name the offending key path.
  static AppConfig from_json(const nlohmann::json& tree);
};

/// Labels file from the config, or the shipped label asset when empty.
std::filesystem::path resolve_labels_file(const AppConfig& cfg);

EncoderHandle make_encoder(const EncoderSettings& s);

}  // namespace cap2sum
