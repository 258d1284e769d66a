// SPDX-License-Identifier: Apache-2.0
/**
 * @file select_eval.hpp
 * @brief Keyshot selection by 0/1 knapsack and multi-annotator F1.
 *
 * User summaries are derived from each annotator's frame scores with the
 * same shot/knapsack pipeline as the machine summary.
 */
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cap2sum/types.hpp"

namespace cap2sum {

struct Shot {
  Index start_frame = 0;
  Index end_frame = 0;  // exclusive
  double mean_score = 0.0;

  Index length() const { return end_frame - start_frame; }
};

std::vector<Shot> segment_shots(std::span<const Index> boundaries, const Vector& scores);
std::vector<Shot> segment_shots(const GroundTruthSummary& gt, const Vector& scores);

/// Exact 0/1 knapsack over shots (value = mean_score·length, weight =
/// length). Shots with non-positive value are never selected. Among
/// optimal subsets the lexicographically smallest ascending index list
/// wins. Returns selected indices in ascending order.
std::vector<Index> knapsack_select(std::span<const Shot> shots, Index budget_frames);

/// floor(fraction·T) frames.
Index budget_frames(Index frames, double budget_fraction);

Vector binarize(std::span<const Index> selection, std::span<const Shot> shots, Index frames);

/// 2PR/(P+R); 0 when either summary is empty.
double f1_score(const Vector& machine, const Vector& user);

/// Nearest-neighbour resampling of a score vector to `frames` entries.
Vector resample_nearest(const Vector& scores, Index frames);

/// Binary keyshot summary for `scores` over the shots of `gt`; scores of
/// a different length are resampled to T first.
Vector keyshot_summary(const Vector& scores, const GroundTruthSummary& gt,
                       double budget_fraction);

enum class Protocol { tvsum_avg, summe_max };
Protocol parse_protocol(const std::string& name);
std::string to_string(Protocol p);

struct EvaluationReport {
  std::map<std::string, double> per_video;
  double mean_f1 = 0.0;
  Protocol protocol = Protocol::tvsum_avg;
  double budget_fraction = 0.15;

  nlohmann::json to_json() const;
};

/// F1 per video against every annotator, reduced by the protocol, then
/// averaged over videos. Every scored video needs a ground truth and vice
/// versa; otherwise NotFoundError lists the missing ids.
EvaluationReport evaluate_dataset(std::span<const SummaryScores> scores,
                                  std::span<const GroundTruthSummary> gts, Protocol protocol,
                                  double budget_fraction = 0.15);

}  // namespace cap2sum
