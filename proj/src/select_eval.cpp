// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/select_eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cap2sum/error.hpp"

namespace cap2sum {

namespace {

constexpr double kTieTolerance = 1e-9;

bool at_least(double a, double b) {
  return a >= b - kTieTolerance * std::max(1.0, std::abs(b));
}

}  // namespace

std::vector<Shot> segment_shots(std::span<const Index> boundaries, const Vector& scores) {
  const Index frames = scores.size();
  if (boundaries.size() < 2 || boundaries.front() != 0 || boundaries.back() != frames)
    throw ValidationError("shot_boundaries", "must start at 0 and end at T = " +
                                                 std::to_string(frames));
  std::vector<Shot> shots;
  shots.reserve(boundaries.size() - 1);
  for (std::size_t i = 0; i + 1 < boundaries.size(); ++i) {
    const Index s = boundaries[i];
    const Index e = boundaries[i + 1];
    if (e <= s) throw ValidationError("shot_boundaries", "must be strictly increasing");
    shots.push_back({s, e, scores.segment(s, e - s).mean()});
  }
  return shots;
}

std::vector<Shot> segment_shots(const GroundTruthSummary& gt, const Vector& scores) {
  return segment_shots(gt.shot_boundaries, scores);
}

std::vector<Index> knapsack_select(std::span<const Shot> shots, Index budget_frames) {
  std::vector<Index> selected;
  if (budget_frames <= 0 || shots.empty()) return selected;
  const auto n = static_cast<Index>(shots.size());
  const Index cap = budget_frames;
  // best[i][c]: optimum over shots i..n-1 with capacity c.
  std::vector<std::vector<double>> best(static_cast<std::size_t>(n + 1),
                                        std::vector<double>(static_cast<std::size_t>(cap + 1), 0.0));
  for (Index i = n - 1; i >= 0; --i) {
    const Shot& s = shots[static_cast<std::size_t>(i)];
    const double value = s.mean_score * static_cast<double>(s.length());
    const auto& next = best[static_cast<std::size_t>(i + 1)];
    auto& row = best[static_cast<std::size_t>(i)];
    for (Index c = 0; c <= cap; ++c) {
      row[c] = next[c];
      if (value > 0.0 && s.length() <= c) row[c] = std::max(row[c], value + next[c - s.length()]);
    }
  }
  Index c = cap;
  for (Index i = 0; i < n; ++i) {
    const Shot& s = shots[static_cast<std::size_t>(i)];
    const double value = s.mean_score * static_cast<double>(s.length());
    if (!(value > 0.0) || s.length() > c) continue;
    const double take = value + best[static_cast<std::size_t>(i + 1)][c - s.length()];
    if (at_least(take, best[static_cast<std::size_t>(i + 1)][c])) {
      selected.push_back(i);
      c -= s.length();
    }
  }
  return selected;
}

Index budget_frames(Index frames, double budget_fraction) {
  if (!(budget_fraction >= 0.0 && budget_fraction <= 1.0))
    throw ValidationError("budget_fraction", "must lie in [0,1]");
  return static_cast<Index>(std::floor(budget_fraction * static_cast<double>(frames) + 1e-9));
}

Vector binarize(std::span<const Index> selection, std::span<const Shot> shots, Index frames) {
  Vector out = Vector::Zero(frames);
  for (const Index i : selection) {
    const Shot& s = shots[static_cast<std::size_t>(i)];
    if (s.start_frame < 0 || s.end_frame > frames)
      throw ShapeError("shot outside [0, T)");
    out.segment(s.start_frame, s.length()).setOnes();
  }
  return out;
}

double f1_score(const Vector& machine, const Vector& user) {
  if (machine.size() != user.size())
    throw ShapeError("f1_score: lengths " + std::to_string(machine.size()) + " and " +
                     std::to_string(user.size()));
  const double m = (machine.array() > 0.5).count();
  const double u = (user.array() > 0.5).count();
  if (m == 0.0 || u == 0.0) return 0.0;
  const double overlap = ((machine.array() > 0.5) && (user.array() > 0.5)).count();
  if (overlap == 0.0) return 0.0;
  const double p = overlap / m;
  const double r = overlap / u;
  return 2.0 * p * r / (p + r);
}

Vector resample_nearest(const Vector& scores, Index frames) {
  if (scores.size() == frames) return scores;
  if (scores.size() == 0) throw ShapeError("cannot resample an empty score vector");
  Vector out(frames);
  const double ratio = static_cast<double>(scores.size()) / static_cast<double>(frames);
  for (Index t = 0; t < frames; ++t) {
    const auto src = static_cast<Index>(std::floor((static_cast<double>(t) + 0.5) * ratio));
    out[t] = scores[std::min(src, scores.size() - 1)];
  }
  return out;
}

Vector keyshot_summary(const Vector& scores, const GroundTruthSummary& gt,
                       double budget_fraction) {
  const Index frames = gt.frames();
  const auto shots = segment_shots(gt, resample_nearest(scores, frames));
  return binarize(knapsack_select(shots, budget_frames(frames, budget_fraction)), shots, frames);
}

Protocol parse_protocol(const std::string& name) {
  if (name == "tvsum_avg") return Protocol::tvsum_avg;
  if (name == "summe_max") return Protocol::summe_max;
  throw ConfigError("unknown protocol '" + name + "' (expected tvsum_avg or summe_max)");
}

std::string to_string(Protocol p) {
  return p == Protocol::tvsum_avg ? "tvsum_avg" : "summe_max";
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [id, f1] : per_video) per[id] = f1;
  return {{"per_video", per},
          {"mean_f1", mean_f1},
          {"protocol", to_string(protocol)},
          {"budget_fraction", budget_fraction},
          {"user_summaries", "knapsack over annotator scores"}};
}

EvaluationReport evaluate_dataset(std::span<const SummaryScores> scores,
                                  std::span<const GroundTruthSummary> gts, Protocol protocol,
                                  double budget_fraction) {
  std::map<std::string, const SummaryScores*> by_id;
  for (const auto& s : scores) by_id[s.video_id] = &s;
  std::map<std::string, const GroundTruthSummary*> gt_by_id;
  for (const auto& g : gts) gt_by_id[g.video_id] = &g;

  std::set<std::string> missing;
  for (const auto& [id, _] : by_id)
    if (!gt_by_id.contains(id)) missing.insert(id);
  for (const auto& [id, _] : gt_by_id)
    if (!by_id.contains(id)) missing.insert(id);
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw NotFoundError("videos missing scores or ground truth: " + list);
  }
  if (by_id.empty()) throw NotFoundError("no videos to evaluate");

  EvaluationReport report;
  report.protocol = protocol;
  report.budget_fraction = budget_fraction;
  double total = 0.0;
  for (const auto& [id, gt] : gt_by_id) {
    const Vector machine = keyshot_summary(by_id.at(id)->scores, *gt, budget_fraction);
    double reduced = 0.0;
    for (Index a = 0; a < gt->annotators(); ++a) {
      const Vector user =
          keyshot_summary(Vector(gt->annotator_scores.row(a).transpose()), *gt, budget_fraction);
      const double f1 = f1_score(machine, user);
      reduced = protocol == Protocol::tvsum_avg ? reduced + f1 : std::max(reduced, f1);
    }
    if (protocol == Protocol::tvsum_avg) reduced /= static_cast<double>(gt->annotators());
    report.per_video[id] = reduced;
    total += reduced;
  }
  report.mean_f1 = total / static_cast<double>(gt_by_id.size());
  return report;
}

}  // namespace cap2sum
