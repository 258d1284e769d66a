// SPDX-License-Identifier: Apache-2.0
/**
 * @file objectives.hpp
 * @brief Training losses.
 *
 * Pre-training minimises
 *
 *   L_total = b_cap·L_cap + b_prior·L_prior + b_len·L_len + b_var·L_var
 *   L_cap   = b_giou·L_giou + b_cls·L_cls + b_ec·L_ec + b_pred·L_pred
 *
 * where L_giou is the mean (1 − gIoU) over matched proposal/event pairs,
 * L_cls a sigmoid focal loss over all proposals, L_ec the event-count
 * cross-entropy and L_pred the teacher-forced token cross-entropy. Scores
 * are column vectors (T×1) throughout.
 */
#pragma once

#include <span>
#include <vector>

#include "cap2sum/autograd.hpp"
#include "cap2sum/types.hpp"

namespace cap2sum {

struct LossWeights {
  double giou = 4.0;
  double cls = 2.0;
  double ec = 0.5;
  double pred = 0.5;
  double cap = 2.0;
  double prior = 10.0;
  double len = 0.5;
  double var = 0.5;
  double target_length = 0.3;

  void validate() const;
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// 1-D generalised IoU in [-1, 1]. Throws on a degenerate segment.
double giou_1d(const Segment& a, const Segment& b);

/// Row-wise gIoU between K×2 (start, end) predictions and fixed targets.
ag::Var giou_1d(const ag::Var& predicted, const Matrix& target);

/// Mean sigmoid focal loss over proposals; `positive[i]` marks matches.
ag::Var focal_loss(const ag::Var& confidence_logits, std::span<const int> positive,
                   FocalParams params = {});

/// Cross-entropy of the event-count class, `gt_count` clamped to the head.
ag::Var event_count_loss(const ag::Var& count_logits, int gt_count);

/// Mean token cross-entropy over non-PAD targets; ids outside the
/// vocabulary count as UNK. An all-PAD target yields 0.
ag::Var caption_token_loss(const ag::Var& caption_logits, std::span<const int> targets);

struct MatchPair {
  Index gt = 0;
  Index proposal = 0;
};

struct Assignment {
  std::vector<MatchPair> pairs;  // ordered by gt index
  std::size_t dropped_gt = 0;    // events beyond the query budget
};

/// Differentiable captioner outputs entering the caption loss.
struct CaptionPrediction {
  ag::Var segments;           // N×2 normalized (start, end)
  ag::Var confidence_logits;  // N×1
  ag::Var count_logits;       // 1×(C+1)
  std::vector<ag::Var> caption_logits;  // L×V, aligned with Assignment::pairs
};

struct CaptionTargets {
  std::vector<Segment> segments;         // normalized to [0,1]
  std::vector<std::vector<int>> tokens;  // length L each
  int event_count = 0;
};

struct CaptionLossTerms {
  ag::Var giou;
  ag::Var cls;
  ag::Var ec;
  ag::Var pred;
  ag::Var total;
};

CaptionLossTerms caption_loss(const CaptionPrediction& pred, const CaptionTargets& gt,
                              const Assignment& assignment, const LossWeights& w,
                              FocalParams focal = {});

/// MSE(P·S, P); frames with P = 0 contribute nothing.
ag::Var prior_loss(const ag::Var& scores, const Vector& prior);
/// (mean(S) − l)².
ag::Var length_loss(const ag::Var& scores, double target_length);
/// 0.25 − population variance of S.
ag::Var variance_loss(const ag::Var& scores);

struct LossComponents {
  ag::Var caption;
  ag::Var prior;
  ag::Var length;
  ag::Var variance;
};

ag::Var total_loss(const LossComponents& c, const LossWeights& w);

/// Mean squared error against ground-truth scores already in [0,1].
ag::Var finetune_mse(const ag::Var& scores, const Vector& target);

/// Affine map of `v` onto [0,1]; a constant vector maps to zeros.
Vector rescale_min_max(const Vector& v);

}  // namespace cap2sum
