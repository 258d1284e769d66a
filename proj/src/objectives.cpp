// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cap2sum/error.hpp"
#include "cap2sum/log.hpp"
#include "cap2sum/vocabulary.hpp"

namespace cap2sum {

using ag::Var;

void LossWeights::validate() const {
  const double all[] = {giou, cls, ec, pred, cap, prior, len, var};
  for (double v : all) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("loss", "weights must be finite and non-negative");
  }
  if (!(target_length > 0.0 && target_length < 1.0))
    throw ValidationError("loss.target_length", "must lie in (0,1)");
}

double giou_1d(const Segment& a, const Segment& b) {
  if (!(a.start < a.end) || !(b.start < b.end))
    throw ValidationError("segment", "degenerate segment (start >= end)");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = a.length() + b.length() - inter;
  const double hull = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni - (hull - uni) / hull;
}

Var giou_1d(const Var& predicted, const Matrix& target) {
  if (predicted.cols() != 2 || target.cols() != 2 || predicted.rows() != target.rows())
    throw ShapeError("giou_1d: expected matching K×2 segment tables");
  const Var ps = ag::slice_cols(predicted, 0, 1);
  const Var pe = ag::slice_cols(predicted, 1, 1);
  const Var gs = Var::constant(target.col(0));
  const Var ge = Var::constant(target.col(1));
  const Var inter = ag::relu(ag::minimum(pe, ge) - ag::maximum(ps, gs));
  const Var uni = (pe - ps) + (ge - gs) - inter;
  const Var hull = ag::maximum(pe, ge) - ag::minimum(ps, gs);
  return ag::div(inter, uni) - ag::div(hull - uni, hull);
}

Var focal_loss(const Var& confidence_logits, std::span<const int> positive,
               FocalParams params) {
  const Index n = confidence_logits.rows();
  if (confidence_logits.cols() != 1 || static_cast<Index>(positive.size()) != n)
    throw ShapeError("focal_loss: logits must be N×1 with N labels");
  if (n == 0) return Var::scalar(0.0);
  Matrix pos(n, 1);
  for (Index i = 0; i < n; ++i) pos(i, 0) = positive[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  const Var pos_mask = Var::constant(pos);
  const Var neg_mask = Var::constant((1.0 - pos.array()).matrix());
  const Var p = ag::sigmoid(confidence_logits);
  // -log p = softplus(-x), -log(1-p) = softplus(x)
  const Var pos_term = ag::mul(ag::pow(1.0 - p, params.gamma),
                               ag::softplus(-confidence_logits)) * params.alpha;
  const Var neg_term = ag::mul(ag::pow(p, params.gamma), ag::softplus(confidence_logits)) *
                       (1.0 - params.alpha);
  return ag::mean(ag::mul(pos_mask, pos_term) + ag::mul(neg_mask, neg_term));
}

Var event_count_loss(const Var& count_logits, int gt_count) {
  if (count_logits.rows() != 1 || count_logits.cols() < 1)
    throw ShapeError("event_count_loss: logits must be 1×C");
  const Index cls = std::clamp<Index>(gt_count, 0, count_logits.cols() - 1);
  const std::pair<Index, Index> cell{0, cls};
  return -ag::sum(ag::pick(ag::log_softmax_rows(count_logits), std::span(&cell, 1)));
}

Var caption_token_loss(const Var& caption_logits, std::span<const int> targets) {
  if (static_cast<Index>(targets.size()) != caption_logits.rows())
    throw ShapeError("caption_token_loss: need one target per logit row");
  const Index vocab = caption_logits.cols();
  std::vector<std::pair<Index, Index>> cells;
  for (std::size_t l = 0; l < targets.size(); ++l) {
    int t = targets[l];
    if (t == Vocabulary::kPad) continue;
    if (t < 0 || t >= vocab) t = Vocabulary::kUnk;
    cells.emplace_back(static_cast<Index>(l), t);
  }
  if (cells.empty()) {
    log_warning("caption target is all PAD; token loss defined as 0");
    return Var::scalar(0.0);
  }
  return -ag::mean(ag::pick(ag::log_softmax_rows(caption_logits), cells));
}

CaptionLossTerms caption_loss(const CaptionPrediction& pred, const CaptionTargets& gt,
                              const Assignment& assignment, const LossWeights& w,
                              FocalParams focal) {
  const Index n = pred.confidence_logits.rows();
  if (pred.segments.rows() != n || pred.segments.cols() != 2)
    throw ShapeError("caption_loss: segments must be N×2");
  if (pred.caption_logits.size() != assignment.pairs.size())
    throw ShapeError("caption_loss: one caption logit table per matched pair required");

  CaptionLossTerms out;
  std::vector<int> positive(static_cast<std::size_t>(n), 0);
  if (assignment.pairs.empty()) {
    out.giou = Var::scalar(0.0);
    out.pred = Var::scalar(0.0);
  } else {
    const auto k = static_cast<Index>(assignment.pairs.size());
    std::vector<Index> rows;
    Matrix target(k, 2);
    std::vector<Var> token_losses;
    for (Index i = 0; i < k; ++i) {
      const auto& pair = assignment.pairs[static_cast<std::size_t>(i)];
      rows.push_back(pair.proposal);
      positive[static_cast<std::size_t>(pair.proposal)] = 1;
      const auto& seg = gt.segments.at(static_cast<std::size_t>(pair.gt));
      target(i, 0) = seg.start;
      target(i, 1) = seg.end;
      token_losses.push_back(caption_token_loss(pred.caption_logits[static_cast<std::size_t>(i)],
                                                gt.tokens.at(static_cast<std::size_t>(pair.gt))));
    }
    out.giou = ag::mean(1.0 - giou_1d(ag::gather_rows(pred.segments, rows), target));
    out.pred = ag::mean(ag::concat_rows(token_losses));
  }
  out.cls = focal_loss(pred.confidence_logits, positive, focal);
  out.ec = event_count_loss(pred.count_logits, gt.event_count);
  out.total = out.giou * w.giou + out.cls * w.cls + out.ec * w.ec + out.pred * w.pred;
  return out;
}

namespace {

void require_column(const Var& s, Index length, const char* op) {
  if (s.cols() != 1 || s.rows() != length)
    throw ShapeError(std::string(op) + ": length mismatch (" + std::to_string(s.rows()) +
                     " scores vs " + std::to_string(length) + ")");
}

}  // namespace

Var prior_loss(const Var& scores, const Vector& prior) {
  require_column(scores, prior.size(), "prior_loss");
  const Var p = Var::constant(Matrix(prior));
  return ag::mean(ag::square(ag::mul(p, scores) - p));
}

Var length_loss(const Var& scores, double target_length) {
  return ag::square(ag::add_scalar(ag::mean(scores), -target_length));
}

Var variance_loss(const Var& scores) {
  const Var centered = scores - ag::expand(ag::mean(scores), scores.rows(), scores.cols());
  return 0.25 - ag::mean(ag::square(centered));
}

Var total_loss(const LossComponents& c, const LossWeights& w) {
  return c.caption * w.cap + c.prior * w.prior + c.length * w.len + c.variance * w.var;
}

Var finetune_mse(const Var& scores, const Vector& target) {
  require_column(scores, target.size(), "finetune_mse");
  return ag::mean(ag::square(scores - Var::constant(Matrix(target))));
}

Vector rescale_min_max(const Vector& v) {
  if (v.size() == 0) return v;
  const double lo = v.minCoeff();
  const double hi = v.maxCoeff();
  if (hi - lo <= 0.0) return Vector::Zero(v.size());
  return ((v.array() - lo) / (hi - lo)).matrix();
}

}  // namespace cap2sum
