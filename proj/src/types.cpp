// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/types.hpp"

#include <cmath>

#include "cap2sum/error.hpp"

namespace cap2sum {

namespace {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace

GroundTruthSummary GroundTruthSummary::from_annotators(
    std::string video_id, Matrix annotator_scores,
    std::vector<Index> shot_boundaries, bool synthetic_shots) {
  GroundTruthSummary g;
  g.video_id = std::move(video_id);
  g.consensus_scores = annotator_scores.rows() > 0
                           ? Vector(annotator_scores.colwise().mean().transpose())
                           : Vector();
  g.annotator_scores = std::move(annotator_scores);
  g.shot_boundaries = std::move(shot_boundaries);
  g.synthetic_shots = synthetic_shots;
  return g;
}

const FrameFeatures& validate(const FrameFeatures& f) {
  if (f.features.rows() < 1) throw ValidationError("features", "T must be >= 1");
  if (f.features.cols() < 1) throw ValidationError("features", "D must be >= 1");
  if (!all_finite(f.features))
    throw ValidationError("features", "contains NaN or Inf");
  if (!(f.fps > 0.0) || !std::isfinite(f.fps))
    throw ValidationError("fps", "must be > 0");
  if (!(f.duration_sec > 0.0) || !std::isfinite(f.duration_sec))
    throw ValidationError("duration_sec", "must be > 0");
  const double expected = f.duration_sec * f.fps;
  if (std::abs(static_cast<double>(f.frames()) - expected) > 1.0 + 1e-9)
    throw ValidationError("features",
                          "T inconsistent with duration_sec * fps (expected " +
                              std::to_string(expected) + ", got " +
                              std::to_string(f.frames()) + ")");
  return f;
}

const DenseCaptionAnnotation& validate(const DenseCaptionAnnotation& a) {
  if (!(a.duration_sec > 0.0) || !std::isfinite(a.duration_sec))
    throw ValidationError("duration_sec", "must be > 0");
  if (a.events.empty())
    throw ValidationError("events", "at least one event required");
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    const auto& e = a.events[i];
    const std::string field = "events[" + std::to_string(i) + "]";
    if (!(e.start_sec >= 0.0 && e.start_sec < e.end_sec &&
          e.end_sec <= a.duration_sec))
      throw ValidationError(field,
                            "requires 0 <= start_sec < end_sec <= duration_sec");
    if (e.sentence.empty())
      throw ValidationError(field + ".sentence", "sentence is empty");
  }
  return a;
}

const SummaryScores& validate(const SummaryScores& s) {
  if (!all_finite(s.scores))
    throw ValidationError("scores", "contains NaN or Inf");
  if (s.scores.size() > 0 &&
      (s.scores.minCoeff() < 0.0 || s.scores.maxCoeff() > 1.0))
    throw ValidationError("scores", "scores out of [0,1]");
  return s;
}

const ClipPrior& validate(const ClipPrior& p) {
  for (Index t = 0; t < p.prior.size(); ++t) {
    if (p.prior[t] != 0.0 && p.prior[t] != 1.0)
      throw ValidationError("prior", "prior not binary");
  }
  return p;
}

const GroundTruthSummary& validate(const GroundTruthSummary& g) {
  const Index frames = g.frames();
  if (g.annotators() < 1)
    throw ValidationError("annotator_scores", "at least one annotator required");
  if (frames < 1) throw ValidationError("annotator_scores", "T must be >= 1");
  if (!all_finite(g.annotator_scores))
    throw ValidationError("annotator_scores", "contains NaN or Inf");
  const auto& b = g.shot_boundaries;
  if (b.size() < 2 || b.front() != 0 || b.back() != frames)
    throw ValidationError("shot_boundaries",
                          "must start at 0 and end at T");
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (b[i] <= b[i - 1])
      throw ValidationError("shot_boundaries", "must be strictly increasing");
  }
  if (g.consensus_scores.size() != frames)
    throw ValidationError("consensus_scores", "length must equal T");
  for (Index t = 0; t < frames; ++t) {
    if (std::abs(g.consensus_scores[t] - g.annotator_scores.col(t).mean()) > 1e-6)
      throw ValidationError("consensus_scores",
                            "must equal the annotator mean within 1e-6");
  }
  return g;
}

const CaptionerOutput& validate(const CaptionerOutput& c) {
  for (std::size_t i = 0; i < c.proposals.size(); ++i) {
    const auto& p = c.proposals[i];
    const std::string field = "proposals[" + std::to_string(i) + "]";
    if (!(p.width > 0.0)) throw ValidationError(field + ".width", "must be > 0");
    if (!(p.center >= 0.0 && p.center <= 1.0))
      throw ValidationError(field + ".center", "must lie in [0,1]");
    if (i > 0 && (p.caption_logits.rows() != c.proposals[0].caption_logits.rows() ||
                  p.caption_logits.cols() != c.proposals[0].caption_logits.cols()))
      throw ValidationError(field + ".caption_logits",
                            "all proposals must share the L×V shape");
  }
  return c;
}

std::vector<Index> uniform_shot_boundaries(Index frames, Index shot_len) {
  if (frames < 1) throw ValidationError("frames", "must be >= 1");
  if (shot_len < 1) shot_len = 1;
  std::vector<Index> b;
  for (Index t = 0; t < frames; t += shot_len) b.push_back(t);
  b.push_back(frames);
  return b;
}

}  // namespace cap2sum
