// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/captioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cap2sum/error.hpp"
#include "cap2sum/log.hpp"

namespace cap2sum {

using ag::Var;

namespace {

constexpr double kWindowEps = 1e-3;

Matrix normal_init(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void CaptionerConfig::validate() const {
  if (input_dim < 1) throw ValidationError("captioner.input_dim", "must be >= 1");
  if (embed_dim < 1) throw ValidationError("captioner.embed_dim", "must be >= 1");
  if (num_heads < 1 || embed_dim % num_heads != 0)
    throw ValidationError("captioner.num_heads", "embed_dim must be divisible by num_heads");
  if (num_queries < 1) throw ValidationError("captioner.num_queries", "must be >= 1");
  if (max_caption_len < 1) throw ValidationError("captioner.max_caption_len", "must be >= 1");
  if (enc_layers < 0) throw ValidationError("captioner.enc_layers", "must be >= 0");
  if (dec_layers < 1) throw ValidationError("captioner.dec_layers", "must be >= 1");
  if (!(mlp_ratio > 0.0)) throw ValidationError("captioner.mlp_ratio", "must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ValidationError("captioner.dropout", "must lie in [0,1)");
  if (vocab.size() <= Vocabulary::kReserved)
    throw ValidationError("captioner.vocab", "vocabulary has no words");
}

nlohmann::json CaptionerConfig::to_json() const {
  return {{"input_dim", input_dim},
          {"embed_dim", embed_dim},
          {"num_heads", num_heads},
          {"num_queries", num_queries},
          {"max_caption_len", max_caption_len},
          {"enc_layers", enc_layers},
          {"dec_layers", dec_layers},
          {"max_event_count", max_event_count},
          {"mlp_ratio", mlp_ratio},
          {"dropout", dropout},
          {"vocab", vocab.to_json()}};
}

CaptionerConfig CaptionerConfig::from_json(const nlohmann::json& j) {
  CaptionerConfig c;
  c.input_dim = j.value("input_dim", c.input_dim);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.num_queries = j.value("num_queries", c.num_queries);
  c.max_caption_len = j.value("max_caption_len", c.max_caption_len);
  c.enc_layers = j.value("enc_layers", c.enc_layers);
  c.dec_layers = j.value("dec_layers", c.dec_layers);
  c.max_event_count = j.value("max_event_count", c.max_event_count);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.dropout = j.value("dropout", c.dropout);
  if (j.contains("vocab")) c.vocab = Vocabulary::from_json(j.at("vocab"));
  return c;
}

Captioner::Captioner(CaptionerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const Index e = cfg_.embed_dim;
  input_proj_ = nn::Linear(params_, "captioner.input_proj", cfg_.input_dim, e, rng);
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    encoder_.emplace_back(params_, "captioner.enc" + std::to_string(l), e, cfg_.num_heads,
                          cfg_.mlp_ratio, false, rng);
  }
  enc_norm_ = nn::LayerNorm(params_, "captioner.enc_norm", e);
  query_embed_ = params_.add("captioner.queries", normal_init(cfg_.num_queries, e, 1.0, rng));
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    decoder_.emplace_back(params_, "captioner.dec" + std::to_string(l), e, cfg_.num_heads,
                          cfg_.mlp_ratio, true, rng);
  }
  dec_norm_ = nn::LayerNorm(params_, "captioner.dec_norm", e);
  loc_head_ = nn::Mlp(params_, "captioner.loc_head", e, e, 2, rng);
  conf_head_ = nn::Linear(params_, "captioner.conf_head", e, 1, rng);
  count_head_ = nn::Linear(params_, "captioner.count_head", e, cfg_.event_classes(), rng);
  token_embed_ =
      params_.add("captioner.token_embed", normal_init(cfg_.vocab.size(), e, 1.0, rng));
  caption_block_ = nn::TransformerBlock(params_, "captioner.caption_block", e, cfg_.num_heads,
                                        cfg_.mlp_ratio, true, rng);
  caption_norm_ = nn::LayerNorm(params_, "captioner.caption_norm", e);
  caption_out_ = nn::Linear(params_, "captioner.caption_out", e, cfg_.vocab.size(), rng);
}

ProposalGraph Captioner::forward_proposals(const Var& weighted,
                                           const nn::ForwardContext& ctx) const {
  const Index frames = weighted.rows();
  if (frames < 1) throw ValidationError("features", "T must be >= 1");
  if (weighted.cols() != cfg_.input_dim)
    throw ShapeError("captioner expects D = " + std::to_string(cfg_.input_dim) + ", got " +
                     std::to_string(weighted.cols()));
  ProposalGraph g;
  Var x = input_proj_(weighted) +
          Var::constant(nn::sinusoidal_encoding(frames, cfg_.embed_dim));
  x = ctx.maybe_dropout(x);
  for (const auto& block : encoder_) x = block(x, ctx);
  g.memory = enc_norm_(x);

  Var q = query_embed_;
  for (const auto& block : decoder_) q = block(q, ctx, std::nullopt, &g.memory);
  g.queries = dec_norm_(q);

  g.centers_widths = ag::sigmoid(loc_head_(g.queries, ctx));
  const Var c = ag::slice_cols(g.centers_widths, 0, 1);
  const Var half = ag::scale(ag::slice_cols(g.centers_widths, 1, 1), 0.5);
  const Var parts[] = {c - half, c + half};
  g.segments = ag::concat_cols(parts);
  g.confidence_logits = conf_head_(g.queries);
  g.count_logits = count_head_(ag::col_mean(g.queries));
  return g;
}

Var Captioner::caption_logits(const ProposalGraph& graph, Index proposal,
                              std::span<const int> input_tokens,
                              const nn::ForwardContext& ctx) const {
  if (proposal < 0 || proposal >= graph.queries.rows())
    throw ShapeError("proposal index out of range");
  if (input_tokens.empty()) throw ShapeError("caption decoder needs at least one token");
  const auto len = static_cast<Index>(input_tokens.size());
  std::vector<Index> ids(input_tokens.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int t = input_tokens[i];
    ids[i] = (t < 0 || t >= cfg_.vocab.size()) ? Vocabulary::kUnk : t;
  }
  Var x = ag::gather_rows(token_embed_, ids) +
          Var::constant(nn::sinusoidal_encoding(len, cfg_.embed_dim));
  x = ag::add_row(x, ag::slice_rows(graph.queries, proposal, 1));
  x = ctx.maybe_dropout(x);

  // Gaussian window over memory positions, sigma = width / 2.
  const Index frames = graph.memory.rows();
  Matrix pos(1, frames);
  for (Index t = 0; t < frames; ++t)
    pos(0, t) = (static_cast<double>(t) + 0.5) / static_cast<double>(frames);
  const Var cw = ag::slice_rows(graph.centers_widths, proposal, 1);
  const Var center = ag::expand(ag::slice_cols(cw, 0, 1), 1, frames);
  const Var denom = ag::expand(
      ag::add_scalar(ag::scale(ag::square(ag::slice_cols(cw, 1, 1)), 0.5), kWindowEps), 1,
      frames);
  const Var window = -ag::div(ag::square(Var::constant(pos) - center), denom);

  x = caption_block_(x, ctx, Var::constant(nn::causal_mask(len)), &graph.memory, window);
  return caption_out_(caption_norm_(x));
}

Var Captioner::teacher_forced_logits(const ProposalGraph& graph, Index proposal,
                                     std::span<const int> target,
                                     const nn::ForwardContext& ctx) const {
  if (target.empty()) throw ShapeError("empty caption target");
  std::vector<int> input;
  input.reserve(target.size());
  input.push_back(Vocabulary::kBos);
  input.insert(input.end(), target.begin(), target.end() - 1);
  return caption_logits(graph, proposal, input, ctx);
}

CaptionerOutput Captioner::caption_forward(const FeatureMatrix& weighted) const {
  return caption_forward(Matrix(weighted.cast<double>()));
}

CaptionerOutput Captioner::caption_forward(const Matrix& weighted) const {
  ag::NoGradGuard no_grad;
  const nn::ForwardContext ctx{};
  const ProposalGraph g = forward_proposals(Var::constant(weighted), ctx);
  CaptionerOutput out;
  out.event_count_logits = g.count_logits.value().row(0).transpose();
  const Index vocab = cfg_.vocab.size();
  for (Index i = 0; i < g.queries.rows(); ++i) {
    Proposal p;
    p.center = g.centers_widths.value()(i, 0);
    p.width = g.centers_widths.value()(i, 1);
    p.confidence_logit = g.confidence_logits.value()(i, 0);
    p.caption_logits = Matrix::Zero(cfg_.max_caption_len, vocab);
    std::vector<int> tokens{Vocabulary::kBos};
    for (int step = 0; step < cfg_.max_caption_len; ++step) {
      const Var logits = caption_logits(g, i, tokens, ctx);
      p.caption_logits.row(step) = logits.value().row(logits.rows() - 1);
      Index best = 0;
      p.caption_logits.row(step).maxCoeff(&best);
      tokens.push_back(static_cast<int>(best));
    }
    out.proposals.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matching

namespace {

double pair_cost(const Segment& pred, double conf_logit, const Segment& gt, MatchWeights w) {
  return w.giou * (1.0 - giou_1d(pred, gt)) + w.cls * (1.0 - sigmoid(conf_logit));
}

// Rectangular assignment, n rows <= m columns. Returns column per row.
std::vector<Index> hungarian(const std::vector<std::vector<double>>& cost, Index n, Index m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<Index> p(m + 1, 0), way(m + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> col_of_row(n, -1);
  for (Index j = 1; j <= m; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
  }
  return col_of_row;
}

}  // namespace

Assignment match_proposals(std::span<const Segment> predicted,
                           std::span<const double> confidence_logits,
                           std::span<const Segment> gt, MatchWeights w) {
  if (predicted.size() != confidence_logits.size())
    throw ShapeError("match_proposals: segment/confidence count mismatch");
  Assignment a;
  if (gt.empty() || predicted.empty()) {
    a.dropped_gt = gt.size();
    return a;
  }
  std::vector<Index> kept(gt.size());
  std::iota(kept.begin(), kept.end(), Index{0});
  if (gt.size() > predicted.size()) {
    std::stable_sort(kept.begin(), kept.end(), [&](Index x, Index y) {
      return gt[static_cast<std::size_t>(x)].length() > gt[static_cast<std::size_t>(y)].length();
    });
    kept.resize(predicted.size());
    std::sort(kept.begin(), kept.end());
    a.dropped_gt = gt.size() - predicted.size();
    log_warning(std::to_string(a.dropped_gt) +
                " ground-truth events exceed the query budget; keeping the longest");
  }
  const auto n = static_cast<Index>(kept.size());
  const auto m = static_cast<Index>(predicted.size());
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(n),
                                        std::vector<double>(static_cast<std::size_t>(m)));
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < m; ++c) {
      cost[r][c] = pair_cost(predicted[c], confidence_logits[c],
                             gt[static_cast<std::size_t>(kept[r])], w);
    }
  }
  auto total = [&](const std::vector<std::vector<double>>& c) {
    const auto col = hungarian(c, n, m);
    double t = 0.0;
    for (Index r = 0; r < n; ++r) t += c[r][col[r]];
    return t;
  };
  const double best = total(cost);
  const double tol = 1e-9 * std::max(1.0, std::abs(best));

  // Among optimal assignments take the lexicographically smallest list of
  // proposal indices (in gt order): fix rows one by one to the lowest
  // column that keeps the optimum reachable.
  constexpr double kForbidden = 1e6;
  std::vector<Index> fixed(static_cast<std::size_t>(n), -1);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < m; ++c) {
      if (std::find(fixed.begin(), fixed.end(), c) != fixed.end()) continue;
      fixed[r] = c;
      auto trial = cost;
      for (Index rr = 0; rr <= r; ++rr) {
        for (Index cc = 0; cc < m; ++cc) {
          if (cc != fixed[rr]) trial[rr][cc] = kForbidden;
        }
        for (Index other = 0; other < n; ++other) {
          if (other != rr) trial[other][fixed[rr]] = kForbidden;
        }
      }
      if (total(trial) <= best + tol) break;
      fixed[r] = -1;
    }
    if (fixed[r] < 0) throw Error("match_proposals: assignment refinement failed");
  }
  for (Index r = 0; r < n; ++r) a.pairs.push_back({kept[r], fixed[r]});
  return a;
}

std::vector<Segment> normalized_segments(const DenseCaptionAnnotation& gt) {
  if (!(gt.duration_sec > 0.0))
    throw ValidationError("duration_sec", "must be > 0 to normalize events");
  std::vector<Segment> out;
  out.reserve(gt.events.size());
  for (const auto& e : gt.events)
    out.push_back({e.start_sec / gt.duration_sec, e.end_sec / gt.duration_sec});
  return out;
}

namespace {

std::pair<std::vector<Segment>, std::vector<double>> unpack(const CaptionerOutput& pred) {
  std::vector<Segment> segs;
  std::vector<double> conf;
  for (const auto& p : pred.proposals) {
    segs.push_back({p.center - 0.5 * p.width, p.center + 0.5 * p.width});
    conf.push_back(p.confidence_logit);
  }
  return {segs, conf};
}

}  // namespace

Assignment match_proposals(const CaptionerOutput& pred, const DenseCaptionAnnotation& gt,
                           MatchWeights w) {
  const auto [segs, conf] = unpack(pred);
  const auto gts = normalized_segments(gt);
  return match_proposals(segs, conf, gts, w);
}

double assignment_cost(std::span<const Segment> predicted,
                       std::span<const double> confidence_logits,
                       std::span<const Segment> gt, const Assignment& a, MatchWeights w) {
  double total = 0.0;
  for (const auto& pr : a.pairs) {
    total += pair_cost(predicted[static_cast<std::size_t>(pr.proposal)],
                       confidence_logits[static_cast<std::size_t>(pr.proposal)],
                       gt[static_cast<std::size_t>(pr.gt)], w);
  }
  return total;
}

std::vector<DecodedCaption> decode_captions(const CaptionerOutput& pred,
                                            double confidence_threshold,
                                            double duration_sec, const Vocabulary& vocab) {
  std::vector<DecodedCaption> out;
  for (const auto& p : pred.proposals) {
    const double conf = sigmoid(p.confidence_logit);
    if (!(conf > confidence_threshold)) continue;
    DecodedCaption d;
    d.start_sec = std::clamp(p.center - 0.5 * p.width, 0.0, 1.0) * duration_sec;
    d.end_sec = std::clamp(p.center + 0.5 * p.width, 0.0, 1.0) * duration_sec;
    d.confidence = conf;
    for (Index r = 0; r < p.caption_logits.rows(); ++r) {
      Index best = 0;
      p.caption_logits.row(r).maxCoeff(&best);
      const auto id = static_cast<int>(best);
      if (id == Vocabulary::kEos) break;
      if (id == Vocabulary::kBos || id == Vocabulary::kPad) continue;
      if (!d.sentence.empty()) d.sentence += ' ';
      d.sentence += vocab.token(id);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace cap2sum
