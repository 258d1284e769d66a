// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <random>

#include "cap2sum/captioner.hpp"
#include "cap2sum/error.hpp"
#include "oracles.hpp"

using namespace cap2sum;
using ag::Var;

namespace {

Vocabulary small_vocab() {
  const std::vector<std::vector<std::string>> s{{"a", "b", "dog", "runs"}};
  return Vocabulary::build(s);
}

CaptionerConfig tiny(Index d = 6) {
  CaptionerConfig c;
  c.input_dim = d;
  c.embed_dim = 8;
  c.num_heads = 2;
  c.num_queries = 3;
  c.max_caption_len = 4;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.mlp_ratio = 2.0;
  c.dropout = 0.0;
  c.vocab = small_vocab();
  return c;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<std::vector<double>> cost_matrix(std::span<const Segment> pred,
                                             std::span<const double> conf,
                                             std::span<const Segment> gt) {
  std::vector<std::vector<double>> c(gt.size(), std::vector<double>(pred.size()));
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (std::size_t p = 0; p < pred.size(); ++p)
      c[g][p] = 4.0 * (1.0 - giou_1d(pred[p], gt[g])) + 2.0 * (1.0 - sigmoid(conf[p]));
  return c;
}

Segment random_segment(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double a = u(rng), b = u(rng);
  return {std::min(a, b), std::max(a, b) + 1e-3};
}

}  // namespace

TEST_CASE("T=20 with the default N gives 10 proposals with positive widths") {
  CaptionerConfig c;
  c.input_dim = 16;
  c.embed_dim = 16;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.max_caption_len = 5;
  c.vocab = small_vocab();
  const Captioner m(c, 0);
  std::mt19937_64 rng(1);
  const CaptionerOutput out = m.caption_forward(oracle::random_matrix(20, 16, rng));
  REQUIRE(out.proposals.size() == 10);
  for (const auto& p : out.proposals) {
    CHECK(p.width > 0.0);
    CHECK(p.width < 1.0);
    CHECK(p.center > 0.0);
    CHECK(p.center < 1.0);
    CHECK(p.caption_logits.rows() == 5);
    CHECK(p.caption_logits.cols() == c.vocab.size());
  }
  CHECK(out.event_count_logits.size() == 11);
  CHECK_NOTHROW(validate(out));
}

TEST_CASE("zero input in eval mode is deterministic") {
  const Captioner a(tiny(), 5), b(tiny(), 5);
  const Matrix z = Matrix::Zero(7, 6);
  const CaptionerOutput x = a.caption_forward(z), y = b.caption_forward(z);
  for (std::size_t i = 0; i < x.proposals.size(); ++i) {
    CHECK(x.proposals[i].center == y.proposals[i].center);
    CHECK(x.proposals[i].width == y.proposals[i].width);
    CHECK(x.proposals[i].confidence_logit == y.proposals[i].confidence_logit);
    CHECK(x.proposals[i].caption_logits == y.proposals[i].caption_logits);
  }
  CHECK(x.event_count_logits == y.event_count_logits);
}

TEST_CASE("matching: exact overlap on proposal 3 wins") {
  const std::vector<Segment> pred{{0.0, 0.1}, {0.15, 0.2}, {0.9, 1.0}, {0.4, 0.6}, {0.7, 0.8}};
  const std::vector<double> conf(5, 0.0);
  const std::vector<Segment> gt{{0.4, 0.6}};
  const Assignment a = match_proposals(pred, conf, gt);
  REQUIRE(a.pairs.size() == 1);
  CHECK(a.pairs[0].gt == 0);
  CHECK(a.pairs[0].proposal == 3);
  const auto want = oracle::assignment(cost_matrix(pred, conf, gt));
  CHECK(want[0] == 3);
}

TEST_CASE("matching: empty gt and tie-break") {
  const std::vector<Segment> pred{{0.2, 0.4}, {0.2, 0.4}, {0.6, 0.8}};
  const std::vector<double> conf{0.5, 0.5, 0.5};
  CHECK(match_proposals(pred, conf, std::vector<Segment>{}).pairs.empty());
  const std::vector<Segment> gt{{0.2, 0.4}};
  const Assignment a = match_proposals(pred, conf, gt);
  REQUIRE(a.pairs.size() == 1);
  CHECK(a.pairs[0].proposal == 0);
}

TEST_CASE("matching: more gt events than proposals keeps the longest") {
  const std::vector<Segment> pred{{0.0, 0.5}, {0.5, 1.0}};
  const std::vector<double> conf{0.0, 0.0};
  const std::vector<Segment> gt{{0.0, 0.1}, {0.2, 0.6}, {0.6, 0.9}};
  const Assignment a = match_proposals(pred, conf, gt);
  CHECK(a.dropped_gt == 1);
  REQUIRE(a.pairs.size() == 2);
  CHECK(a.pairs[0].gt == 1);
  CHECK(a.pairs[1].gt == 2);
}

TEST_CASE("matching equals the exhaustive oracle for N <= 8, gt <= 4") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> ndist(1, 8);
  std::normal_distribution<double> logit(0.0, 2.0);
  std::uniform_int_distribution<int> dup(0, 3);
  for (int i = 0; i < 2000; ++i) {
    const int n = ndist(rng);
    const int g = std::uniform_int_distribution<int>(0, std::min(4, n))(rng);
    std::vector<Segment> pred;
    std::vector<double> conf;
    for (int p = 0; p < n; ++p) {
      // occasional duplicates force exact ties
      if (p > 0 && dup(rng) == 0) {
        pred.push_back(pred[static_cast<std::size_t>(p - 1)]);
        conf.push_back(conf.back());
      } else {
        pred.push_back(random_segment(rng));
        conf.push_back(logit(rng));
      }
    }
    std::vector<Segment> gt;
    for (int k = 0; k < g; ++k) gt.push_back(random_segment(rng));
    const Assignment a = match_proposals(pred, conf, gt);
    const auto want = oracle::assignment(cost_matrix(pred, conf, gt));
    REQUIRE(a.pairs.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(a.pairs[k].gt == static_cast<Index>(k));
      CHECK(a.pairs[k].proposal == want[k]);
    }
  }
}

TEST_CASE("decode: thresholds 1.0 and 0.0") {
  const Captioner m(tiny(), 2);
  std::mt19937_64 rng(3);
  const CaptionerOutput out = m.caption_forward(oracle::random_matrix(9, 6, rng));
  const Vocabulary v = small_vocab();
  CHECK(decode_captions(out, 1.0, 30.0, v).empty());
  const auto all = decode_captions(out, 0.0, 30.0, v);
  CHECK(all.size() == 3);
  for (const auto& c : all) {
    CHECK(c.start_sec < c.end_sec);
    CHECK(c.start_sec >= 0.0);
    CHECK(c.end_sec <= 30.0);
  }
}

TEST_CASE("decode: forced token sequence") {
  const Vocabulary v = small_vocab();
  CaptionerOutput out;
  Proposal p;
  p.center = 0.5;
  p.width = 0.2;
  p.confidence_logit = 3.0;
  const std::vector<int> seq{Vocabulary::kBos, v.index("a"), v.index("b"), Vocabulary::kEos,
                             v.index("dog")};
  p.caption_logits = Matrix::Zero(5, v.size());
  for (Index r = 0; r < 5; ++r) p.caption_logits(r, seq[static_cast<std::size_t>(r)]) = 10.0;
  out.proposals.push_back(p);
  out.event_count_logits = Vector::Zero(2);
  const auto d = decode_captions(out, 0.5, 10.0, v);
  REQUIRE(d.size() == 1);
  CHECK(d[0].sentence == "a b");
  CHECK(d[0].start_sec == doctest::Approx(4.0));
  CHECK(d[0].end_sec == doctest::Approx(6.0));
  CHECK(d[0].confidence == doctest::Approx(sigmoid(3.0)));
}

TEST_CASE("decode: segments always satisfy start < end") {
  std::mt19937_64 rng(17);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Captioner m(tiny(), seed);
    const CaptionerOutput out = m.caption_forward(oracle::random_matrix(5, 6, rng, -4, 4));
    for (const auto& c : decode_captions(out, 0.0, 12.0, small_vocab()))
      CHECK(c.start_sec < c.end_sec);
  }
}

TEST_CASE("gradients w.r.t. weighted features match finite differences") {
  const Captioner m(tiny(4), 9);
  const nn::ForwardContext eval;
  std::mt19937_64 rng(21);
  const std::vector<int> target{4, 5, Vocabulary::kEos, Vocabulary::kPad};
  for (int i = 0; i < 3; ++i) {
    const Matrix f = oracle::random_matrix(5, 4, rng);
    const Matrix w_seg = oracle::random_matrix(3, 2, rng);
    const Matrix w_conf = oracle::random_matrix(3, 1, rng);
    const Matrix w_count = oracle::random_matrix(1, 4, rng);
    const double err = oracle::gradcheck(
        [&](auto v) {
          const ProposalGraph g = m.forward_proposals(v[0], eval);
          const Var cap = caption_token_loss(m.teacher_forced_logits(g, 1, target, eval), target);
          std::vector<Var> parts{ag::sum(ag::mul(g.segments, Var::constant(w_seg))),
                                 ag::sum(ag::mul(g.confidence_logits, Var::constant(w_conf))),
                                 ag::sum(ag::mul(g.count_logits, Var::constant(w_count))), cap};
          return ag::sum(ag::concat_rows(parts));
        },
        {f});
    CHECK(err < 1e-4);
  }
}

TEST_CASE("config json round-trip and validation") {
  const CaptionerConfig c = tiny();
  CHECK(CaptionerConfig::from_json(c.to_json()) == c);
  CHECK(c.event_classes() == 4);
  CaptionerConfig bad = tiny();
  bad.embed_dim = 7;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = tiny();
  bad.num_queries = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
