// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <random>

#include "cap2sum/clip_prior.hpp"
#include "cap2sum/encoder.hpp"
#include "cap2sum/error.hpp"
#include "oracles.hpp"

using namespace cap2sum;

namespace {

PriorConfig defaults() {
  PriorConfig c;
  c.labels = {"a", "b"};
  return c;
}

// One column above tau on [first, last], everything else low.
Matrix single_run(Index t, Index k, Index first, Index last, Index col = 0) {
  Matrix m = Matrix::Constant(t, k, 1.0 / static_cast<double>(k));
  for (Index i = first; i <= last; ++i) {
    m.row(i).setConstant(0.1 / static_cast<double>(k - 1));
    m(i, col) = 0.9;
  }
  return m;
}

Vector expect_ones(Index t, Index first, Index last) {
  Vector v = Vector::Zero(t);
  v.segment(first, last - first + 1).setOnes();
  return v;
}

// Row-stochastic matrix with piecewise-dominant labels so runs actually occur.
Matrix blocky_stochastic(Index t, Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<Index> lab(0, k - 1);
  std::uniform_int_distribution<Index> len(1, 15);
  Matrix m(t, k);
  Index i = 0;
  while (i < t) {
    const Index l = std::min(t - i, len(rng));
    const Index dom = lab(rng);
    const double strength = 2.0 + 6.0 * u(rng);
    for (Index r = i; r < i + l; ++r) {
      for (Index c = 0; c < k; ++c) m(r, c) = u(rng) + (c == dom ? strength : 0.0);
      m.row(r) /= m.row(r).sum();
    }
    i += l;
  }
  return m;
}

}  // namespace

TEST_CASE("similarity saturates on an identical text") {
  Matrix f(1, 3);
  f << 1, 0, 0;
  Matrix txt(2, 3);
  txt << 2, 0, 0,
         0, 1, 0;
  const Matrix m = build_similarity(f, txt, 100.0);
  CHECK(m(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m(0, 1) < 1e-40);
}

TEST_CASE("similarity is uniform for an equidistant frame") {
  Matrix f(1, 2);
  f << 1, 1;
  Matrix txt(2, 2);
  txt << 1, 0,
         0, 1;
  const Matrix m = build_similarity(f, txt, 100.0);
  CHECK(m(0, 0) == doctest::Approx(0.5));
  CHECK(m(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("similarity rows sum to one for random inputs") {
  std::mt19937_64 rng(11);
  const Matrix m = build_similarity(oracle::random_matrix(50, 16, rng),
                                    oracle::random_matrix(100, 16, rng), 100.0);
  CHECK(m.rows() == 50);
  CHECK(m.cols() == 100);
  for (Index t = 0; t < 50; ++t) CHECK(std::abs(m.row(t).sum() - 1.0) < 1e-5);
}

TEST_CASE("similarity rejects zero rows and dimension mismatch") {
  Matrix f = Matrix::Ones(2, 3);
  f.row(1).setZero();
  CHECK_THROWS_AS(build_similarity(f, Matrix::Ones(2, 3), 100.0), ValidationError);
  CHECK_THROWS_AS(build_similarity(Matrix::Ones(2, 3), Matrix::Ones(2, 4), 100.0), ShapeError);
}

TEST_CASE("qualifying run of 15 in T=40") {
  const ClipPrior p = extract_prior(single_run(40, 3, 5, 19), defaults());
  CHECK(p.prior == expect_ones(40, 5, 19));
}

TEST_CASE("run of 8 is too short") {
  CHECK(extract_prior(single_run(40, 3, 5, 12), defaults()).prior.isZero());
}

TEST_CASE("run of 15 in T=20 is too long") {
  CHECK(extract_prior(single_run(20, 3, 2, 16), defaults()).prior.isZero());
}

TEST_CASE("strict inequalities at the length boundaries") {
  // length exactly 10 is not longer than 10
  CHECK(extract_prior(single_run(40, 3, 0, 9), defaults()).prior.isZero());
  CHECK(extract_prior(single_run(40, 3, 0, 10), defaults()).prior.sum() == 11.0);
  // length exactly 0.5T is not shorter than 0.5T
  CHECK(extract_prior(single_run(30, 3, 3, 17), defaults()).prior.isZero());
  CHECK(extract_prior(single_run(30, 3, 3, 16), defaults()).prior.sum() == 14.0);
}

TEST_CASE("two labels OR-merge into their union") {
  Matrix m = Matrix::Constant(60, 3, 1.0 / 3.0);
  for (Index t = 5; t <= 25; ++t) {
    const bool a = t <= 19, b = t >= 12;
    m(t, 0) = a ? 0.45 : 0.1;
    m(t, 1) = b ? 0.45 : 0.1;
    m(t, 2) = 1.0 - m(t, 0) - m(t, 1);
  }
  CHECK(extract_prior(m, defaults()).prior == expect_ones(60, 5, 25));
}

TEST_CASE("extract_prior matches the brute-force oracle on 1000 matrices") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<Index> tdist(1, 50), kdist(2, 10);
  std::uniform_int_distribution<int> mdist(1, 12);
  std::uniform_real_distribution<double> tau(0.2, 0.7), frac(0.2, 1.0);
  int nonzero = 0;
  for (int i = 0; i < 1000; ++i) {
    const Index t = tdist(rng), k = kdist(rng);
    const Matrix m = blocky_stochastic(t, k, rng);
    PriorConfig cfg = defaults();
    cfg.tau = tau(rng);
    cfg.min_run_frames = mdist(rng);
    cfg.max_run_fraction = frac(rng);
    const Vector got = extract_prior(m, cfg).prior;
    const Vector want = oracle::prior(m, cfg.tau, cfg.min_run_frames, cfg.max_run_fraction);
    REQUIRE(got == want);
    if (got.sum() > 0) ++nonzero;
  }
  // the generator must exercise the non-trivial path
  CHECK(nonzero > 200);
}

TEST_CASE("thresholded mask is monotone in tau for a single label") {
  // Frames come in equal pairs and frame 0 never fires, so every run has
  // length in (1, T) and the length filters are inactive.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PriorConfig cfg = defaults();
  cfg.min_run_frames = 1;
  cfg.max_run_fraction = 1.0;
  for (int i = 0; i < 100; ++i) {
    Matrix m(40, 2);
    for (Index t = 0; t < 40; t += 2) {
      const double v = t == 0 ? 0.0 : u(rng);
      m.row(t) << v, 1.0 - v;
      m.row(t + 1) << v, 1.0 - v;
    }
    m.col(1).setZero();
    PriorConfig lo = cfg, hi = cfg;
    lo.tau = 0.3;
    hi.tau = 0.6;
    const Vector a = extract_prior(m, lo).prior;
    const Vector b = extract_prior(m, hi).prior;
    CHECK(a == (m.col(0).array() > 0.3).cast<double>().matrix());
    CHECK((b.array() <= a.array()).all());
  }
}

TEST_CASE("prior output is binary and validates") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const ClipPrior p = extract_prior(blocky_stochastic(50, 5, rng), defaults(), "v");
    CHECK_NOTHROW(validate(p));
    CHECK((p.prior.array() * (1.0 - p.prior.array())).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("config validation") {
  PriorConfig c = defaults();
  CHECK_NOTHROW(c.validate());
  c.tau = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = defaults();
  c.min_run_frames = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = defaults();
  c.max_run_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("prompts and label hash") {
  PriorConfig c;
  c.labels = {"apple", "aquarium fish"};
  CHECK(c.prompts() == std::vector<std::string>{"An image of apple.", "An image of aquarium fish."});
  CHECK(label_set_hash(c.labels) == label_set_hash({"apple", "aquarium fish"}));
  CHECK(label_set_hash(c.labels) != label_set_hash({"aquarium fish", "apple"}));
  CHECK(label_set_hash(c.labels).size() == 64);
}

TEST_CASE("generate_prior recovers a planted object segment") {
  const auto enc = EncoderHandle::stub(64, 1);
  PriorConfig cfg;
  cfg.labels = {"cat", "dog", "car"};
  const Matrix prompts = encode_prompts(enc, cfg);
  FeatureMatrix f(40, 64);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Index t = 0; t < 40; ++t) {
    Vector row(64);
    for (auto& x : row) x = n(rng);
    row.normalize();
    if (t >= 10 && t < 24) row = prompts.row(1).transpose().normalized() + 0.05 * row;
    f.row(t) = row.transpose().cast<float>();
  }
  const ClipPrior p = generate_prior(FrameFeatures{"v", f, 1.0, 40.0}, prompts, cfg);
  CHECK(p.prior == expect_ones(40, 10, 23));
}
