// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cstring>
#include <fstream>
#include <random>

#include "cap2sum/dataset_io.hpp"
#include "cap2sum/error.hpp"
#include "temp_dir.hpp"

using namespace cap2sum;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

FrameFeatures random_features(const std::string& id, Index t, Index d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  FrameFeatures f{id, FeatureMatrix(t, d), 2.0, static_cast<double>(t) / 2.0};
  for (Index i = 0; i < f.features.size(); ++i) f.features.data()[i] = n(rng);
  return f;
}

bool bit_identical(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump();
}

std::vector<std::vector<double>> rows(int annotators, int frames, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> r(annotators, std::vector<double>(frames));
  for (auto& row : r)
    for (auto& v : row) v = u(rng);
  return r;
}

}  // namespace

TEST_CASE("feature store round-trips T=7, D=512 bit-exactly") {
  const auto dir = testing::fresh_dir("dio_roundtrip");
  const FrameFeatures f = random_features("v1", 7, 512, 3);
  {
    FeatureStore store(dir);
    store.write(f);
  }
  FeatureStore reopened(dir);
  const FrameFeatures g = reopened.read("v1");
  CHECK(bit_identical(f.features, g.features));
  CHECK(g.fps == f.fps);
  CHECK(g.duration_sec == f.duration_sec);
  CHECK(reopened.entry("v1").payload_bytes == 7u * 512u * 4u);
}

TEST_CASE("reading an unknown id fails") {
  FeatureStore store(testing::fresh_dir("dio_unknown"));
  store.write(random_features("v1", 3, 4, 1));
  CHECK_FALSE(store.contains("zzz"));
  CHECK_THROWS_AS(store.read("zzz"), NotFoundError);
}

TEST_CASE("a flipped payload byte is a checksum error") {
  const auto dir = testing::fresh_dir("dio_flip");
  FeatureStore store(dir);
  store.write(random_features("v1", 5, 8, 2));
  const fs::path file = dir / store.entry("v1").file;
  {
    std::fstream io(file, std::ios::in | std::ios::out | std::ios::binary);
    io.seekg(20);
    char c = 0;
    io.read(&c, 1);
    c = static_cast<char>(c ^ 0x01);
    io.seekp(20);
    io.write(&c, 1);
  }
  CHECK_THROWS_AS(store.read("v1"), IntegrityError);
}

TEST_CASE("truncated file is an integrity error; wrong element type a parse error") {
  const auto dir = testing::fresh_dir("dio_trunc");
  write_array_file(dir / "a.bin", FeatureMatrix(FeatureMatrix::Ones(4, 4)));
  fs::resize_file(dir / "a.bin", 30);
  CHECK_THROWS_AS(read_float32_array(dir / "a.bin"), IntegrityError);
  write_array_file(dir / "b.bin", Matrix(Matrix::Ones(2, 2)));
  CHECK_THROWS_AS(read_float32_array(dir / "b.bin"), ParseError);
}

TEST_CASE("priors and scores round-trip exactly") {
  const auto dir = testing::fresh_dir("dio_prior_scores");
  Vector p(6);
  p << 0, 1, 1, 0, 0, 1;
  write_prior(dir / "p.prior", ClipPrior{"v", p});
  CHECK(read_prior(dir / "p.prior", "v").prior == p);

  Vector s(5);
  s << 0.1, 1.0 / 3.0, 0.7777777777777, 0.0, 1.0;
  write_scores(dir / "s.scores", SummaryScores{"v", s});
  const Vector back = read_scores(dir / "s.scores", "v").scores;
  CHECK(std::memcmp(back.data(), s.data(), sizeof(double) * 5) == 0);
}

TEST_CASE("anet captions: two events") {
  const json j = json::parse(
      R"({"v1": {"duration": 10.0, "timestamps": [[0,4],[5,9]], "sentences": ["a","b"]}})");
  const CaptionIngest in = parse_anet_captions(j);
  REQUIRE(in.annotations.size() == 1);
  const auto& a = in.annotations[0];
  CHECK(a.video_id == "v1");
  REQUIRE(a.events.size() == 2);
  CHECK(a.events[0].start_sec == 0.0);
  CHECK(a.events[0].end_sec == 4.0);
  CHECK(a.events[1].sentence == std::vector<std::string>{"b"});
  CHECK(in.dropped_events == 0);
}

TEST_CASE("anet captions: degenerate event is dropped and counted") {
  const json j = json::parse(
      R"({"v1": {"duration": 10.0, "timestamps": [[4,4],[1,2]], "sentences": ["x","y"]}})");
  const CaptionIngest in = parse_anet_captions(j);
  CHECK(in.dropped_events == 1);
  REQUIRE(in.annotations[0].events.size() == 1);
  CHECK(in.annotations[0].events[0].start_sec == 1.0);
}

TEST_CASE("anet captions: mismatched lengths and malformed JSON are parse errors") {
  const json j = json::parse(
      R"({"v1": {"duration": 10.0, "timestamps": [[0,4],[5,9]], "sentences": ["a"]}})");
  CHECK_THROWS_AS(parse_anet_captions(j), ParseError);

  const auto dir = testing::fresh_dir("dio_badjson");
  std::ofstream(dir / "bad.json") << "{\"v1\": [";
  CHECK_THROWS_AS(ingest_anet_captions(dir / "bad.json"), ParseError);
}

TEST_CASE("anet captions: ordering is by video id and ingestion is deterministic") {
  const auto dir = testing::fresh_dir("dio_order");
  write_json(dir / "c.json", json::parse(R"({
    "zeta": {"duration": 5, "timestamps": [[0,1]], "sentences": ["z"]},
    "alpha": {"duration": 5, "timestamps": [[1,2]], "sentences": ["a man runs"]}})"));
  const auto a = ingest_anet_captions(dir / "c.json");
  const auto b = ingest_anet_captions(dir / "c.json");
  REQUIRE(a.annotations.size() == 2);
  CHECK(a.annotations[0].video_id == "alpha");
  CHECK(a.annotations[0].events[0].sentence == std::vector<std::string>{"a", "man", "runs"});
  CHECK(anet_captions_json(a.annotations) == anet_captions_json(b.annotations));
}

TEST_CASE("caption sidecar reconciles against the feature store ids") {
  const auto dir = testing::fresh_dir("dio_sidecar");
  json j = json::object();
  std::vector<std::string> known;
  for (int i = 0; i < 50; ++i) {
    const std::string id = "tv" + std::to_string(i);
    j[id] = {{"duration", 20.0}, {"timestamps", {{1.0, 5.0}}}, {"sentences", {"a dog"}}};
    if (i < 49) known.push_back(id);
  }
  write_json(dir / "sidecar.json", j);
  const SidecarIngest in = ingest_caption_sidecar(dir / "sidecar.json", known);
  CHECK(in.matched.size() == 49);
  REQUIRE(in.orphans.size() == 1);
  CHECK(in.orphans[0] == "tv49");

  write_reconciliation_report(dir / "reconciliation.jsonl", in);
  std::ifstream rep(dir / "reconciliation.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(rep, line)) {
    ++lines;
    CHECK(json::parse(line).at("video_id") == "tv49");
  }
  CHECK(lines == 1);

  known.push_back("tv49");
  CHECK(ingest_caption_sidecar(dir / "sidecar.json", known).matched.size() == 50);
}

TEST_CASE("caption sidecar: empty events list is a validation error") {
  const auto dir = testing::fresh_dir("dio_sidecar_empty");
  write_json(dir / "s.json",
             json::parse(R"({"v1": {"duration": 10, "timestamps": [], "sentences": []}})"));
  const std::vector<std::string> known{"v1"};
  CHECK_THROWS_AS(ingest_caption_sidecar(dir / "s.json", known), ValidationError);
}

TEST_CASE("summary dataset: tvsum record with 20 annotators") {
  const auto dir = testing::fresh_dir("dio_tvsum");
  std::vector<Index> cps;
  for (Index b = 0; b <= 100; b += 25) cps.push_back(b);
  const auto r = rows(20, 100, 5);
  write_json(dir / "v1.json", {{"video_id", "v1"}, {"fps", 2.0}, {"user_scores", r},
                               {"change_points", cps}});
  const auto gts = ingest_summary_dataset(dir, SummaryLayout::tvsum);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].annotators() == 20);
  CHECK(gts[0].consensus_scores.size() == 100);
  CHECK_FALSE(gts[0].synthetic_shots);
  CHECK(gts[0].shot_boundaries == cps);
  double mean0 = 0.0;
  for (const auto& row : r) mean0 += row[0];
  CHECK(gts[0].consensus_scores(0) == doctest::Approx(mean0 / 20.0).epsilon(1e-12));
}

TEST_CASE("summary dataset: native tvsum tsv rows group by id") {
  const auto dir = testing::fresh_dir("dio_tsv");
  std::ofstream tsv(dir / "ydata-anno.tsv");
  for (int a = 0; a < 20; ++a) {
    tsv << "vidA\tVT\t";
    for (int t = 0; t < 12; ++t) tsv << (t ? "," : "") << (a + t) % 5 + 1;
    tsv << "\n";
  }
  tsv.close();
  const auto gts = ingest_summary_dataset(dir, SummaryLayout::tvsum, 1.0);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].video_id == "vidA");
  CHECK(gts[0].annotators() == 20);
  CHECK(gts[0].synthetic_shots);
}

TEST_CASE("summary dataset: summe record with 15 annotators") {
  const auto dir = testing::fresh_dir("dio_summe");
  write_json(dir / "s1.json", {{"video_id", "s1"}, {"user_scores", rows(15, 40, 6)},
                               {"change_points", {0, 10, 40}}});
  const auto gts = ingest_summary_dataset(dir, SummaryLayout::summe);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].annotators() == 15);
}

TEST_CASE("summary dataset: missing boundaries synthesize uniform shots") {
  const auto dir = testing::fresh_dir("dio_noshots");
  // fps 5 gives the 2-second fallback of 10 frames
  write_json(dir / "v.json", {{"video_id", "v"}, {"fps", 5.0}, {"user_scores", rows(3, 100, 7)}});
  const auto gts = ingest_summary_dataset(dir, SummaryLayout::summe);
  REQUIRE(gts.size() == 1);
  CHECK(gts[0].synthetic_shots);
  REQUIRE(gts[0].shot_boundaries.size() == 11);
  for (std::size_t i = 0; i < 11; ++i)
    CHECK(gts[0].shot_boundaries[i] == static_cast<Index>(10 * i));
}

TEST_CASE("summary dataset: annotator length mismatch is an error") {
  const auto dir = testing::fresh_dir("dio_mismatch");
  auto r = rows(3, 20, 8);
  r[1].pop_back();
  write_json(dir / "v.json", {{"video_id", "v"}, {"user_scores", r}});
  CHECK_THROWS_AS(ingest_summary_dataset(dir, SummaryLayout::tvsum), ValidationError);
}

TEST_CASE("summary record write/ingest round-trip") {
  const auto dir = testing::fresh_dir("dio_summary_rt");
  Matrix m(2, 8);
  m << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
       0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1;
  const auto gt = GroundTruthSummary::from_annotators("r", m, {0, 3, 8});
  write_summary_record(dir, gt, 2.0);
  const auto back = ingest_summary_dataset(dir, SummaryLayout::summe);
  REQUIRE(back.size() == 1);
  CHECK(back[0].annotator_scores == m);
  CHECK(back[0].shot_boundaries == gt.shot_boundaries);
  CHECK_FALSE(back[0].synthetic_shots);
}

TEST_CASE("unknown layout is a config error") {
  CHECK_THROWS_AS(parse_summary_layout("youtube"), ConfigError);
  CHECK(to_string(parse_summary_layout("summe")) == "summe");
}
