// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/synthetic.hpp"

#include <fstream>
#include <random>

#include <Eigen/QR>

#include "cap2sum/dataset_io.hpp"
#include "cap2sum/error.hpp"

namespace cap2sum {

namespace {

const char* const kConcepts[] = {"guitar", "surfing", "cooking", "dancing", "skiing", "painting"};

Vector noisy_unit(const Vector& center, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, noise / std::sqrt(static_cast<double>(center.size())));
  Vector v = center;
  for (Index i = 0; i < v.size(); ++i) v[i] += gauss(rng);
  return v.normalized();
}

Vector random_unit(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = gauss(rng);
  return v.normalized();
}

}  // namespace

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& cfg, const EncoderHandle& encoder,
                                        const PriorConfig& prior) {
  if (cfg.videos < 1 || cfg.prior_only_videos < 0 || cfg.prior_only_videos > cfg.videos)
    throw ConfigError("synthetic: invalid video counts");
  if (!(cfg.feature_norm > 0.0)) throw ConfigError("synthetic: feature_norm must be > 0");
  if (cfg.segment_frames < 2 || cfg.segment_frames + 4 > cfg.frames)
    throw ConfigError("synthetic: segment_frames must leave room inside the video");
  const Index dim = encoder.embed_dim();
  std::mt19937_64 rng(cfg.seed);

  // Concept directions orthogonal to the span of the label prompts.
  const Matrix prompts = encode_prompts(encoder, prior);  // K×D
  const Eigen::MatrixXd span = prompts.transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(span);
  const Index rank = std::min<Index>(span.cols(), dim);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, rank);
  std::vector<Vector> concepts;
  for (const char* word : kConcepts) {
    const std::string key = std::string("concept ") + word;
    Vector c = encoder.encode_texts(std::span<const std::string>(&key, 1)).row(0).transpose();
    c -= q * (q.transpose() * c);
    if (c.norm() < 1e-6) throw ConfigError("synthetic: embedding too narrow for concept vectors");
    concepts.push_back(c.normalized());
  }

  // Background shared by every video, so only the segments tell videos apart.
  std::mt19937_64 bg_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Vector> background;
  for (Index t = 0; t < cfg.frames; ++t) background.push_back(random_unit(dim, bg_rng));

  SyntheticDataset out;
  const int caption_videos = cfg.videos - cfg.prior_only_videos;
  const auto n_concepts = static_cast<int>(std::size(kConcepts));
  for (int v = 0; v < cfg.videos; ++v) {
    SyntheticVideo sv;
    sv.prior_only = v >= caption_videos;
    char id[32];
    std::snprintf(id, sizeof(id), "syn%02d", v);
    const double duration = static_cast<double>(cfg.frames) / cfg.fps;
    Matrix feats(cfg.frames, dim);
    for (Index t = 0; t < cfg.frames; ++t)
      feats.row(t) = noisy_unit(background[static_cast<std::size_t>(t)], cfg.frame_noise, rng)
                         .transpose();
    sv.designated = Vector::Zero(cfg.frames);
    sv.captions.video_id = id;
    sv.captions.duration_sec = duration;

    auto place = [&](Index start, Index len, const Vector& center) {
      for (Index t = start; t < start + len; ++t) {
        feats.row(t) = noisy_unit(center, cfg.frame_noise, rng).transpose();
        sv.designated[t] = 1.0;
      }
    };

    if (!sv.prior_only) {
      const bool two = (v % 2) == 1;
      if (!two) {
        std::uniform_int_distribution<Index> pos(1, cfg.frames - cfg.segment_frames - 1);
        const Index s = pos(rng);
        const int k = v % n_concepts;
        place(s, cfg.segment_frames, concepts[static_cast<std::size_t>(k)]);
        sv.captions.events.push_back({static_cast<double>(s) / cfg.fps,
                                      static_cast<double>(s + cfg.segment_frames) / cfg.fps,
                                      {"a", "clip", "of", kConcepts[k]}});
      } else {
        const Index len = cfg.segment_frames / 2;
        const Index half = cfg.frames / 2;
        std::uniform_int_distribution<Index> pos1(1, half - len - 1);
        std::uniform_int_distribution<Index> pos2(half + 1, cfg.frames - len - 1);
        const Index s1 = pos1(rng);
        const Index s2 = pos2(rng);
        const int k1 = v % n_concepts;
        const int k2 = (v + 3) % n_concepts;
        place(s1, len, concepts[static_cast<std::size_t>(k1)]);
        place(s2, cfg.segment_frames - len, concepts[static_cast<std::size_t>(k2)]);
        sv.captions.events.push_back({static_cast<double>(s1) / cfg.fps,
                                      static_cast<double>(s1 + len) / cfg.fps,
                                      {"a", "clip", "of", kConcepts[k1]}});
        sv.captions.events.push_back({static_cast<double>(s2) / cfg.fps,
                                      static_cast<double>(s2 + cfg.segment_frames - len) / cfg.fps,
                                      {"a", "clip", "of", kConcepts[k2]}});
      }
    } else {
      std::uniform_int_distribution<Index> pos(1, cfg.frames - cfg.segment_frames - 1);
      std::uniform_int_distribution<Index> label(0, prompts.rows() - 1);
      const Index s = pos(rng);
      place(s, cfg.segment_frames, prompts.row(label(rng)).transpose().normalized());
      sv.captions.events.push_back({0.0, duration, {"a", "video"}});
    }

    feats *= cfg.feature_norm;
    sv.features = FrameFeatures{id, feats.cast<float>(), cfg.fps, duration};
    validate(sv.features);
    validate(sv.captions);

    std::normal_distribution<double> noise(0.0, cfg.annotator_noise);
    Matrix ann(cfg.annotators, cfg.frames);
    for (int a = 0; a < cfg.annotators; ++a)
      for (Index t = 0; t < cfg.frames; ++t)
        ann(a, t) = std::clamp(sv.designated[t] + noise(rng), 0.0, 1.0);
    sv.summary = GroundTruthSummary::from_annotators(
        id, std::move(ann), uniform_shot_boundaries(cfg.frames, cfg.shot_frames));
    out.videos.push_back(std::move(sv));
  }
  std::vector<DenseCaptionAnnotation> anns;
  for (const auto& v : out.videos) anns.push_back(v.captions);
  std::vector<std::vector<std::string>> sentences;
  for (const auto& a : anns)
    for (const auto& e : a.events) sentences.push_back(e.sentence);
  out.vocab = Vocabulary::build(sentences);
  return out;
}

void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticDataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  FeatureStore store(dir / "features");
  std::vector<DenseCaptionAnnotation> anns;
  nlohmann::json designated = nlohmann::json::object();
  for (const auto& v : data.videos) {
    store.write(v.features);
    anns.push_back(v.captions);
    write_summary_record(dir / "summaries", v.summary, v.features.fps);
    std::vector<int> mask;
    for (Index t = 0; t < v.designated.size(); ++t) mask.push_back(v.designated[t] > 0.5 ? 1 : 0);
    designated[v.features.video_id] = {{"mask", mask}, {"prior_only", v.prior_only}};
  }
  write_anet_captions(dir / "captions.json", anns);
  data.vocab.save(dir / "vocab.json");
  std::ofstream out(dir / "designated.json", std::ios::trunc);
  out << designated.dump(2) << '\n';
}

double in_out_ratio(const Vector& scores, const Vector& designated) {
  if (scores.size() != designated.size()) throw ShapeError("in_out_ratio: length mismatch");
  double in = 0.0, outside = 0.0;
  Index n_in = 0, n_out = 0;
  for (Index t = 0; t < scores.size(); ++t) {
    if (designated[t] > 0.5) {
      in += scores[t];
      ++n_in;
    } else {
      outside += scores[t];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) throw ValidationError("designated", "needs frames on both sides");
  const double mean_out = outside / static_cast<double>(n_out);
  return (in / static_cast<double>(n_in)) / std::max(mean_out, 1e-12);
}

}  // namespace cap2sum
