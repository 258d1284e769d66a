// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/clip_prior.hpp"

#include <cmath>
#include <fstream>

#include "cap2sum/error.hpp"
#include "cap2sum/hashing.hpp"

namespace cap2sum {

void PriorConfig::validate() const {
  if (labels.empty()) throw ValidationError("prior.labels", "label list is empty");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("prior.tau", "must satisfy 0 < tau < 1");
  if (min_run_frames < 1) throw ValidationError("prior.min_run_frames", "must be >= 1");
  if (!(max_run_fraction > 0.0 && max_run_fraction <= 1.0))
    throw ValidationError("prior.max_run_fraction", "must satisfy 0 < f <= 1");
  if (!(logit_scale > 0.0)) throw ValidationError("prior.logit_scale", "must be > 0");
  if (prompt_template.find("[object]") == std::string::npos)
    throw ValidationError("prior.prompt_template", "must contain [object]");
}

std::vector<std::string> PriorConfig::prompts() const {
  std::vector<std::string> out;
  out.reserve(labels.size());
  const std::string key = "[object]";
  for (const auto& label : labels) {
    std::string p = prompt_template;
    for (auto pos = p.find(key); pos != std::string::npos; pos = p.find(key, pos + label.size()))
      p.replace(pos, key.size(), label);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open labels file " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    labels.push_back(line);
  }
  if (labels.empty()) throw ValidationError(path.string(), "labels file is empty");
  return labels;
}

std::string label_set_hash(const std::vector<std::string>& labels) {
  std::string joined;
  for (const auto& l : labels) {
    joined += l;
    joined += '\n';
  }
  return sha256_hex(joined);
}

namespace {

Matrix normalized_rows(const Matrix& m, const char* what) {
  Matrix out = m;
  for (Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    if (n == 0.0 || !std::isfinite(n))
      throw ValidationError(std::string(what) + "[" + std::to_string(r) + "]",
                            "zero-norm row cannot be normalized");
    out.row(r) /= n;
  }
  return out;
}

}  // namespace

Matrix build_similarity(const Matrix& frame_features, const Matrix& text_features,
                        double logit_scale) {
  if (frame_features.cols() != text_features.cols())
    throw ShapeError("frame and text embeddings differ in dimension");
  const Matrix f = normalized_rows(frame_features, "frame_features");
  const Matrix t = normalized_rows(text_features, "text_features");
  Matrix m = logit_scale * (f * t.transpose());
  for (Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

ClipPrior extract_prior(const Matrix& similarity, const PriorConfig& cfg,
                        std::string video_id) {
  const Index frames = similarity.rows();
  const double max_len = cfg.max_run_fraction * static_cast<double>(frames);
  ClipPrior out{std::move(video_id), Vector::Zero(frames)};
  for (Index k = 0; k < similarity.cols(); ++k) {
    Index t = 0;
    while (t < frames) {
      if (!(similarity(t, k) > cfg.tau)) {
        ++t;
        continue;
      }
      const Index start = t;
      while (t < frames && similarity(t, k) > cfg.tau) ++t;
      const Index len = t - start;
      if (len > cfg.min_run_frames && static_cast<double>(len) < max_len)
        out.prior.segment(start, len).setOnes();
    }
  }
  return out;
}

Matrix encode_prompts(const EncoderHandle& encoder, const PriorConfig& cfg) {
  cfg.validate();
  return encoder.encode_texts(cfg.prompts());
}

ClipPrior generate_prior(const FrameFeatures& features, const Matrix& prompt_embeddings,
                         const PriorConfig& cfg) {
  cfg.validate();
  const Matrix sim = build_similarity(features.features.cast<double>(), prompt_embeddings,
                                      cfg.logit_scale);
  return extract_prior(sim, cfg, features.video_id);
}

}  // namespace cap2sum
