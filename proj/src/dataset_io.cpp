// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "cap2sum/error.hpp"
#include "cap2sum/hashing.hpp"
#include "cap2sum/log.hpp"
#include "cap2sum/vocabulary.hpp"

namespace cap2sum {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagicF32[4] = {'C', '2', 'S', 'F'};
constexpr char kMagicF64[4] = {'C', '2', 'S', 'D'};

void put_u32(std::vector<char>& buf, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf.insert(buf.end(), b, b + 4);
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

std::uint32_t checked_u32(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(UINT32_MAX))
    throw ValidationError(what, "does not fit the container header");
  return static_cast<std::uint32_t>(v);
}

template <typename Scalar>
void write_container(const fs::path& path, const char (&magic)[4],
                     const Scalar* data, Index rows, Index cols) {
  std::vector<char> buf;
  buf.reserve(kContainerHeaderBytes + static_cast<std::size_t>(rows * cols) * sizeof(Scalar) + 4);
  buf.insert(buf.end(), magic, magic + 4);
  put_u32(buf, kContainerVersion);
  put_u32(buf, checked_u32(rows, "rows"));
  put_u32(buf, checked_u32(cols, "cols"));
  const auto* bytes = reinterpret_cast<const char*>(data);
  buf.insert(buf.end(), bytes, bytes + static_cast<std::size_t>(rows * cols) * sizeof(Scalar));
  put_u32(buf, crc32(std::as_bytes(std::span(buf.data(), buf.size()))));

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ParseError("short write to " + path.string());
}

struct RawContainer {
  bool float64 = false;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<char> bytes;  // whole file
};

RawContainer read_container(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  RawContainer c;
  c.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  if (c.bytes.size() < kContainerHeaderBytes + 4)
    throw IntegrityError(path.string() + ": truncated container");
  const char* p = c.bytes.data();
  if (std::memcmp(p, kMagicF32, 4) == 0) {
    c.float64 = false;
  } else if (std::memcmp(p, kMagicF64, 4) == 0) {
    c.float64 = true;
  } else {
    throw IntegrityError(path.string() + ": bad magic");
  }
  const std::size_t body = c.bytes.size() - 4;
  const std::uint32_t stored = get_u32(p + body);
  if (crc32(std::as_bytes(std::span(p, body))) != stored)
    throw IntegrityError(path.string() + ": checksum mismatch");
  if (get_u32(p + 4) != kContainerVersion)
    throw IntegrityError(path.string() + ": unsupported container version");
  c.rows = get_u32(p + 8);
  c.cols = get_u32(p + 12);
  const std::size_t elem = c.float64 ? 8 : 4;
  if (body != kContainerHeaderBytes + std::size_t{c.rows} * c.cols * elem)
    throw IntegrityError(path.string() + ": payload size does not match header");
  return c;
}

}  // namespace

void write_array_file(const fs::path& path, const FeatureMatrix& m) {
  write_container(path, kMagicF32, m.data(), m.rows(), m.cols());
}

void write_array_file(const fs::path& path, const Matrix& m) {
  write_container(path, kMagicF64, m.data(), m.rows(), m.cols());
}

FeatureMatrix read_float32_array(const fs::path& path) {
  const RawContainer c = read_container(path);
  if (c.float64) throw ParseError(path.string() + ": expected a float32 container");
  FeatureMatrix m(c.rows, c.cols);
  std::memcpy(m.data(), c.bytes.data() + kContainerHeaderBytes,
              std::size_t{c.rows} * c.cols * sizeof(float));
  return m;
}

Matrix read_float64_array(const fs::path& path) {
  const RawContainer c = read_container(path);
  if (!c.float64) throw ParseError(path.string() + ": expected a float64 container");
  Matrix m(c.rows, c.cols);
  std::memcpy(m.data(), c.bytes.data() + kContainerHeaderBytes,
              std::size_t{c.rows} * c.cols * sizeof(double));
  return m;
}

void write_prior(const fs::path& path, const ClipPrior& prior) {
  validate(prior);
  write_array_file(path, FeatureMatrix(prior.prior.cast<float>()));
}

ClipPrior read_prior(const fs::path& path, std::string video_id) {
  const FeatureMatrix m = read_float32_array(path);
  if (m.cols() != 1) throw ParseError(path.string() + ": prior must be T×1");
  ClipPrior p{std::move(video_id), m.col(0).cast<double>()};
  return validate(p);
}

void write_scores(const fs::path& path, const SummaryScores& scores) {
  validate(scores);
  write_array_file(path, Matrix(scores.scores));
}

SummaryScores read_scores(const fs::path& path, std::string video_id) {
  const Matrix m = read_float64_array(path);
  if (m.cols() != 1) throw ParseError(path.string() + ": scores must be T×1");
  SummaryScores s{std::move(video_id), m.col(0)};
  return validate(s);
}

// ---------------------------------------------------------------------------
// FeatureStore

std::string sanitize_file_stem(const std::string& video_id) {
  std::string out;
  out.reserve(video_id.size());
  for (char ch : video_id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ||
                    ch == '-' || ch == '.';
    out.push_back(ok ? ch : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

FeatureStore::FeatureStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  const fs::path index_path = root_ / "index.json";
  if (!fs::exists(index_path)) return;
  std::ifstream in(index_path);
  try {
    const json j = json::parse(in);
    for (const auto& [id, e] : j.at("videos").items()) {
      Entry entry;
      entry.frames = e.at("frames").get<Index>();
      entry.dim = e.at("dim").get<Index>();
      entry.fps = e.at("fps").get<double>();
      entry.duration_sec = e.at("duration_sec").get<double>();
      entry.file = e.at("file").get<std::string>();
      entry.payload_offset = e.at("payload_offset").get<std::uint64_t>();
      entry.payload_bytes = e.at("payload_bytes").get<std::uint64_t>();
      index_.emplace(id, std::move(entry));
    }
  } catch (const json::exception& e) {
    throw ParseError(index_path.string() + ": " + e.what());
  }
}

void FeatureStore::write(const FrameFeatures& f) {
  validate(f);
  Entry e;
  e.frames = f.frames();
  e.dim = f.dim();
  e.fps = f.fps;
  e.duration_sec = f.duration_sec;
  e.file = sanitize_file_stem(f.video_id) + ".feat";
  e.payload_bytes = static_cast<std::uint64_t>(f.features.size()) * sizeof(float);
  for (const auto& [id, other] : index_) {
    if (id != f.video_id && other.file == e.file)
      throw ConfigError("video ids '" + id + "' and '" + f.video_id +
                        "' map to the same file name");
  }
  write_array_file(root_ / e.file, f.features);
  index_[f.video_id] = std::move(e);
  save_index();
}

FrameFeatures FeatureStore::read(const std::string& video_id) const {
  const Entry& e = entry(video_id);
  FrameFeatures f;
  f.video_id = video_id;
  f.features = read_float32_array(root_ / e.file);
  if (f.frames() != e.frames || f.dim() != e.dim)
    throw IntegrityError(video_id + ": container shape disagrees with index");
  f.fps = e.fps;
  f.duration_sec = e.duration_sec;
  return f;
}

bool FeatureStore::contains(const std::string& video_id) const {
  return index_.count(video_id) > 0;
}

const FeatureStore::Entry& FeatureStore::entry(const std::string& video_id) const {
  const auto it = index_.find(video_id);
  if (it == index_.end())
    throw NotFoundError("unknown video id '" + video_id + "' in " + root_.string());
  return it->second;
}

std::vector<std::string> FeatureStore::video_ids() const {
  std::vector<std::string> ids;
  ids.reserve(index_.size());
  for (const auto& [id, e] : index_) ids.push_back(id);
  return ids;
}

void FeatureStore::save_index() const {
  json videos = json::object();
  for (const auto& [id, e] : index_) {
    videos[id] = {{"frames", e.frames},         {"dim", e.dim},
                  {"fps", e.fps},               {"duration_sec", e.duration_sec},
                  {"file", e.file},             {"payload_offset", e.payload_offset},
                  {"payload_bytes", e.payload_bytes}};
  }
  const json j = {{"version", kContainerVersion}, {"videos", videos}};
  std::ofstream out(root_ / "index.json", std::ios::trunc);
  if (!out) throw ParseError("cannot write " + (root_ / "index.json").string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Caption annotations

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

CaptionIngest parse_anet_captions(const json& j) {
  if (!j.is_object()) throw ParseError("caption file: top level must be an object");
  CaptionIngest out;
  try {
    for (const auto& [id, v] : j.items()) {  // nlohmann objects iterate sorted
      DenseCaptionAnnotation a;
      a.video_id = id;
      a.duration_sec = v.at("duration").get<double>();
      const auto& ts = v.at("timestamps");
      const auto& sentences = v.at("sentences");
      if (!ts.is_array() || !sentences.is_array())
        throw ParseError(id + ": timestamps and sentences must be arrays");
      if (ts.size() != sentences.size())
        throw ParseError(id + ": " + std::to_string(ts.size()) + " timestamps but " +
                         std::to_string(sentences.size()) + " sentences");
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!ts[i].is_array() || ts[i].size() != 2)
          throw ParseError(id + ": timestamp " + std::to_string(i) + " is not a pair");
        double s = ts[i][0].get<double>();
        double e = ts[i][1].get<double>();
        if (e > a.duration_sec) {
          e = a.duration_sec;
          ++out.clamped_events;
        }
        s = std::max(s, 0.0);
        if (e <= s) {
          ++out.dropped_events;
          continue;
        }
        a.events.push_back({s, e, tokenize(sentences[i].get<std::string>())});
      }
      validate(a);
      out.annotations.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("caption file: ") + e.what());
  }
  if (out.dropped_events > 0)
    log_warning("dropped " + std::to_string(out.dropped_events) +
                " degenerate caption events (end <= start)");
  return out;
}

CaptionIngest ingest_anet_captions(const fs::path& path) {
  try {
    return parse_anet_captions(load_json(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.field(), e.invariant());
  }
}

json anet_captions_json(std::span<const DenseCaptionAnnotation> annotations) {
  json j = json::object();
  for (const auto& a : annotations) {
    json ts = json::array();
    json sentences = json::array();
    for (const auto& e : a.events) {
      ts.push_back({e.start_sec, e.end_sec});
      std::string s;
      for (const auto& w : e.sentence) s += (s.empty() ? "" : " ") + w;
      sentences.push_back(s);
    }
    j[a.video_id] = {{"duration", a.duration_sec}, {"timestamps", ts}, {"sentences", sentences}};
  }
  return j;
}

void write_anet_captions(const fs::path& path,
                         std::span<const DenseCaptionAnnotation> annotations) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out << anet_captions_json(annotations).dump(2) << '\n';
}

SidecarIngest ingest_caption_sidecar(const fs::path& path,
                                     std::span<const std::string> known_ids) {
  CaptionIngest all = ingest_anet_captions(path);
  const std::set<std::string> known(known_ids.begin(), known_ids.end());
  SidecarIngest out;
  out.dropped_events = all.dropped_events;
  for (auto& a : all.annotations) {
    if (known.count(a.video_id)) {
      out.matched.push_back(std::move(a));
    } else {
      out.orphans.push_back(a.video_id);
    }
  }
  if (!out.orphans.empty())
    log_warning(std::to_string(out.orphans.size()) +
                " sidecar video ids are absent from the feature store");
  return out;
}

void write_reconciliation_report(const fs::path& path, const SidecarIngest& ingest) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& id : ingest.orphans) {
    out << json{{"video_id", id}, {"status", "orphan"},
                {"reason", "absent from feature store"}}
               .dump()
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Summary datasets

SummaryLayout parse_summary_layout(const std::string& name) {
  if (name == "tvsum") return SummaryLayout::tvsum;
  if (name == "summe") return SummaryLayout::summe;
  throw ConfigError("unknown summary layout '" + name + "' (expected tvsum or summe)");
}

std::string to_string(SummaryLayout layout) {
  return layout == SummaryLayout::tvsum ? "tvsum" : "summe";
}

namespace {

Index fallback_shot_len(double fps) {
  return std::max<Index>(1, static_cast<Index>(std::llround(2.0 * fps)));
}

GroundTruthSummary make_summary(const std::string& id,
                                const std::vector<std::vector<double>>& rows,
                                const std::vector<Index>* change_points, double fps) {
  if (rows.empty()) throw ValidationError(id + ".user_scores", "no annotators");
  const std::size_t frames = rows.front().size();
  Matrix scores(static_cast<Index>(rows.size()), static_cast<Index>(frames));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].size() != frames)
      throw ValidationError(id + ".user_scores[" + std::to_string(a) + "]",
                            "annotator score length " + std::to_string(rows[a].size()) +
                                " does not match T = " + std::to_string(frames));
    for (std::size_t t = 0; t < frames; ++t)
      scores(static_cast<Index>(a), static_cast<Index>(t)) = rows[a][t];
  }
  const bool synthetic = change_points == nullptr;
  std::vector<Index> bounds = synthetic
                                  ? uniform_shot_boundaries(static_cast<Index>(frames),
                                                            fallback_shot_len(fps))
                                  : *change_points;
  auto g = GroundTruthSummary::from_annotators(id, std::move(scores), std::move(bounds),
                                               synthetic);
  return validate(g);
}

void read_tvsum_tsv(const fs::path& file, double fps,
                    std::map<std::string, GroundTruthSummary>& out) {
  std::ifstream in(file);
  if (!in) throw NotFoundError("cannot open " + file.string());
  std::map<std::string, std::vector<std::vector<double>>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id, category, values;
    if (!std::getline(ls, id, '\t') || !std::getline(ls, category, '\t') ||
        !std::getline(ls, values))
      throw ParseError(file.string() + ":" + std::to_string(lineno) +
                       ": expected id<TAB>category<TAB>scores");
    std::vector<double> v;
    std::istringstream vs(values);
    std::string tok;
    while (std::getline(vs, tok, ',')) {
      try {
        v.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError(file.string() + ":" + std::to_string(lineno) + ": bad score '" + tok + "'");
      }
    }
    rows[id].push_back(std::move(v));
  }
  for (const auto& [id, r] : rows) out[id] = make_summary(id, r, nullptr, fps);
}

}  // namespace

std::vector<GroundTruthSummary> ingest_summary_dataset(const fs::path& dir,
                                                       SummaryLayout layout,
                                                       double default_fps) {
  if (!fs::is_directory(dir)) throw NotFoundError("not a directory: " + dir.string());
  std::map<std::string, GroundTruthSummary> by_id;
  if (layout == SummaryLayout::tvsum && fs::exists(dir / "ydata-anno.tsv"))
    read_tvsum_tsv(dir / "ydata-anno.tsv", default_fps, by_id);

  std::vector<fs::path> records;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      records.push_back(entry.path());
  }
  std::sort(records.begin(), records.end());
  for (const auto& path : records) {
    const json j = load_json(path);
    if (!j.is_object() || !j.contains("user_scores")) continue;
    try {
      const std::string id = j.value("video_id", path.stem().string());
      const double fps = j.value("fps", default_fps);
      const auto rows = j.at("user_scores").get<std::vector<std::vector<double>>>();
      std::vector<Index> cps;
      const bool has_cps = j.contains("change_points") && !j.at("change_points").is_null();
      if (has_cps) cps = j.at("change_points").get<std::vector<Index>>();
      by_id[id] = make_summary(id, rows, has_cps ? &cps : nullptr, fps);
      if (!has_cps)
        log_warning(id + ": no shot boundaries, synthesized uniform shots");
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  std::vector<GroundTruthSummary> out;
  out.reserve(by_id.size());
  for (auto& [id, g] : by_id) out.push_back(std::move(g));
  return out;
}

void write_summary_record(const fs::path& dir, const GroundTruthSummary& gt, double fps) {
  validate(gt);
  fs::create_directories(dir);
  json rows = json::array();
  for (Index a = 0; a < gt.annotators(); ++a) {
    std::vector<double> r(gt.annotator_scores.row(a).begin(), gt.annotator_scores.row(a).end());
    rows.push_back(r);
  }
  json j = {{"video_id", gt.video_id}, {"fps", fps}, {"user_scores", rows}};
  if (!gt.synthetic_shots) j["change_points"] = gt.shot_boundaries;
  std::ofstream out(dir / (sanitize_file_stem(gt.video_id) + ".json"), std::ios::trunc);
  if (!out) throw ParseError("cannot write summary record for " + gt.video_id);
  out << j.dump() << '\n';
}

}  // namespace cap2sum
