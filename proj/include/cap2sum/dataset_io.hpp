// SPDX-License-Identifier: Apache-2.0
/**
 * @file dataset_io.hpp
 * @brief Annotation ingestion and the checksummed binary array container.
 *
 * Container layout (all little-endian):
 *
 *   offset 0   4 bytes  magic: "C2SF" (float32 payload) or "C2SD" (float64)
 *   offset 4   u32      version (1)
 *   offset 8   u32      rows (T)
 *   offset 12  u32      cols (D)
 *   offset 16  rows·cols elements, row-major
 *   trailer    u32      CRC32 of every preceding byte
 *
 * Features and priors use float32; score vectors use float64 so that they
 * round-trip exactly.
 */
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cap2sum/types.hpp"

namespace cap2sum {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 16;

void write_array_file(const std::filesystem::path& path, const FeatureMatrix& m);
void write_array_file(const std::filesystem::path& path, const Matrix& m);
FeatureMatrix read_float32_array(const std::filesystem::path& path);
Matrix read_float64_array(const std::filesystem::path& path);

void write_prior(const std::filesystem::path& path, const ClipPrior& prior);
ClipPrior read_prior(const std::filesystem::path& path, std::string video_id);
void write_scores(const std::filesystem::path& path, const SummaryScores& scores);
SummaryScores read_scores(const std::filesystem::path& path, std::string video_id);

/// Directory of per-video feature containers plus an `index.json` holding
/// shape and timing metadata. Single writer, any number of readers.
class FeatureStore {
 public:
  struct Entry {
    Index frames = 0;
    Index dim = 0;
    double fps = 0.0;
    double duration_sec = 0.0;
    std::string file;
    std::uint64_t payload_offset = kContainerHeaderBytes;
    std::uint64_t payload_bytes = 0;
  };

  /// Opens `root`, creating it when missing. An existing index is loaded.
  explicit FeatureStore(std::filesystem::path root);

  void write(const FrameFeatures& f);
  FrameFeatures read(const std::string& video_id) const;
  bool contains(const std::string& video_id) const;
  const Entry& entry(const std::string& video_id) const;
  std::vector<std::string> video_ids() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  void save_index() const;

  std::filesystem::path root_;
  std::map<std::string, Entry> index_;
};

/// File name component safe for any video id.
std::string sanitize_file_stem(const std::string& video_id);

struct CaptionIngest {
  std::vector<DenseCaptionAnnotation> annotations;  // sorted by video_id
  std::size_t dropped_events = 0;  // e <= s
  std::size_t clamped_events = 0;  // end beyond duration, clamped
};

/// ActivityNet-Caption JSON: {id: {duration, timestamps: [[s,e],...],
/// sentences: [...]}}.
CaptionIngest ingest_anet_captions(const std::filesystem::path& path);
CaptionIngest parse_anet_captions(const nlohmann::json& j);
nlohmann::json anet_captions_json(std::span<const DenseCaptionAnnotation> annotations);
void write_anet_captions(const std::filesystem::path& path,
                         std::span<const DenseCaptionAnnotation> annotations);

struct SidecarIngest {
  std::vector<DenseCaptionAnnotation> matched;  // ids present in `known_ids`
  std::vector<std::string> orphans;             // ids absent from `known_ids`
  std::size_t dropped_events = 0;
};

/// Caption sidecar in the ActivityNet-Caption schema, reconciled against
/// the ids of a feature store.
SidecarIngest ingest_caption_sidecar(const std::filesystem::path& path,
                                     std::span<const std::string> known_ids);
/// One JSON object per line for every orphaned id.
void write_reconciliation_report(const std::filesystem::path& path,
                                 const SidecarIngest& ingest);

enum class SummaryLayout { tvsum, summe };
SummaryLayout parse_summary_layout(const std::string& name);
std::string to_string(SummaryLayout layout);

/**
 * Reads a summary dataset directory.
 *
 * Both layouts accept per-video JSON records `<id>.json`:
 *   {"video_id": str, "fps": num?, "user_scores": [[...], ...],
 *    "change_points": [0, ..., T]?}
 * The tvsum layout additionally reads the native `ydata-anno.tsv`
 * (id, category, comma-separated scores; one row per annotator).
 *
 * Records without change points get uniform shots of round(2·fps) frames
 * and `synthetic_shots = true`; `default_fps` applies when a record has no
 * fps of its own.
 */
std::vector<GroundTruthSummary> ingest_summary_dataset(
    const std::filesystem::path& dir, SummaryLayout layout, double default_fps = 2.0);

void write_summary_record(const std::filesystem::path& dir,
                          const GroundTruthSummary& gt, double fps);

}  // namespace cap2sum
