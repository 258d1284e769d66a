// SPDX-License-Identifier: Apache-2.0
/**
 * @file checkpoint.hpp
 * @brief Model bundle and its on-disk checkpoint.
 *
 * Layout (little-endian):
 *
 *   8 bytes   magic "C2SCKPT\0"
 *   u32       version (1)
 *   u64       header length H
 *   H bytes   JSON header: {"summarizer": cfg, "captioner": cfg|null,
 *             "parameters": [[name, rows, cols], ...]}
 *   float64   parameter values in header order, row-major
 *   32 bytes  SHA-256 of every preceding byte
 */
#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "cap2sum/captioner.hpp"
#include "cap2sum/summarizer.hpp"

namespace cap2sum {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Models {
  Summarizer summarizer;
  std::optional<Captioner> captioner;

  Models(SummarizerConfig s, std::optional<CaptionerConfig> c, std::uint64_t seed);
};

/// Writes the checkpoint and returns its SHA-256 (hex).
std::string save_checkpoint(const std::filesystem::path& path, const Models& models);

/// Reads a checkpoint, rebuilding models from the stored configs.
Models load_checkpoint(const std::filesystem::path& path);

/// Loads parameters into existing models; the stored configs must equal
/// the models' configs.
void load_checkpoint_into(const std::filesystem::path& path, Models& models);

}  // namespace cap2sum
