// SPDX-License-Identifier: Apache-2.0
/**
 * @file cli.hpp
 * @brief Command-line entry point.
 *
 * Subcommands: synth, gen-prior, pretrain, finetune, summarize, evaluate,
 * config. Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
 * Every artifact-producing command writes `manifest.json` next to its
 * outputs.
 */
#pragma once

#include <map>
#include <string>

#include "json.hpp"

namespace cap2sum {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string label_set_hash;
  std::map<std::string, std::string> checkpoint_hashes;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

int run_cli(int argc, const char* const* argv);

}  // namespace cap2sum
