// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cap2sum {

/// Lowercases, strips punctuation and splits on whitespace.
std::vector<std::string> tokenize(std::string_view sentence);

/// Token ↔ index map. Indices 0..3 are reserved for BOS, EOS, PAD, UNK.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  Vocabulary();

  /// Reserved tokens plus every distinct token of `sentences`, sorted.
  static Vocabulary build(std::span<const std::vector<std::string>> sentences);
  static Vocabulary from_json(const nlohmann::json& j);
  static Vocabulary load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  /// Index of `token`, or kUnk when absent.
  int index(const std::string& token) const;
  const std::string& token(int index) const;

  /// [w1..wk, EOS, PAD...] truncated/padded to `length`.
  std::vector<int> encode_target(std::span<const std::string> sentence,
                                 int length) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

}  // namespace cap2sum
