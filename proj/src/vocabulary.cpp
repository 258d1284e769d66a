// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "cap2sum/error.hpp"

namespace cap2sum {

namespace {
const std::vector<std::string> kReservedTokens = {"<bos>", "<eos>", "<pad>", "<unk>"};
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : sentence) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (std::ispunct(c)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary() : tokens_(kReservedTokens) {
  for (int i = 0; i < kReserved; ++i) index_[tokens_[static_cast<std::size_t>(i)]] = i;
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> sentences) {
  std::set<std::string> words;
  for (const auto& s : sentences) words.insert(s.begin(), s.end());
  Vocabulary v;
  for (const auto& w : words) {
    if (v.index_.count(w)) continue;
    v.index_[w] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(w);
  }
  return v;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("vocabulary: expected a JSON object");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number_integer())
      throw ParseError("vocabulary: index of '" + it.key() + "' is not an integer");
    const auto idx = it.value().get<long long>();
    if (idx < 0 || idx >= static_cast<long long>(tokens.size()) || seen[static_cast<std::size_t>(idx)])
      throw ParseError("vocabulary: indices must be a permutation of 0..n-1");
    seen[static_cast<std::size_t>(idx)] = true;
    tokens[static_cast<std::size_t>(idx)] = it.key();
  }
  for (int i = 0; i < kReserved; ++i) {
    if (static_cast<int>(tokens.size()) <= i ||
        tokens[static_cast<std::size_t>(i)] != kReservedTokens[static_cast<std::size_t>(i)])
      throw ParseError("vocabulary: reserved tokens <bos>, <eos>, <pad>, <unk> must occupy 0-3");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_[v.tokens_[i]] = static_cast<int>(i);
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vocabulary file " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("vocabulary " + path.string() + ": " + e.what());
  }
}

nlohmann::json Vocabulary::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) j[tokens_[i]] = static_cast<int>(i);
  return j;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write vocabulary file " + path.string());
  out << to_json().dump(2) << '\n';
}

int Vocabulary::index(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int index) const {
  if (index < 0 || index >= size()) throw NotFoundError("token index out of range");
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> Vocabulary::encode_target(std::span<const std::string> sentence,
                                           int length) const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(length));
  for (const auto& w : sentence) {
    if (static_cast<int>(out.size()) == length) break;
    out.push_back(index(w));
  }
  if (static_cast<int>(out.size()) < length) out.push_back(kEos);
  while (static_cast<int>(out.size()) < length) out.push_back(kPad);
  return out;
}

}  // namespace cap2sum
