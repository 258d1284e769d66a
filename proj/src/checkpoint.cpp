// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "cap2sum/error.hpp"
#include "cap2sum/hashing.hpp"

namespace cap2sum {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

constexpr char kMagic[8] = {'C', '2', 'S', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kShaBytes = 32;

template <typename T>
void put(std::vector<std::byte>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::byte*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T get(const std::vector<std::byte>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::vector<const nn::NamedParameter*> all_parameters(const Models& m) {
  std::vector<const nn::NamedParameter*> out;
  for (const auto& p : m.summarizer.parameters().parameters()) out.push_back(&p);
  if (m.captioner)
    for (const auto& p : m.captioner->parameters().parameters()) out.push_back(&p);
  return out;
}

std::vector<std::byte> raw_digest(std::span<const std::byte> bytes) {
  const std::string hex = sha256_hex(bytes);
  std::vector<std::byte> out(kShaBytes);
  for (std::size_t i = 0; i < kShaBytes; ++i)
    out[i] = static_cast<std::byte>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  return out;
}

struct Parsed {
  nlohmann::json header;
  std::vector<std::byte> bytes;
  std::size_t payload_pos = 0;
};

Parsed read_verified(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open checkpoint " + path.string());
  Parsed p;
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  p.bytes.resize(raw.size());
  std::memcpy(p.bytes.data(), raw.data(), raw.size());
  if (p.bytes.size() < sizeof(kMagic) + 12 + kShaBytes)
    throw ParseError("checkpoint truncated: " + path.string());
  const std::span<const std::byte> body(p.bytes.data(), p.bytes.size() - kShaBytes);
  const auto digest = raw_digest(body);
  if (std::memcmp(digest.data(), p.bytes.data() + body.size(), kShaBytes) != 0)
    throw IntegrityError("checkpoint hash mismatch: " + path.string());
  if (std::memcmp(p.bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a checkpoint: " + path.string());
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(p.bytes, pos);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint64_t>(p.bytes, pos);
  if (pos + len > body.size()) throw ParseError("checkpoint header truncated");
  p.header = nlohmann::json::parse(
      std::string(reinterpret_cast<const char*>(p.bytes.data() + pos), len));
  p.payload_pos = pos + len;
  return p;
}

void fill(const Parsed& p, Models& m) {
  const auto params = all_parameters(m);
  const auto& index = p.header.at("parameters");
  if (index.size() != params.size())
    throw ConfigError("checkpoint holds " + std::to_string(index.size()) +
                      " parameters, model has " + std::to_string(params.size()));
  std::size_t pos = p.payload_pos;
  const std::size_t end = p.bytes.size() - kShaBytes;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = index[i];
    const auto name = entry.at(0).get<std::string>();
    const auto rows = entry.at(1).get<Index>();
    const auto cols = entry.at(2).get<Index>();
    ag::Var v = params[i]->var;
    if (name != params[i]->name || rows != v.rows() || cols != v.cols())
      throw ConfigError("checkpoint parameter " + name + " does not match model parameter " +
                        params[i]->name);
    const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (pos + n > end) throw ParseError("checkpoint payload truncated");
    std::memcpy(v.mutable_value().data(), p.bytes.data() + pos, n);
    pos += n;
  }
  if (pos != end) throw ParseError("checkpoint payload has trailing bytes");
}

}  // namespace

Models::Models(SummarizerConfig s, std::optional<CaptionerConfig> c, std::uint64_t seed)
    : summarizer(std::move(s), seed) {
  if (c) captioner.emplace(std::move(*c), seed + 1);
}

std::string save_checkpoint(const std::filesystem::path& path, const Models& models) {
  nlohmann::json header;
  header["summarizer"] = models.summarizer.config().to_json();
  header["captioner"] =
      models.captioner ? models.captioner->config().to_json() : nlohmann::json(nullptr);
  nlohmann::json index = nlohmann::json::array();
  const auto params = all_parameters(models);
  for (const auto* p : params) index.push_back({p->name, p->var.rows(), p->var.cols()});
  header["parameters"] = index;
  const std::string text = header.dump();

  std::vector<std::byte> out;
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(text.size()));
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  for (const auto* p : params) {
    const Matrix& v = p->var.value();
    const auto* b = reinterpret_cast<const std::byte*>(v.data());
    out.insert(out.end(), b, b + v.size() * static_cast<Index>(sizeof(double)));
  }
  const auto digest = raw_digest(out);
  out.insert(out.end(), digest.begin(), digest.end());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("failed writing checkpoint " + path.string());
  return sha256_hex(out);
}

Models load_checkpoint(const std::filesystem::path& path) {
  const Parsed p = read_verified(path);
  std::optional<CaptionerConfig> cap;
  if (!p.header.at("captioner").is_null())
    cap = CaptionerConfig::from_json(p.header.at("captioner"));
  Models m(SummarizerConfig::from_json(p.header.at("summarizer")), std::move(cap), 0);
  fill(p, m);
  return m;
}

void load_checkpoint_into(const std::filesystem::path& path, Models& models) {
  const Parsed p = read_verified(path);
  const auto s = SummarizerConfig::from_json(p.header.at("summarizer"));
  if (!(s == models.summarizer.config()))
    throw ConfigError("checkpoint summarizer config " + p.header.at("summarizer").dump() +
                      " does not match model config " +
                      models.summarizer.config().to_json().dump());
  const bool has_cap = !p.header.at("captioner").is_null();
  if (has_cap != models.captioner.has_value())
    throw ConfigError("checkpoint and model disagree on the presence of a captioner");
  if (has_cap) {
    const auto c = CaptionerConfig::from_json(p.header.at("captioner"));
    if (!(c == models.captioner->config()))
      throw ConfigError("checkpoint captioner config does not match model config");
  }
  fill(p, models);
}

}  // namespace cap2sum
