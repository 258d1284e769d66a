// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/config.hpp"

#include <fstream>

#include "cap2sum/error.hpp"

namespace cap2sum {

using nlohmann::json;

namespace {

const char* const kDefaults = R"json({
  "summarizer": {"input_dim": 512, "embed_dim": 256, "num_layers": 4, "num_heads": 4,
                 "mlp_ratio": 4.0, "dropout": 0.1, "max_frames": 2048},
  "captioner": {"embed_dim": 256, "num_heads": 4, "num_queries": 10, "max_caption_len": 20,
                "enc_layers": 2, "dec_layers": 2, "max_event_count": -1, "mlp_ratio": 4.0,
                "dropout": 0.1},
  "prior": {"labels_file": "", "prompt_template": "An image of [object].", "tau": 0.4,
            "min_run_frames": 10, "max_run_fraction": 0.5, "logit_scale": 100.0},
  "loss": {"giou": 4.0, "cls": 2.0, "ec": 0.5, "pred": 0.5, "cap": 2.0, "prior": 10.0,
           "len": 0.5, "var": 0.5, "target_length": 0.3},
  "focal": {"alpha": 0.25, "gamma": 2.0},
  "train": {"learning_rate": 5e-05, "batch_size": 1, "epochs": 1, "seed": 0, "optimizer": "adam",
            "checkpoint_every": 0, "freeze_captioner": false, "grad_clip": 1.0,
            "adam_beta1": 0.9, "adam_beta2": 0.999, "adam_eps": 1e-08, "split_ratio": 0.8},
  "eval": {"budget_fraction": 0.15, "protocol": "tvsum_avg"},
  "captions": {"confidence_threshold": 0.5},
  "encoder": {"name": "stub", "embed_dim": 512, "seed": 0, "logit_scale": 100.0,
              "text_table": ""},
  "dataset": {"default_fps": 2.0},
  "synthetic": {"videos": 8, "prior_only_videos": 2, "frames": 48, "fps": 1.0,
                "segment_frames": 14, "frame_noise": 0.3, "feature_norm": 3.0,
                "annotators": 3, "annotator_noise": 0.05, "shot_frames": 4, "seed": 0}
})json";

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // Integers stay integers; floats accept any number.
    return a.is_number_float() || b.is_number_integer();
  }
  return a.type() == b.type();
}

void merge(json& base, const json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw ConfigError((prefix.empty() ? "config" : prefix) + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key: " + path);
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), path);
    } else {
      if (!same_kind(slot, it.value()))
        throw ConfigError(path + ": expected " + std::string(slot.type_name()) + ", got " +
                          it.value().type_name());
      slot = slot.is_number_float() ? json(it.value().get<double>()) : it.value();
    }
  }
}

template <typename T>
T field(const json& tree, const char* section, const char* key) {
  try {
    return tree.at(section).at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(section) + "." + key + ": missing or of the wrong type");
  }
}

template <typename F>
void rethrow_with_section(const char* section, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    std::string f_name = e.field();
    if (f_name != section && f_name.rfind(std::string(section) + ".", 0) != 0)
      f_name = std::string(section) + "." + f_name;
    throw ValidationError(f_name, e.invariant());
  }
}

}  // namespace

const json& default_config() {
  static const json tree = json::parse(kDefaults);
  return tree;
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json patch = value;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    parts.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge(tree, patch, "");
}

json load_config(const std::optional<std::filesystem::path>& file,
                 std::span<const std::string> overrides) {
  json tree = default_config();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw NotFoundError("cannot open config file " + file->string());
    json patch;
    try {
      patch = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError("config file " + file->string() + ": " + e.what());
    }
    merge(tree, patch, "");
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return tree;
}

AppConfig AppConfig::from_json(const json& tree) {
  AppConfig c;
  c.summarizer = SummarizerConfig::from_json(tree.at("summarizer"));
  rethrow_with_section("summarizer", [&] { c.summarizer.validate(); });

  const json& cap = tree.at("captioner");
  c.captioner.input_dim = c.summarizer.input_dim;
  c.captioner.embed_dim = field<Index>(tree, "captioner", "embed_dim");
  c.captioner.num_heads = field<int>(tree, "captioner", "num_heads");
  c.captioner.num_queries = field<int>(tree, "captioner", "num_queries");
  c.captioner.max_caption_len = field<int>(tree, "captioner", "max_caption_len");
  c.captioner.enc_layers = field<int>(tree, "captioner", "enc_layers");
  c.captioner.dec_layers = field<int>(tree, "captioner", "dec_layers");
  c.captioner.max_event_count = field<int>(tree, "captioner", "max_event_count");
  c.captioner.mlp_ratio = cap.at("mlp_ratio").get<double>();
  c.captioner.dropout = cap.at("dropout").get<double>();
  {
    // Validate everything but the vocabulary, which comes from data.
    CaptionerConfig probe = c.captioner;
    probe.vocab = Vocabulary::build(std::vector<std::vector<std::string>>{{"x"}});
    rethrow_with_section("captioner", [&] { probe.validate(); });
  }

  c.labels_file = field<std::string>(tree, "prior", "labels_file");
  c.prior.prompt_template = field<std::string>(tree, "prior", "prompt_template");
  c.prior.tau = field<double>(tree, "prior", "tau");
  c.prior.min_run_frames = field<int>(tree, "prior", "min_run_frames");
  c.prior.max_run_fraction = field<double>(tree, "prior", "max_run_fraction");
  c.prior.logit_scale = field<double>(tree, "prior", "logit_scale");
  {
    PriorConfig probe = c.prior;
    probe.labels = {"x"};
    rethrow_with_section("prior", [&] { probe.validate(); });
  }

  c.loss.giou = field<double>(tree, "loss", "giou");
  c.loss.cls = field<double>(tree, "loss", "cls");
  c.loss.ec = field<double>(tree, "loss", "ec");
  c.loss.pred = field<double>(tree, "loss", "pred");
  c.loss.cap = field<double>(tree, "loss", "cap");
  c.loss.prior = field<double>(tree, "loss", "prior");
  c.loss.len = field<double>(tree, "loss", "len");
  c.loss.var = field<double>(tree, "loss", "var");
  c.loss.target_length = field<double>(tree, "loss", "target_length");
  rethrow_with_section("loss", [&] { c.loss.validate(); });

  c.focal.alpha = field<double>(tree, "focal", "alpha");
  c.focal.gamma = field<double>(tree, "focal", "gamma");
  if (!(c.focal.alpha >= 0.0 && c.focal.alpha <= 1.0))
    throw ValidationError("focal.alpha", "must lie in [0,1]");
  if (!(c.focal.gamma >= 0.0)) throw ValidationError("focal.gamma", "must be >= 0");

  c.train.learning_rate = field<double>(tree, "train", "learning_rate");
  c.train.batch_size = field<int>(tree, "train", "batch_size");
  c.train.epochs = field<int>(tree, "train", "epochs");
  c.train.seed = field<std::uint64_t>(tree, "train", "seed");
  c.train.optimizer = field<std::string>(tree, "train", "optimizer");
  c.train.checkpoint_every = field<int>(tree, "train", "checkpoint_every");
  c.train.freeze_captioner = field<bool>(tree, "train", "freeze_captioner");
  c.train.grad_clip = field<double>(tree, "train", "grad_clip");
  c.train.adam_beta1 = field<double>(tree, "train", "adam_beta1");
  c.train.adam_beta2 = field<double>(tree, "train", "adam_beta2");
  c.train.adam_eps = field<double>(tree, "train", "adam_eps");
  c.train.split_ratio = field<double>(tree, "train", "split_ratio");
  c.train.validate();

  c.budget_fraction = field<double>(tree, "eval", "budget_fraction");
  if (!(c.budget_fraction >= 0.0 && c.budget_fraction <= 1.0))
    throw ValidationError("eval.budget_fraction", "must lie in [0,1]");
  try {
    c.protocol = parse_protocol(field<std::string>(tree, "eval", "protocol"));
  } catch (const ConfigError& e) {
    throw ValidationError("eval.protocol", e.what());
  }
  c.confidence_threshold = field<double>(tree, "captions", "confidence_threshold");
  if (!(c.confidence_threshold >= 0.0 && c.confidence_threshold <= 1.0))
    throw ValidationError("captions.confidence_threshold", "must lie in [0,1]");

  c.encoder.name = field<std::string>(tree, "encoder", "name");
  c.encoder.embed_dim = field<Index>(tree, "encoder", "embed_dim");
  c.encoder.seed = field<std::uint64_t>(tree, "encoder", "seed");
  c.encoder.logit_scale = field<double>(tree, "encoder", "logit_scale");
  c.encoder.text_table = field<std::string>(tree, "encoder", "text_table");
  if (c.encoder.name != "stub" && c.encoder.text_table.empty())
    throw ValidationError("encoder.text_table", "required unless encoder.name is 'stub'");
  if (c.encoder.embed_dim != c.summarizer.input_dim)
    throw ValidationError("encoder.embed_dim", "must equal summarizer.input_dim");

  c.default_fps = field<double>(tree, "dataset", "default_fps");
  if (!(c.default_fps > 0.0)) throw ValidationError("dataset.default_fps", "must be > 0");

  c.synthetic.videos = field<int>(tree, "synthetic", "videos");
  c.synthetic.prior_only_videos = field<int>(tree, "synthetic", "prior_only_videos");
  c.synthetic.frames = field<Index>(tree, "synthetic", "frames");
  c.synthetic.fps = field<double>(tree, "synthetic", "fps");
  c.synthetic.segment_frames = field<Index>(tree, "synthetic", "segment_frames");
  c.synthetic.frame_noise = field<double>(tree, "synthetic", "frame_noise");
  c.synthetic.feature_norm = field<double>(tree, "synthetic", "feature_norm");
  c.synthetic.annotators = field<int>(tree, "synthetic", "annotators");
  c.synthetic.annotator_noise = field<double>(tree, "synthetic", "annotator_noise");
  c.synthetic.shot_frames = field<Index>(tree, "synthetic", "shot_frames");
  c.synthetic.seed = field<std::uint64_t>(tree, "synthetic", "seed");
  return c;
}

std::filesystem::path resolve_labels_file(const AppConfig& cfg) {
  if (!cfg.labels_file.empty()) return cfg.labels_file;
  return std::filesystem::path(CAP2SUM_ASSET_DIR) / "object_labels_v1.txt";
}

EncoderHandle make_encoder(const EncoderSettings& s) {
  if (s.name == "stub") return EncoderHandle::stub(s.embed_dim, s.seed, s.logit_scale);
  EncoderHandle h = EncoderHandle::from_text_table(s.text_table);
  if (h.embed_dim() != s.embed_dim)
    throw ValidationError("encoder.embed_dim", "text table has D = " + std::to_string(h.embed_dim()));
  return h;
}

}  // namespace cap2sum
