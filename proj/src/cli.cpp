// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <vector>

#include "CLI11.hpp"

#include "cap2sum/checkpoint.hpp"
#include "cap2sum/clip_prior.hpp"
#include "cap2sum/config.hpp"
#include "cap2sum/dataset_io.hpp"
#include "cap2sum/error.hpp"
#include "cap2sum/hashing.hpp"
#include "cap2sum/log.hpp"
#include "cap2sum/select_eval.hpp"
#include "cap2sum/synthetic.hpp"
#include "cap2sum/training.hpp"

namespace cap2sum {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json RunManifest::to_json() const {
  json hashes = json::object();
  for (const auto& [k, v] : checkpoint_hashes) hashes[k] = v;
  return {{"tool_version", CAP2SUM_VERSION},
          {"command", command},
          {"config", config},
          {"seed", seed},
          {"label_set_hash", label_set_hash},
          {"checkpoint_hashes", hashes},
          {"details", extra}};
}

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
};

struct Loaded {
  json tree;
  AppConfig cfg;
};

Loaded load(const Common& c) {
  Loaded l;
  std::optional<fs::path> file;
  if (!c.config_file.empty()) file = c.config_file;
  l.tree = load_config(file, c.overrides);
  l.cfg = AppConfig::from_json(l.tree);
  return l;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  write_json(dir / "manifest.json", m.to_json());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

FeatureStore open_store(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFoundError("feature directory not found: " + dir.string());
  if (!fs::exists(dir / "index.json"))
    throw NotFoundError("feature directory has no index.json: " + dir.string());
  return FeatureStore(dir);
}

std::vector<std::string> load_labels_checked(const AppConfig& cfg) {
  const fs::path path = resolve_labels_file(cfg);
  if (!fs::exists(path)) throw NotFoundError("labels file not found: " + path.string());
  return load_labels(path);
}

std::vector<DenseCaptionAnnotation> load_captions(const fs::path& path, const FeatureStore& store,
                                                  const fs::path& out_dir) {
  if (!fs::exists(path)) throw NotFoundError("captions file not found: " + path.string());
  const auto ids = store.video_ids();
  SidecarIngest ingest = ingest_caption_sidecar(path, ids);
  if (!ingest.orphans.empty()) {
    write_reconciliation_report(out_dir / "reconciliation.jsonl", ingest);
    log_warning(std::to_string(ingest.orphans.size()) +
                " caption ids have no features; see reconciliation.jsonl");
  }
  for (const auto& a : ingest.matched) validate(a);
  if (ingest.matched.empty()) throw ValidationError("captions", "no caption entry matches a feature id");
  return ingest.matched;
}

CaptionerConfig captioner_config(const AppConfig& cfg, Vocabulary vocab) {
  CaptionerConfig c = cfg.captioner;
  c.vocab = std::move(vocab);
  return c;
}

std::string hash_of(const fs::path& p) { return sha256_file(p); }

// ---------------------------------------------------------------------------

int cmd_config(const Common& common) {
  const Loaded l = load(common);
  std::cout << l.tree.dump(2) << '\n';
  return kExitOk;
}

int cmd_synth(const Common& common, const std::string& out) {
  const Loaded l = load(common);
  PriorConfig prior = l.cfg.prior;
  prior.labels = load_labels_checked(l.cfg);
  const EncoderHandle enc = make_encoder(l.cfg.encoder);
  const SyntheticDataset data = make_synthetic_dataset(l.cfg.synthetic, enc, prior);
  write_synthetic_dataset(out, data);
  RunManifest m{"synth", l.tree, l.cfg.synthetic.seed, label_set_hash(prior.labels), {}, {}};
  m.extra["videos"] = data.videos.size();
  write_manifest(out, m);
  log_info("wrote " + std::to_string(data.videos.size()) + " synthetic videos to " + out);
  return kExitOk;
}

int cmd_gen_prior(const Common& common, const std::string& features, const std::string& out) {
  const Loaded l = load(common);
  PriorConfig prior = l.cfg.prior;
  prior.labels = load_labels_checked(l.cfg);
  prior.validate();
  const FeatureStore store = open_store(features);
  const EncoderHandle enc = make_encoder(l.cfg.encoder);
  const Matrix prompts = encode_prompts(enc, prior);
  fs::create_directories(out);
  json index = json::object();
  for (const auto& id : store.video_ids()) {
    const FrameFeatures f = store.read(id);
    const ClipPrior p = generate_prior(f, prompts, prior);
    const std::string file = sanitize_file_stem(id) + ".prior";
    write_prior(fs::path(out) / file, p);
    index[id] = {{"file", file}, {"frames", f.frames()}, {"positives", p.prior.sum()}};
  }
  write_json(fs::path(out) / "priors.json", index);
  RunManifest m{"gen-prior", l.tree, l.cfg.train.seed, label_set_hash(prior.labels), {}, {}};
  m.extra = {{"tau", prior.tau},
             {"labels", prior.labels.size()},
             {"min_run_frames", prior.min_run_frames},
             {"max_run_fraction", prior.max_run_fraction},
             {"videos", store.video_ids().size()}};
  write_manifest(out, m);
  return kExitOk;
}

struct TrainArgs {
  std::string features;
  std::string captions;
  std::string priors;
  std::string summaries;
  std::string layout = "tvsum";
  std::string checkpoint;
  std::string out;
  std::string mode;
};

void run_and_save(Models& models, AppConfig& cfg, const std::vector<TrainingSample>& samples,
                  const fs::path& out, RunManifest& manifest) {
  Trainer trainer(models, cfg.train, cfg.loss, cfg.focal);
  const auto history = trainer.run(samples, [&](const StepReport& r) {
    if (cfg.train.checkpoint_every > 0 && r.step % cfg.train.checkpoint_every == 0) {
      const fs::path p = out / ("checkpoint_step" + std::to_string(r.step) + ".c2s");
      manifest.checkpoint_hashes[p.filename().string()] = save_checkpoint(p, models);
    }
  });
  write_history(out / "history.jsonl", history);
  manifest.checkpoint_hashes["checkpoint.c2s"] = save_checkpoint(out / "checkpoint.c2s", models);
  manifest.extra["steps"] = history.size();
  if (!history.empty()) manifest.extra["best_total"] = history.back().best_total;
}

int cmd_pretrain(const Common& common, const TrainArgs& a) {
  Loaded l = load(common);
  l.cfg.train.mode = TrainMode::pretrain;
  const fs::path out(a.out);
  fs::create_directories(out);
  const FeatureStore store = open_store(a.features);
  const auto captions = load_captions(a.captions, store, out);

  PriorConfig prior = l.cfg.prior;
  prior.labels = load_labels_checked(l.cfg);
  const EncoderHandle enc = make_encoder(l.cfg.encoder);
  const Matrix prompts = encode_prompts(enc, prior);
  const fs::path prior_dir = a.priors.empty() ? out / "priors" : fs::path(a.priors);

  RunManifest manifest{"pretrain", l.tree, l.cfg.train.seed, label_set_hash(prior.labels), {}, {}};
  std::optional<Models> models;
  if (!a.checkpoint.empty()) {
    models.emplace(load_checkpoint(a.checkpoint));
    if (!models->captioner) throw ValidationError("--checkpoint", "checkpoint has no captioner");
    manifest.checkpoint_hashes["init"] = hash_of(a.checkpoint);
  } else {
    models.emplace(l.cfg.summarizer, captioner_config(l.cfg, build_vocabulary(captions)),
                   l.cfg.train.seed);
  }

  std::vector<TrainingSample> samples;
  for (const auto& ann : captions) {
    TrainingSample s;
    s.features = store.read(ann.video_id);
    s.captions = ann;
    s.prior = load_or_generate_prior(prior_dir, s.features, prompts, prior);
    samples.push_back(std::move(s));
  }
  manifest.extra["videos"] = samples.size();
  run_and_save(*models, l.cfg, samples, out, manifest);
  write_manifest(out, manifest);
  return kExitOk;
}

int cmd_finetune(const Common& common, TrainArgs a, std::optional<double> split) {
  Loaded l = load(common);
  if (split) {
    l.tree["train"]["split_ratio"] = *split;
    l.cfg.train.split_ratio = *split;
    l.cfg.train.validate();
  }
  const TrainMode mode = parse_train_mode(a.mode);
  if (mode == TrainMode::pretrain) throw ValidationError("--mode", "must be sup or weak");
  l.cfg.train.mode = mode;
  const fs::path out(a.out);
  fs::create_directories(out);
  const FeatureStore store = open_store(a.features);

  RunManifest manifest{"finetune", l.tree, l.cfg.train.seed, "", {}, {{"mode", to_string(mode)}}};
  std::vector<TrainingSample> samples;
  std::optional<Models> models;

  if (mode == TrainMode::finetune_weak) {
    if (a.captions.empty())
      throw ValidationError("--captions", "caption sidecar required for --mode weak");
    const auto captions = load_captions(a.captions, store, out);
    if (!a.checkpoint.empty()) {
      models.emplace(load_checkpoint(a.checkpoint));
      if (!models->captioner) throw ValidationError("--checkpoint", "checkpoint has no captioner");
    } else {
      models.emplace(l.cfg.summarizer, captioner_config(l.cfg, build_vocabulary(captions)),
                     l.cfg.train.seed);
    }
    for (const auto& ann : captions) samples.push_back({store.read(ann.video_id), ann, {}, {}});
  } else {
    if (a.summaries.empty())
      throw ValidationError("--summaries", "ground-truth summaries required for --mode sup");
    if (!fs::is_directory(a.summaries))
      throw NotFoundError("summary directory not found: " + a.summaries);
    const auto gts =
        ingest_summary_dataset(a.summaries, parse_summary_layout(a.layout), l.cfg.default_fps);
    std::map<std::string, const GroundTruthSummary*> by_id;
    for (const auto& g : gts)
      if (store.contains(g.video_id)) by_id[g.video_id] = &g;
      else log_warning("summary " + g.video_id + " has no features; skipped");
    if (by_id.empty()) throw ValidationError("--summaries", "no summary matches a feature id");
    std::vector<std::string> ids;
    for (const auto& [id, _] : by_id) ids.push_back(id);
    auto [train_ids, held] = split_videos(ids, l.cfg.train.split_ratio, l.cfg.train.seed);
    write_json(out / "split.json", {{"train", train_ids}, {"held_out", held}});
    manifest.extra["train_videos"] = train_ids.size();
    manifest.extra["held_out_videos"] = held.size();
    if (!a.checkpoint.empty()) {
      models.emplace(load_checkpoint(a.checkpoint));
    } else {
      models.emplace(l.cfg.summarizer, std::nullopt, l.cfg.train.seed);
    }
    for (const auto& id : train_ids) samples.push_back({store.read(id), {}, {}, *by_id.at(id)});
  }
  if (!a.checkpoint.empty()) manifest.checkpoint_hashes["init"] = hash_of(a.checkpoint);
  run_and_save(*models, l.cfg, samples, out, manifest);
  write_manifest(out, manifest);
  return kExitOk;
}

int cmd_summarize(const Common& common, const std::string& checkpoint,
                  const std::string& features, const std::string& out_dir,
                  std::optional<double> budget, bool captions,
                  std::optional<double> threshold) {
  Loaded l = load(common);
  if (budget) l.tree["eval"]["budget_fraction"] = *budget;
  if (threshold) l.tree["captions"]["confidence_threshold"] = *threshold;
  l.cfg = AppConfig::from_json(l.tree);
  const fs::path out(out_dir);
  const Models models = load_checkpoint(checkpoint);
  if (captions && !models.captioner)
    throw ValidationError("--captions", "checkpoint has no captioner");
  const FeatureStore store = open_store(features);
  fs::create_directories(out);

  json index = json::object();
  json keyshots = json::object();
  json caption_dump = json::object();
  for (const auto& id : store.video_ids()) {
    const FrameFeatures f = store.read(id);
    const SummaryScores s = models.summarizer.summarize(f);
    const std::string file = sanitize_file_stem(id) + ".scores";
    write_scores(out / file, s);
    index[id] = file;

    const Index shot_len = std::max<Index>(1, std::llround(2.0 * f.fps));
    const auto bounds = uniform_shot_boundaries(f.frames(), shot_len);
    const auto shots = segment_shots(bounds, s.scores);
    const Index budget_n = budget_frames(f.frames(), l.cfg.budget_fraction);
    const auto selected = knapsack_select(shots, budget_n);
    json shot_list = json::array();
    for (const auto& sh : shots) shot_list.push_back({sh.start_frame, sh.end_frame});
    Index chosen = 0;
    for (const Index i : selected) chosen += shots[static_cast<std::size_t>(i)].length();
    keyshots[id] = {{"frames", f.frames()},
                    {"budget_frames", budget_n},
                    {"shots", shot_list},
                    {"selected", selected},
                    {"selected_frames", chosen}};

    if (captions) {
      const FeatureMatrix weighted = weight_features(f, s);
      const CaptionerOutput o = models.captioner->caption_forward(weighted);
      json list = json::array();
      for (const auto& d : decode_captions(o, l.cfg.confidence_threshold, f.duration_sec,
                                           models.captioner->config().vocab)) {
        list.push_back({{"start_sec", d.start_sec},
                        {"end_sec", d.end_sec},
                        {"sentence", d.sentence},
                        {"confidence", d.confidence}});
      }
      caption_dump[id] = list;
    }
  }
  write_json(out / "scores.json", index);
  write_json(out / "keyshots.json", keyshots);
  if (captions) write_json(out / "captions.json", caption_dump);
  RunManifest m{"summarize", l.tree, l.cfg.train.seed, "", {{"checkpoint", hash_of(checkpoint)}}, {}};
  m.extra = {{"videos", store.video_ids().size()}, {"budget_fraction", l.cfg.budget_fraction}};
  write_manifest(out, m);
  return kExitOk;
}

int cmd_evaluate(const Common& common, const std::string& scores_dir, const std::string& gt_dir,
                 const std::string& layout, std::optional<std::string> protocol,
                 std::optional<double> budget, const std::string& out) {
  Loaded l = load(common);
  if (protocol) l.tree["eval"]["protocol"] = *protocol;
  if (budget) l.tree["eval"]["budget_fraction"] = *budget;
  l.cfg = AppConfig::from_json(l.tree);
  if (!fs::is_directory(scores_dir))
    throw NotFoundError("scores directory not found: " + scores_dir);
  if (!fs::is_directory(gt_dir)) throw NotFoundError("ground-truth directory not found: " + gt_dir);

  std::vector<SummaryScores> scores;
  const fs::path index_path = fs::path(scores_dir) / "scores.json";
  if (fs::exists(index_path)) {
    const json index = read_json(index_path);
    for (auto it = index.begin(); it != index.end(); ++it)
      scores.push_back(read_scores(fs::path(scores_dir) / it.value().get<std::string>(), it.key()));
  } else {
    std::set<fs::path> files;
    for (const auto& e : fs::directory_iterator(scores_dir))
      if (e.is_regular_file() && e.path().extension() == ".scores") files.insert(e.path());
    for (const auto& p : files) scores.push_back(read_scores(p, p.stem().string()));
  }
  if (scores.empty()) throw NotFoundError("no score files in " + scores_dir);
  const auto gts = ingest_summary_dataset(gt_dir, parse_summary_layout(layout), l.cfg.default_fps);
  const EvaluationReport report =
      evaluate_dataset(scores, gts, l.cfg.protocol, l.cfg.budget_fraction);
  const json j = report.to_json();
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(out, j);
    RunManifest m{"evaluate", l.tree, l.cfg.train.seed, "", {}, {{"mean_f1", report.mean_f1}}};
    const fs::path parent = fs::path(out).parent_path();
    write_json((parent.empty() ? fs::path(".") : parent) / "manifest.json", m.to_json());
  }
  return kExitOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_file, "JSON config file (defaults apply to missing keys)");
  sub->add_option("--set", c.overrides, "Override a config key: section.key=value")
      ->take_all();
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"cap2sum: caption-supervised video summarization"};
  app.set_version_flag("--version", std::string(CAP2SUM_VERSION));
  app.require_subcommand(1);
  bool quiet = false;
  bool verbose = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");
  app.add_flag("-v,--verbose", verbose, "Print progress information");

  Common common;
  std::string out, features, checkpoint;
  TrainArgs ta;
  std::optional<double> budget, threshold, split, tau;
  std::optional<std::string> protocol;
  std::string labels, layout = "tvsum", scores_dir, gt_dir;
  bool captions_flag = false;

  auto* synth = app.add_subcommand("synth", "Write the synthetic fixture dataset");
  add_common(synth, common);
  synth->add_option("--out", out, "Output directory")->required();

  auto* gen = app.add_subcommand("gen-prior", "Compute object priors for a feature store");
  add_common(gen, common);
  gen->add_option("--features", features, "Feature store directory")->required();
  gen->add_option("--labels", labels, "Object label list (default: shipped asset)");
  gen->add_option("--tau", tau, "Similarity threshold (default 0.4)");
  gen->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "Caption-supervised pre-training");
  add_common(pre, common);
  pre->add_option("--features", ta.features, "Feature store directory")->required();
  pre->add_option("--captions", ta.captions, "Dense caption JSON")->required();
  pre->add_option("--priors", ta.priors, "Prior cache directory (default: <out>/priors)");
  pre->add_option("--checkpoint", ta.checkpoint, "Initial checkpoint");
  pre->add_option("--out", ta.out, "Output directory")->required();

  auto* fine = app.add_subcommand("finetune", "Supervised or caption-based fine-tuning");
  add_common(fine, common);
  fine->add_option("--mode", ta.mode, "sup | weak")->required();
  fine->add_option("--features", ta.features, "Feature store directory")->required();
  fine->add_option("--captions", ta.captions, "Caption sidecar (weak mode)");
  fine->add_option("--summaries", ta.summaries, "Summary dataset directory (sup mode)");
  fine->add_option("--layout", ta.layout, "Summary layout: tvsum | summe (default tvsum)");
  fine->add_option("--split", split, "Training fraction of videos (default 0.8)");
  fine->add_option("--checkpoint", ta.checkpoint, "Initial checkpoint");
  fine->add_option("--out", ta.out, "Output directory")->required();

  auto* summ = app.add_subcommand("summarize", "Score videos and select keyshots");
  add_common(summ, common);
  summ->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  summ->add_option("--features", features, "Feature store directory")->required();
  summ->add_option("--out", out, "Output directory")->required();
  summ->add_option("--budget", budget, "Summary length as a fraction of frames (default 0.15)");
  summ->add_flag("--captions", captions_flag, "Also decode dense captions");
  summ->add_option("--threshold", threshold, "Caption confidence threshold (default 0.5)");

  auto* eval = app.add_subcommand("evaluate", "F1 against annotator summaries");
  add_common(eval, common);
  eval->add_option("--scores", scores_dir, "Directory of score files")->required();
  eval->add_option("--gt", gt_dir, "Summary dataset directory")->required();
  eval->add_option("--layout", layout, "Summary layout: tvsum | summe (default tvsum)");
  eval->add_option("--protocol", protocol, "tvsum_avg | summe_max (default tvsum_avg)");
  eval->add_option("--budget", budget, "Summary length fraction (default 0.15)");
  eval->add_option("--out", out, "Report file (default: stdout)");

  auto* conf = app.add_subcommand("config", "Print the effective configuration");
  add_common(conf, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  set_log_level(quiet ? LogLevel::quiet : (verbose ? LogLevel::info : LogLevel::warning));
  try {
    if (*synth) return cmd_synth(common, out);
    if (*gen) {
      if (!labels.empty()) common.overrides.push_back("prior.labels_file=" + json(labels).dump());
      if (tau) common.overrides.push_back("prior.tau=" + json(*tau).dump());
      return cmd_gen_prior(common, features, out);
    }
    if (*pre) return cmd_pretrain(common, ta);
    if (*fine) return cmd_finetune(common, ta, split);
    if (*summ) return cmd_summarize(common, checkpoint, features, out, budget, captions_flag, threshold);
    if (*eval) return cmd_evaluate(common, scores_dir, gt_dir, layout, protocol, budget, out);
    if (*conf) return cmd_config(common);
  } catch (const NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace cap2sum
