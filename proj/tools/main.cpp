// Copyright 2026 The artery-graph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// artery: command-line driver.
//
//   artery generate --preset low-noise --seed 7 --out runs
//   artery build subject.json ... --out runs
//   artery train --corpus runs/<gen-run> --model sage --classes 13 --out runs
//   artery eval --checkpoint runs/<train-run>/checkpoint.json --corpus ... --out runs
//   artery cv --corpus runs/<gen-run> --model all --out runs --check
//   artery replay runs/<run>/manifest.json --out runs
//
// Flags override an optional config file (--config, INI/TOML with one
// section per subcommand), which overrides built-in defaults.
//
// Exit codes: 0 ok, 1 invalid input, 2 usage error, 3 --check failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "artery/centerline.hpp"
#include "artery/error.hpp"
#include "artery/graph_build.hpp"
#include "artery/models.hpp"
#include "artery/synth.hpp"
#include "artery/training.hpp"
#include "run_dir.hpp"

namespace {

using namespace artery;
using namespace artery::cli;
using json = nlohmann::ordered_json;

constexpr int kExitInvalid = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheck = 3;

struct GenerateOpts {
  std::string out = "out";
  std::uint64_t seed = 0;
  int subjects = 141;
  std::string preset = "default";
};

struct BuildOpts {
  std::vector<std::string> files;
  std::string out = "out";
  std::uint64_t seed = 0;
  double spacing = 0.0;  // 0: 10 voxels
  double merge_tol = kDefaultMergeToleranceMm;
};

struct LearnOpts {
  std::string corpus;
  std::string out = "out";
  std::string model = "sage";
  std::string classes = "13";
  int epochs = 500;
  int batch = 8;
  double lr = 1e-3;
  int folds = 5;
  int hidden = 64;
  int sage_sample = 0;
  int threads = 0;
  std::uint64_t seed = 0;
  bool check = false;
};

struct EvalOpts {
  std::string checkpoint;
  std::string corpus;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool check = false;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> learn_args(const std::string& cmd, const LearnOpts& o) {
  std::vector<std::string> a = {cmd, "--corpus", o.corpus, "--out", o.out, "--model", o.model, "--classes",
                                o.classes, "--epochs", std::to_string(o.epochs), "--batch", std::to_string(o.batch),
                                "--lr", num(o.lr), "--hidden", std::to_string(o.hidden), "--sage-sample",
                                std::to_string(o.sage_sample), "--seed", std::to_string(o.seed)};
  if (cmd == "cv") {
    a.insert(a.end(), {"--folds", std::to_string(o.folds), "--threads", std::to_string(o.threads)});
    if (o.check) a.push_back("--check");
  }
  return a;
}

json learn_config(const LearnOpts& o) {
  json j;
  j["corpus"] = o.corpus;
  j["model"] = o.model;
  j["classes"] = o.classes;
  j["epochs"] = o.epochs;
  j["batch"] = o.batch;
  j["lr"] = o.lr;
  j["folds"] = o.folds;
  j["hidden"] = o.hidden;
  j["sage_sample"] = o.sage_sample;
  j["threads"] = o.threads;
  j["seed"] = o.seed;
  j["check"] = o.check;
  return j;
}

struct LoadedCorpus {
  std::vector<fs::path> files;
  std::vector<Sample> samples;
};

LoadedCorpus load_corpus(const fs::path& root) {
  const fs::path dir = fs::is_directory(root / "subjects") ? root / "subjects" : root;
  if (!fs::is_directory(dir)) throw ValidationError("corpus directory not found: " + root.string());
  LoadedCorpus c;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".json" && name != "manifest.json" && name != "corpus.json")
      c.files.push_back(e.path());
  }
  std::sort(c.files.begin(), c.files.end());
  if (c.files.empty()) throw ValidationError("no subject files in " + dir.string());
  for (const auto& f : c.files) {
    const SubjectRecord s = load_subject(f.string());
    if (!s.has_labels()) throw ValidationError(f.string() + ": subject has no labels");
    c.samples.push_back({s.subject_id, build_segment_graph(prepare_subject(s))});
  }
  return c;
}

std::vector<nn::Variant> variants_of(const std::string& model) {
  if (model == "all") return {std::begin(nn::kAllVariants), std::end(nn::kAllVariants)};
  return {*nn::parse_variant(model)};
}

std::vector<int> modes_of(const std::string& classes) {
  if (classes == "both") return {kNumClasses11, kNumClasses13};
  return {std::stoi(classes)};
}

nn::ModelConfig model_config(const LearnOpts& o, nn::Variant v, int mode) {
  nn::ModelConfig mc;
  mc.variant = v;
  mc.hidden_dim = o.hidden;
  mc.num_classes = mode;
  mc.sage_sample_size = o.sage_sample;
  mc.seed = o.seed;
  return mc;
}

TrainConfig train_config(const LearnOpts& o, int mode) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.lr = o.lr;
  tc.folds = o.folds;
  tc.class_mode = mode;
  tc.seed = o.seed;
  tc.threads = o.threads;
  return tc;
}

int cmd_generate(const GenerateOpts& o) {
  GenParams p = o.preset == "low-noise" ? GenParams::low_noise()
                : o.preset == "minimal" ? GenParams::minimal()
                                        : GenParams::defaults();
  p.num_subjects = o.subjects;
  p.seed = o.seed;
  const Corpus corpus = generate_corpus(p);
  RunDir run(o.out, o.seed);
  for (const auto& g : corpus.subjects)
    run.write("subjects/" + g.subject.subject_id + ".json", serialize_subject(g.subject));
  run.write("corpus.json", corpus.manifest.dump(2) + "\n");
  json cfg;
  cfg["preset"] = o.preset;
  cfg["subjects"] = o.subjects;
  cfg["generator"] = to_json(p);
  run.finish("generate",
             {"generate", "--out", o.out, "--seed", std::to_string(o.seed), "--subjects", std::to_string(o.subjects),
              "--preset", o.preset},
             cfg, json{{"master", o.seed}});
  std::cout << run.path().string() << "\n";
  return 0;
}

int cmd_build(const BuildOpts& o) {
  RunDir run(o.out, o.seed);
  std::vector<std::string> args = {"build", "--out", o.out, "--seed", std::to_string(o.seed), "--spacing",
                                   num(o.spacing), "--merge-tol", num(o.merge_tol)};
  for (const auto& f : o.files) {
    run.add_input(f);
    const SubjectRecord s = load_subject(f);
    const auto spacing = o.spacing > 0 ? std::optional<double>(o.spacing) : std::nullopt;
    const SegmentGraph g = build_segment_graph(prepare_subject(s, spacing, o.merge_tol));
    run.write("graphs/" + s.subject_id + ".json", segment_graph_to_json(g).dump(2) + "\n");
    args.push_back(f);
  }
  json cfg;
  cfg["spacing_mm"] = o.spacing;
  cfg["merge_tol_mm"] = o.merge_tol;
  cfg["files"] = o.files;
  run.finish("build", args, cfg, json{{"master", o.seed}});
  std::cout << run.path().string() << "\n";
  return 0;
}

int cmd_train(const LearnOpts& o) {
  if (o.model == "all") throw CLI::ValidationError("--model", "train takes a single model");
  if (o.classes == "both") throw CLI::ValidationError("--classes", "train takes 11 or 13");
  const int mode = std::stoi(o.classes);
  const auto corpus = load_corpus(o.corpus);
  const auto samples = select_classes(corpus.samples, mode);
  const auto result =
      train(model_config(o, *nn::parse_variant(o.model), mode), train_config(o, mode), samples);

  RunDir run(o.out, o.seed);
  for (const auto& f : corpus.files) run.add_input(f);
  auto checkpoint = nn::checkpoint_to_json(result.model);
  auto& ids = checkpoint["train_subjects"] = json::array();
  for (const auto& s : samples) ids.push_back(s.subject_id);
  run.write("checkpoint.json", checkpoint.dump() + "\n");
  std::ostringstream trace;
  trace.precision(17);
  trace << "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e) trace << e << ',' << result.loss_trace[e] << '\n';
  run.write("loss_trace.csv", trace.str());
  run.finish("train", learn_args("train", o), learn_config(o), json{{"master", o.seed}});
  std::cout << run.path().string() << "\n";
  return 0;
}

int cmd_eval(const EvalOpts& o) {
  const nn::Model model = nn::load_checkpoint(o.checkpoint);
  std::set<std::string> trained_on;
  {
    std::ifstream in(o.checkpoint);
    const auto doc = json::parse(in);
    if (doc.contains("train_subjects"))
      for (const auto& id : doc["train_subjects"]) trained_on.insert(id.get<std::string>());
  }
  const int mode = model.config().num_classes;
  const auto corpus = load_corpus(o.corpus);
  const auto samples = select_classes(corpus.samples, mode);
  std::vector<int> preds, labels;
  for (const auto& s : samples) {
    const auto p = predict(model, s.graph);
    const auto l = label_indices(s.graph, mode);
    preds.insert(preds.end(), p.begin(), p.end());
    labels.insert(labels.end(), l.begin(), l.end());
  }
  const auto scores = classification_scores(preds, labels, mode);
  const auto counts = confusion_matrix(preds, labels, mode, false);
  const auto normalized = normalize_rows(counts);

  json metrics;
  metrics["model"] = nn::variant_name(model.config().variant);
  metrics["class_mode"] = mode;
  metrics["scores"] = scores_to_json(scores, mode);

  RunDir run(o.out, o.seed);
  run.add_input(o.checkpoint);
  for (const auto& f : corpus.files) run.add_input(f);
  run.write("metrics.json", metrics.dump(2) + "\n");
  run.write("confusion.csv", confusion_csv(counts, mode));
  run.write("confusion_normalized.csv", confusion_csv(normalized, mode));
  std::ostringstream report;
  report << "model " << nn::variant_label(model.config().variant) << ", " << mode << " classes, "
         << samples.size() << " subjects\n";
  report.precision(3);
  report << std::fixed << "weighted F1 " << scores.weighted_f1 << "\naccuracy    " << scores.accuracy << "\n";
  run.write("report.txt", report.str());
  std::vector<std::string> args = {"eval", "--checkpoint", o.checkpoint, "--corpus", o.corpus, "--out", o.out,
                                   "--seed", std::to_string(o.seed)};
  if (o.check) args.push_back("--check");
  json cfg;
  cfg["checkpoint"] = o.checkpoint;
  cfg["corpus"] = o.corpus;
  run.finish("eval", args, cfg, json{{"master", o.seed}});
  std::cout << report.str() << run.path().string() << "\n";

  if (o.check) {
    bool ok = true;
    double w = 0.0;
    for (const auto& c : scores.per_class) w += c.weight;
    if (std::abs(w - 1.0) > 1e-12 || scores.weighted_f1 < 0.0 || scores.weighted_f1 > 1.0) {
      std::cerr << "check failed: class weights or weighted F1 out of range\n";
      ok = false;
    }
    for (const auto& s : samples)
      if (trained_on.count(s.subject_id)) {
        std::cerr << "check failed: " << s.subject_id << " was in the training set\n";
        ok = false;
      }
    if (!ok) return kExitCheck;
  }
  return 0;
}

int cmd_cv(const LearnOpts& o) {
  const auto corpus = load_corpus(o.corpus);
  std::vector<CvResult> results;
  std::vector<std::string> violations;
  json all = json::array();
  std::map<int, std::vector<Sample>> by_mode;
  for (int mode : modes_of(o.classes)) by_mode[mode] = select_classes(corpus.samples, mode);

  for (nn::Variant v : variants_of(o.model)) {
    for (int mode : modes_of(o.classes)) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto& samples = by_mode[mode];
      CvResult r = run_cv(model_config(o, v, mode), train_config(o, mode), samples);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << nn::variant_label(v) << " " << mode << "-class: mean weighted F1 " << r.mean_weighted_f1
                << ", pooled " << r.pooled.weighted_f1 << " (" << secs << " s)\n";
      for (const auto& bad : check_invariants(r, samples))
        violations.push_back(std::string(nn::variant_name(v)) + "/" + std::to_string(mode) + ": " + bad);
      all.push_back(cv_result_to_json(r));
      results.push_back(std::move(r));
    }
  }

  RunDir run(o.out, o.seed);
  for (const auto& f : corpus.files) run.add_input(f);
  json metrics;
  metrics["results"] = std::move(all);
  run.write("metrics.json", metrics.dump(2) + "\n");
  for (const auto& r : results) {
    const std::string stem = "confusion_" + std::string(nn::variant_name(r.model_config.variant)) + "_" +
                             std::to_string(r.train_config.class_mode);
    run.write(stem + ".csv", confusion_csv(r.confusion, r.train_config.class_mode));
    run.write(stem + "_normalized.csv", confusion_csv(r.confusion_normalized, r.train_config.class_mode));
  }
  const std::string table = comparison_table(results);
  run.write("table.txt", table);
  run.write("table_pooled.txt", comparison_table(results, true));
  run.finish("cv", learn_args("cv", o), learn_config(o), json{{"master", o.seed}});
  std::cout << table << run.path().string() << "\n";

  if (o.check && !violations.empty()) {
    for (const auto& v : violations) std::cerr << "check failed: " << v << "\n";
    return kExitCheck;
  }
  return 0;
}

int run(std::vector<std::string> args);

int cmd_replay(const std::string& manifest_path, const std::string& out) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot read " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(manifest_path + ": malformed JSON: " + e.what());
  }
  if (!m.contains("args") || !m["args"].is_array()) throw ValidationError(manifest_path + ": no args recorded");
  auto args = m["args"].get<std::vector<std::string>>();
  if (!out.empty()) {
    const auto it = std::find(args.begin(), args.end(), "--out");
    if (it != args.end() && it + 1 != args.end()) *(it + 1) = out;
  }
  return run(args);
}

void add_learn_options(CLI::App* sub, LearnOpts& o, bool cv) {
  sub->add_option("--corpus", o.corpus, "Corpus directory (contains subjects/)")->required();
  sub->add_option("--out", o.out, "Output root")->capture_default_str();
  sub->add_option("--model", o.model, "gcn, gat, gin, sage" + std::string(cv ? " or all" : ""))
      ->check(CLI::IsMember(cv ? std::vector<std::string>{"gcn", "gat", "gin", "sage", "all"}
                               : std::vector<std::string>{"gcn", "gat", "gin", "sage"}))
      ->capture_default_str();
  sub->add_option("--classes", o.classes, "11 or 13" + std::string(cv ? " (or both)" : ""))
      ->check(CLI::IsMember(cv ? std::vector<std::string>{"11", "13", "both"}
                               : std::vector<std::string>{"11", "13"}))
      ->capture_default_str();
  sub->add_option("--epochs", o.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--batch", o.batch)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr", o.lr)->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--hidden", o.hidden)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--sage-sample", o.sage_sample, "Neighbors sampled per node for GraphSAGE (0 = all)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--seed", o.seed)->capture_default_str();
  if (cv) {
    sub->add_option("--folds", o.folds)->check(CLI::Range(2, 1000))->capture_default_str();
    sub->add_option("--threads", o.threads, "Folds trained concurrently (0 = all cores)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_flag("--check", o.check, "Exit 3 if a protocol invariant fails");
  }
}

int run(std::vector<std::string> args) {
  CLI::App app{"Coronary segment labeling with graph neural networks"};
  app.set_config("--config", "", "INI/TOML file with defaults per subcommand");
  app.require_subcommand(1);
  app.fallthrough();

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic labeled corpus");
  g->add_option("--out", gen.out)->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--subjects", gen.subjects)->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--preset", gen.preset)
      ->check(CLI::IsMember({"default", "low-noise", "minimal"}))
      ->capture_default_str();

  BuildOpts build;
  auto* b = app.add_subcommand("build", "Convert subject files to segment graphs");
  b->add_option("files", build.files, "Subject JSON files")->required()->check(CLI::ExistingFile);
  b->add_option("--out", build.out)->capture_default_str();
  b->add_option("--seed", build.seed, "Only names the run directory")->capture_default_str();
  b->add_option("--spacing", build.spacing, "Resample spacing in mm (0 = 10 voxels)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  b->add_option("--merge-tol", build.merge_tol, "Branch origin merge tolerance in mm")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  LearnOpts tr;
  auto* t = app.add_subcommand("train", "Train one model on a whole corpus");
  add_learn_options(t, tr, false);

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a corpus");
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--corpus", ev.corpus)->required();
  e->add_option("--out", ev.out)->capture_default_str();
  e->add_option("--seed", ev.seed, "Only names the run directory")->capture_default_str();
  e->add_flag("--check", ev.check);

  LearnOpts cv;
  cv.model = "all";
  cv.classes = "both";
  auto* c = app.add_subcommand("cv", "k-fold cross validation and model comparison");
  add_learn_options(c, cv, true);

  std::string manifest, replay_out;
  auto* r = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  r->add_option("manifest", manifest)->required()->check(CLI::ExistingFile);
  r->add_option("--out", replay_out, "Override the recorded output root");

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*b) return cmd_build(build);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*c) return cmd_cv(cv);
    if (*r) return cmd_replay(manifest, replay_out);
  } catch (const CLI::Error& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInvalid;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}
