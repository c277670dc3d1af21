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

#include "artery/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "artery/adam.hpp"
#include "artery/error.hpp"
#include "artery/rng.hpp"

namespace artery {

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kFoldStream = 3;

void check_class_mode(int mode) {
  if (mode != kNumClasses11 && mode != kNumClasses13)
    throw std::invalid_argument("class mode must be 11 or 13, got " + std::to_string(mode));
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and >= 0");
  if (folds < 2) throw std::invalid_argument("folds must be >= 2");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  check_class_mode(class_mode);
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["folds"] = cfg.folds;
  j["class_mode"] = cfg.class_mode;
  j["seed"] = cfg.seed;
  return j;
}

std::vector<std::vector<std::string>> kfold_split(std::span<const std::string> subject_ids, int k,
                                                  std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  const std::size_t n = subject_ids.size();
  if (static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("cannot split " + std::to_string(n) + " subjects into " + std::to_string(k) +
                                " folds");
  std::set<std::string> seen(subject_ids.begin(), subject_ids.end());
  if (seen.size() != n) throw std::invalid_argument("duplicate subject ids");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t at = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) folds[f].push_back(subject_ids[order[at++]]);
  }
  return folds;
}

std::vector<Sample> select_classes(std::vector<Sample> samples, int class_mode) {
  check_class_mode(class_mode);
  if (class_mode == kNumClasses13) return samples;
  for (auto& s : samples) {
    SegmentGraph& g = s.graph;
    if (!g.has_labels()) throw ValidationError("subject " + s.subject_id + " has no labels");
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
      if (!is_removed_in_11((*g.node_labels)[i])) keep.push_back(static_cast<Eigen::Index>(i));
    if (keep.empty()) throw ValidationError("subject " + s.subject_id + " has no nodes left in 11-class mode");
    if (keep.size() == g.num_nodes()) continue;

    const auto m = static_cast<Eigen::Index>(keep.size());
    SegmentGraph out;
    out.node_features.resize(m, g.node_features.cols());
    out.adjacency.resize(m, m);
    std::vector<SegmentClass> labels;
    for (Eigen::Index a = 0; a < m; ++a) {
      out.node_features.row(a) = g.node_features.row(keep[a]);
      out.node_ids.push_back(g.node_ids[keep[a]]);
      labels.push_back((*g.node_labels)[keep[a]]);
      for (Eigen::Index b = 0; b < m; ++b) out.adjacency(a, b) = g.adjacency(keep[a], keep[b]);
    }
    out.node_labels = std::move(labels);
    g = std::move(out);
  }
  return samples;
}

std::vector<int> label_indices(const SegmentGraph& g, int class_mode) {
  if (!g.has_labels()) throw ValidationError("graph has no labels");
  std::vector<int> out;
  out.reserve(g.num_nodes());
  for (SegmentClass c : *g.node_labels) {
    const auto idx = class_index(c, class_mode);
    if (!idx)
      throw ValidationError("class " + std::string(class_code(c)) + " is not part of the " +
                            std::to_string(class_mode) + "-class set");
    out.push_back(*idx);
  }
  return out;
}

TrainResult train(const nn::ModelConfig& model_cfg, const TrainConfig& train_cfg, std::span<const Sample> samples) {
  train_cfg.validate();
  if (model_cfg.num_classes != train_cfg.class_mode)
    throw std::invalid_argument("model num_classes does not match class mode");
  if (samples.empty()) throw std::invalid_argument("no training samples");

  std::vector<std::vector<int>> labels;
  for (const auto& s : samples) labels.push_back(label_indices(s.graph, train_cfg.class_mode));

  TrainResult result{nn::Model(model_cfg), {}};
  nn::Model& model = result.model;

  // Parameters that receive updates, in params() order.
  std::vector<std::size_t> learn_idx;
  {
    ad::Tape probe;
    const SegmentGraph* first[] = {&samples[0].graph};
    const auto fwd = model.forward(probe, nn::GraphInput::from_graphs(first), true);
    for (std::size_t i = 0; i < fwd.leaves.size(); ++i)
      if (fwd.leaves[i].requires_grad()) learn_idx.push_back(i);
  }
  std::vector<ad::Matrix*> learn_ptrs;
  for (std::size_t i : learn_idx) learn_ptrs.push_back(&model.params()[i].value);
  ad::AdamState adam(ad::AdamConfig{.lr = train_cfg.lr}, std::span<const ad::Matrix* const>(
                                                             const_cast<const ad::Matrix* const*>(learn_ptrs.data()),
                                                             learn_ptrs.size()));

  std::mt19937_64 shuffle_rng(mix_seed(train_cfg.seed, kShuffleStream));
  std::mt19937_64 sample_rng(mix_seed(train_cfg.seed, kSampleStream));
  const bool sample_sage =
      model_cfg.variant == nn::Variant::SAGE && model_cfg.sage_sample_size > 0;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = static_cast<std::size_t>(train_cfg.batch_size);

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      std::vector<const SegmentGraph*> graphs;
      std::vector<int> batch_labels;
      for (std::size_t k = start; k < stop; ++k) {
        graphs.push_back(&samples[order[k]].graph);
        const auto& l = labels[order[k]];
        batch_labels.insert(batch_labels.end(), l.begin(), l.end());
      }
      const auto input = nn::GraphInput::from_graphs(graphs);
      ad::Neighborhoods sampled;
      if (sample_sage)
        sampled = nn::sample_neighbors(input.neighbors, static_cast<std::size_t>(model_cfg.sage_sample_size),
                                       sample_rng);

      ad::Tape tape;
      double loss_value = 0.0;
      try {
        const auto fwd = model.forward(tape, input, true, sample_sage ? &sampled : nullptr);
        const auto loss = ad::softmax_cross_entropy(fwd.logits, batch_labels);
        loss_value = loss.value()(0, 0);
        if (!std::isfinite(loss_value)) throw std::domain_error("loss is not finite");
        tape.backward(loss);
        std::vector<ad::Matrix> grads;
        for (std::size_t i : learn_idx) grads.push_back(fwd.leaves[i].grad());
        ad::adam_step(learn_ptrs, grads, adam);
      } catch (const std::domain_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                 std::to_string(steps) + ": " + e.what());
      }
      loss_sum += loss_value;
      ++steps;
    }
    result.loss_trace.push_back(loss_sum / steps);
  }
  return result;
}

std::vector<int> predict(const nn::Model& model, const SegmentGraph& g) {
  const ad::Matrix logits = model.logits(g);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

CvResult run_cv(const nn::ModelConfig& model_cfg, const TrainConfig& train_cfg, std::span<const Sample> samples) {
  train_cfg.validate();
  std::vector<std::string> ids;
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ids.push_back(samples[i].subject_id);
    by_id[samples[i].subject_id] = i;
  }
  const auto split = kfold_split(ids, train_cfg.folds, train_cfg.seed);

  CvResult result;
  result.model_config = model_cfg;
  result.train_config = train_cfg;
  result.folds.resize(split.size());

  auto run_fold = [&](std::size_t f) {
    FoldResult& fr = result.folds[f];
    fr.fold = static_cast<int>(f);
    fr.test_ids = split[f];
    std::vector<Sample> train_set;
    for (std::size_t o = 0; o < split.size(); ++o) {
      if (o == f) continue;
      for (const auto& id : split[o]) {
        fr.train_ids.push_back(id);
        train_set.push_back(samples[by_id.at(id)]);
      }
    }
    nn::ModelConfig mc = model_cfg;
    mc.seed = mix_seed(model_cfg.seed, kFoldStream + f);
    TrainConfig tc = train_cfg;
    tc.seed = mix_seed(train_cfg.seed, kFoldStream + f);
    const TrainResult trained = train(mc, tc, train_set);
    fr.final_train_loss = trained.loss_trace.empty() ? 0.0 : trained.loss_trace.back();
    for (const auto& id : fr.test_ids) {
      const SegmentGraph& g = samples[by_id.at(id)].graph;
      const auto p = predict(trained.model, g);
      const auto l = label_indices(g, train_cfg.class_mode);
      fr.preds.insert(fr.preds.end(), p.begin(), p.end());
      fr.labels.insert(fr.labels.end(), l.begin(), l.end());
    }
    fr.scores = classification_scores(fr.preds, fr.labels, train_cfg.class_mode);
  };

  std::size_t workers = train_cfg.threads > 0 ? static_cast<std::size_t>(train_cfg.threads)
                                              : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, split.size());
  if (workers <= 1) {
    for (std::size_t f = 0; f < split.size(); ++f) run_fold(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(split.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t f = next++; f < split.size(); f = next++) {
          try {
            run_fold(f);
          } catch (...) {
            errors[f] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<int> all_preds, all_labels;
  double sum = 0.0;
  for (const auto& fr : result.folds) {
    sum += fr.scores.weighted_f1;
    all_preds.insert(all_preds.end(), fr.preds.begin(), fr.preds.end());
    all_labels.insert(all_labels.end(), fr.labels.begin(), fr.labels.end());
  }
  const double k = static_cast<double>(result.folds.size());
  result.mean_weighted_f1 = sum / k;
  double ss = 0.0;
  for (const auto& fr : result.folds) ss += std::pow(fr.scores.weighted_f1 - result.mean_weighted_f1, 2);
  result.std_weighted_f1 = k > 1 ? std::sqrt(ss / (k - 1)) : 0.0;
  result.pooled = classification_scores(all_preds, all_labels, train_cfg.class_mode);
  result.confusion = confusion_matrix(all_preds, all_labels, train_cfg.class_mode, false);
  result.confusion_normalized = normalize_rows(result.confusion);
  return result;
}

std::vector<std::string> check_invariants(const CvResult& result, std::span<const Sample> samples) {
  std::vector<std::string> bad;
  std::set<std::string> all;
  for (const auto& s : samples) all.insert(s.subject_id);

  std::set<std::string> covered;
  std::size_t total = 0;
  for (const auto& fr : result.folds) {
    const std::set<std::string> test(fr.test_ids.begin(), fr.test_ids.end());
    const std::set<std::string> train(fr.train_ids.begin(), fr.train_ids.end());
    for (const auto& id : test)
      if (train.count(id)) bad.push_back("fold " + std::to_string(fr.fold) + ": " + id + " in train and test");
    if (test.size() + train.size() != all.size())
      bad.push_back("fold " + std::to_string(fr.fold) + ": train + test does not cover every subject");
    covered.insert(test.begin(), test.end());
    total += fr.test_ids.size();
  }
  if (covered != all || total != all.size()) bad.push_back("test folds do not partition the subject set");

  auto check_scores = [&](const ClassificationScores& s, const std::string& what) {
    double w = 0.0;
    for (const auto& c : s.per_class) w += c.weight;
    if (std::abs(w - 1.0) > 1e-9) bad.push_back(what + ": class weights sum to " + std::to_string(w));
    if (!(s.weighted_f1 >= 0.0 && s.weighted_f1 <= 1.0))
      bad.push_back(what + ": weighted F1 outside [0, 1]");
  };
  for (const auto& fr : result.folds) check_scores(fr.scores, "fold " + std::to_string(fr.fold));
  check_scores(result.pooled, "pooled");

  for (Eigen::Index i = 0; i < result.confusion.rows(); ++i) {
    if (result.confusion.row(i).sum() == 0) continue;
    if (std::abs(result.confusion_normalized.row(i).sum() - 1.0) > 1e-9)
      bad.push_back("normalized confusion row " + std::to_string(i) + " does not sum to 1");
  }
  return bad;
}

nlohmann::ordered_json scores_to_json(const ClassificationScores& scores, int class_mode) {
  nlohmann::ordered_json j;
  j["weighted_f1"] = scores.weighted_f1;
  j["accuracy"] = scores.accuracy;
  auto per = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < scores.per_class.size(); ++c) {
    const auto& s = scores.per_class[c];
    nlohmann::ordered_json e;
    e["class"] = index_code(static_cast<int>(c), class_mode);
    e["precision"] = s.precision;
    e["recall"] = s.recall;
    e["f1"] = s.f1;
    e["weight"] = s.weight;
    e["support"] = s.support;
    per.push_back(std::move(e));
  }
  j["per_class"] = std::move(per);
  return j;
}

namespace {

nlohmann::ordered_json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::ordered_json cv_result_to_json(const CvResult& r) {
  const int mode = r.train_config.class_mode;
  nlohmann::ordered_json j;
  j["model"] = nn::variant_name(r.model_config.variant);
  j["class_mode"] = mode;
  j["model_config"] = nn::to_json(r.model_config);
  j["train_config"] = to_json(r.train_config);
  j["mean_weighted_f1"] = r.mean_weighted_f1;
  j["std_weighted_f1"] = r.std_weighted_f1;
  auto folds = nlohmann::ordered_json::array();
  for (const auto& fr : r.folds) {
    nlohmann::ordered_json f;
    f["fold"] = fr.fold;
    f["test_ids"] = fr.test_ids;
    f["train_size"] = fr.train_ids.size();
    f["final_train_loss"] = fr.final_train_loss;
    f["scores"] = scores_to_json(fr.scores, mode);
    folds.push_back(std::move(f));
  }
  j["folds"] = std::move(folds);
  j["pooled"] = scores_to_json(r.pooled, mode);
  nlohmann::ordered_json conf;
  auto labels = nlohmann::ordered_json::array();
  for (int c = 0; c < mode; ++c) labels.push_back(index_code(c, mode));
  conf["classes"] = std::move(labels);
  conf["counts"] = matrix_json(r.confusion);
  conf["normalized"] = matrix_json(r.confusion_normalized);
  j["confusion"] = std::move(conf);
  return j;
}

std::string confusion_csv(const Eigen::MatrixXd& m, int class_mode) {
  if (m.rows() != class_mode || m.cols() != class_mode)
    throw std::invalid_argument("confusion matrix shape does not match class mode");
  std::ostringstream os;
  os << std::setprecision(17) << "true\\pred";
  for (int c = 0; c < class_mode; ++c) os << ',' << index_code(c, class_mode);
  os << '\n';
  for (int i = 0; i < class_mode; ++i) {
    os << index_code(i, class_mode);
    for (int c = 0; c < class_mode; ++c) os << ',' << m(i, c);
    os << '\n';
  }
  return os.str();
}

std::string comparison_table(std::span<const CvResult> results, bool pooled) {
  std::vector<int> modes;
  for (int m : {kNumClasses11, kNumClasses13})
    for (const auto& r : results)
      if (r.train_config.class_mode == m) {
        modes.push_back(m);
        break;
      }
  auto find = [&](nn::Variant v, int mode) -> const CvResult* {
    for (const auto& r : results)
      if (r.model_config.variant == v && r.train_config.class_mode == mode) return &r;
    return nullptr;
  };

  std::ostringstream os;
  os << std::left << std::setw(14) << "Graph Model";
  for (int m : modes) os << std::setw(16) << ("F1-Score (" + std::to_string(m) + ")");
  os << '\n';
  for (nn::Variant v : nn::kAllVariants) {
    bool any = false;
    for (int m : modes) any = any || find(v, m);
    if (!any) continue;
    os << std::setw(14) << nn::variant_label(v);
    for (int m : modes) {
      const CvResult* r = find(v, m);
      std::ostringstream cell;
      if (r)
        cell << std::fixed << std::setprecision(3) << (pooled ? r->pooled.weighted_f1 : r->mean_weighted_f1);
      else
        cell << "-";
      os << std::setw(16) << cell.str();
    }
    os << '\n';
  }
  std::string text = os.str();
  // Drop trailing pad on each line.
  std::string out;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    out += line + '\n';
  }
  return out;
}

}  // namespace artery
