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

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "artery/graph_build.hpp"
#include "artery/metrics.hpp"
#include "artery/models.hpp"

namespace artery {

/// One labeled subject graph. graph.node_labels holds raw 13-class labels.
struct Sample {
  std::string subject_id;
  SegmentGraph graph;
};

struct TrainConfig {
  int epochs = 500;
  int batch_size = 8;
  double lr = 1e-3;
  int folds = 5;
  int class_mode = 13;
  std::uint64_t seed = 0;
  /// Folds trained concurrently by run_cv; 0 = hardware concurrency.
  int threads = 0;

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);

/// Shuffles ids with `seed` and cuts them into k contiguous folds whose
/// sizes differ by at most one (larger folds first).
std::vector<std::vector<std::string>> kfold_split(std::span<const std::string> subject_ids, int k,
                                                  std::uint64_t seed);

/// Mode 11 removes every L-PDA / L-PLB node and keeps the induced subgraph
/// on the survivors; mode 13 returns the input unchanged.
std::vector<Sample> select_classes(std::vector<Sample> samples, int class_mode);

/// Label indices of a sample's nodes in the given class mode.
std::vector<int> label_indices(const SegmentGraph& g, int class_mode);

struct TrainResult {
  nn::Model model;
  /// Mean training loss of each epoch.
  std::vector<double> loss_trace;
};

/// Adam on mean node cross-entropy over block-diagonal batches of
/// `batch_size` subjects, reshuffled every epoch.
TrainResult train(const nn::ModelConfig& model_cfg, const TrainConfig& train_cfg, std::span<const Sample> samples);

/// Argmax class per node (ties to the lowest index).
std::vector<int> predict(const nn::Model& model, const SegmentGraph& g);

struct FoldResult {
  int fold = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<int> preds;
  std::vector<int> labels;
  ClassificationScores scores;
  double final_train_loss = 0.0;
};

/// One CV run of one variant in one class mode.
struct CvResult {
  nn::ModelConfig model_config;
  TrainConfig train_config;
  std::vector<FoldResult> folds;
  double mean_weighted_f1 = 0.0;
  double std_weighted_f1 = 0.0;
  /// Metrics over out-of-fold predictions pooled across folds.
  ClassificationScores pooled;
  Eigen::MatrixXd confusion;
  Eigen::MatrixXd confusion_normalized;
};

/// k-fold cross validation. `samples` must already be class-selected for
/// train_cfg.class_mode.
CvResult run_cv(const nn::ModelConfig& model_cfg, const TrainConfig& train_cfg, std::span<const Sample> samples);

/// Violated invariants (empty when all hold): folds partition the subject
/// set, no test subject in its own training set, weights sum to 1,
/// weighted F1 in [0, 1], normalized confusion rows sum to 1.
std::vector<std::string> check_invariants(const CvResult& result, std::span<const Sample> samples);

nlohmann::ordered_json scores_to_json(const ClassificationScores& scores, int class_mode);
nlohmann::ordered_json cv_result_to_json(const CvResult& result);

/// CSV with a header row and one row per true class, columns = predicted class.
std::string confusion_csv(const Eigen::MatrixXd& m, int class_mode);

/// Aligned text table: one row per variant, one F1 column per class mode.
std::string comparison_table(std::span<const CvResult> results, bool pooled = false);

}  // namespace artery
