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

#include <span>
#include <vector>

#include <Eigen/Core>

namespace artery {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Fraction of samples whose true label is this class.
  double weight = 0.0;
  long support = 0;
};

struct ClassificationScores {
  std::vector<ClassScores> per_class;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
};

/// Per-class precision/recall/F1 and the support-weighted F1. Classes with
/// precision + recall = 0 score F1 = 0; zero-support classes get weight 0.
ClassificationScores classification_scores(std::span<const int> preds, std::span<const int> labels,
                                           int num_classes);

double weighted_f1(std::span<const int> preds, std::span<const int> labels, int num_classes);

/// Entry (i, j) counts samples with true class i predicted as j.
Eigen::MatrixXd confusion_matrix(std::span<const int> preds, std::span<const int> labels, int num_classes,
                                 bool normalized);

/// Divides every row with nonzero sum by that sum.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& counts);

}  // namespace artery
