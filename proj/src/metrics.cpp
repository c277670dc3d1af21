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

#include "artery/metrics.hpp"

#include <stdexcept>
#include <string>

namespace artery {

namespace {
void check_inputs(std::span<const int> preds, std::span<const int> labels, int num_classes) {
  if (labels.empty()) throw std::invalid_argument("metrics: empty input");
  if (preds.size() != labels.size()) throw std::invalid_argument("metrics: preds and labels differ in length");
  if (num_classes <= 0) throw std::invalid_argument("metrics: num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= num_classes || preds[i] < 0 || preds[i] >= num_classes)
      throw std::out_of_range("metrics: class index out of range at position " + std::to_string(i));
}
}  // namespace

Eigen::MatrixXd confusion_matrix(std::span<const int> preds, std::span<const int> labels, int num_classes,
                                 bool normalized) {
  check_inputs(preds, labels, num_classes);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) m(labels[i], preds[i]) += 1.0;
  return normalized ? normalize_rows(m) : m;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& counts) {
  Eigen::MatrixXd m = counts;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double s = m.row(r).sum();
    if (s > 0.0) m.row(r) /= s;
  }
  return m;
}

ClassificationScores classification_scores(std::span<const int> preds, std::span<const int> labels,
                                           int num_classes) {
  const Eigen::MatrixXd cm = confusion_matrix(preds, labels, num_classes, false);
  const double total = static_cast<double>(labels.size());
  ClassificationScores out;
  out.per_class.resize(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const double tp = cm(c, c);
    const double predicted = cm.col(c).sum();
    const double actual = cm.row(c).sum();
    ClassScores& s = out.per_class[static_cast<std::size_t>(c)];
    s.support = static_cast<long>(actual);
    s.precision = predicted > 0.0 ? tp / predicted : 0.0;
    s.recall = actual > 0.0 ? tp / actual : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    s.weight = actual / total;
    out.weighted_f1 += s.f1 * s.weight;
  }
  out.accuracy = cm.trace() / total;
  return out;
}

double weighted_f1(std::span<const int> preds, std::span<const int> labels, int num_classes) {
  return classification_scores(preds, labels, num_classes).weighted_f1;
}

}  // namespace artery
