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

// Dense 2-D tensors recorded on a reverse-mode tape.
//
// A Tape owns every value produced during one forward pass. Tensor is a
// cheap handle (tape pointer + node index). Nodes are appended in evaluation
// order, so reverse index order is a valid topological order for backward().
//
//   ad::Tape tape;
//   auto w = tape.leaf(w_value, /*requires_grad=*/true);
//   auto loss = ad::sum(ad::relu(ad::matmul(x, w)));
//   tape.backward(loss);
//   const auto& dw = w.grad();

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace artery::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  /// Gradient after Tape::backward(); zero for tensors off the loss path.
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the gradient of the node's output and accumulates into its
  /// inputs via add_grad().
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Matrix value, bool requires_grad = false);
  Tensor constant(Matrix value) { return leaf(std::move(value), false); }

  /// Records an op result. `op` names the op in error messages. A backward
  /// function is kept only when some input requires grad.
  Tensor record(const char* op, Matrix value, std::initializer_list<Tensor> inputs, BackwardFn backward);

  /// Reverse sweep from a 1x1 loss. May run once per tape.
  void backward(const Tensor& loss);

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Used by backward functions.
  void add_grad(const Tensor& t, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

/// CSR list of index sets, one per output row. Rows are sorted ascending.
struct Neighborhoods {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;

  std::size_t num_rows() const { return offsets.size() - 1; }
  std::size_t num_entries() const { return indices.size(); }
  std::span<const std::size_t> row(std::size_t i) const {
    return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }

  static Neighborhoods from_lists(const std::vector<std::vector<std::size_t>>& lists);
  /// Row i lists every j with adjacency(i, j) != 0, plus i itself when
  /// self_loops is set.
  static Neighborhoods from_adjacency(const Eigen::MatrixXi& adjacency, bool self_loops);
};

// Arithmetic. All inputs must live on the same tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// a (n x m) + row vector b (1 x m) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a * s where s is a 1x1 tensor.
Tensor scale_by(const Tensor& a, const Tensor& s);
Tensor sum(const Tensor& a);

// Elementwise nonlinearities. relu'(0) = 0.
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor row_softmax(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Rows divided by max(norm, 1e-12); zero rows stay zero.
Tensor l2_normalize_rows(const Tensor& a);

/// out[i] = elementwise max of x rows in sets.row(i); zero for empty sets.
/// Gradient ties go to the first (lowest) index.
Tensor row_max_pool(const Tensor& x, const Neighborhoods& sets);
/// out[i] = sum of x rows in sets.row(i).
Tensor row_sum_pool(const Tensor& x, const Neighborhoods& sets);
/// out[i] = sum_k w[k] x[sets.indices[k]] over k in row i; w is E x 1.
Tensor weighted_sum_pool(const Tensor& x, const Neighborhoods& sets, const Tensor& weights);
/// E x 1 with entry u[i] + v[j] for every (i, j) pair in sets, CSR order.
Tensor edge_pair_sum(const Tensor& u, const Tensor& v, const Neighborhoods& sets);
/// Softmax of an E x 1 edge vector within each row's entries.
Tensor segment_softmax(const Tensor& e, const Neighborhoods& sets);

/// Mean over selected rows of -log softmax(logits)[label]. `rows` empty
/// means all rows. Throws on an empty selection.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             std::span<const std::size_t> rows = {});

}  // namespace artery::ad
