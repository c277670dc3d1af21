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

#include "artery/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace artery::ad {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

Tape& tape_of(const Tensor& a) {
  if (!a.valid()) throw std::invalid_argument("tensor is not attached to a tape");
  return *a.tape();
}

Tape& tape_of(const Tensor& a, const Tensor& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw std::invalid_argument("tensors live on different tapes");
  return t;
}

void check_sets(const char* op, const Neighborhoods& sets, Index rows_out, Index rows_in) {
  if (static_cast<Index>(sets.num_rows()) != rows_out)
    throw std::invalid_argument(std::string(op) + ": neighborhood row count mismatch");
  for (std::size_t idx : sets.indices)
    if (static_cast<Index>(idx) >= rows_in)
      throw std::invalid_argument(std::string(op) + ": neighborhood index out of range");
}

}  // namespace

const Matrix& Tensor::value() const { return tape_of(*this).value(id_); }
const Matrix& Tensor::grad() const { return tape_of(*this).grad(id_); }
bool Tensor::requires_grad() const { return tape_of(*this).requires_grad(id_); }

Tensor Tape::leaf(Matrix value, bool requires_grad) {
  if (!value.allFinite()) throw std::domain_error("leaf: non-finite value");
  nodes_.push_back(Node{std::move(value), {}, requires_grad, {}});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(const char* op, Matrix value, std::initializer_list<Tensor> inputs,
                    BackwardFn backward) {
  if (!value.allFinite()) throw std::domain_error(std::string(op) + ": non-finite result");
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape() != this) throw std::invalid_argument(std::string(op) + ": input from another tape");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
  return Tensor(this, nodes_.size() - 1);
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  if (!n.requires_grad) throw std::logic_error("tensor does not require grad");
  if (!backward_done_) throw std::logic_error("gradient requested before backward()");
  return n.grad;
}

void Tape::add_grad(const Tensor& t, const Matrix& g) {
  Node& n = nodes_.at(t.id());
  if (!n.requires_grad) return;
  n.grad.noalias() += g;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss is on another tape");
  if (backward_done_) throw std::logic_error("backward: already run on this tape; record a new pass");
  const Node& root = nodes_.at(loss.id());
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1, got " + shape(root.value));
  if (!root.requires_grad) throw std::logic_error("backward: loss does not depend on any parameter");

  for (auto& n : nodes_)
    if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  backward_done_ = true;
  nodes_[loss.id()].grad(0, 0) = 1.0;

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    // Callbacks only touch lower-index nodes and never append, so the
    // reference stays valid.
    n.backward(*this, n.grad);
  }
}

Neighborhoods Neighborhoods::from_lists(const std::vector<std::vector<std::size_t>>& lists) {
  Neighborhoods nb;
  nb.offsets.reserve(lists.size() + 1);
  for (const auto& l : lists) {
    std::vector<std::size_t> sorted = l;
    std::sort(sorted.begin(), sorted.end());
    nb.indices.insert(nb.indices.end(), sorted.begin(), sorted.end());
    nb.offsets.push_back(nb.indices.size());
  }
  return nb;
}

Neighborhoods Neighborhoods::from_adjacency(const Eigen::MatrixXi& adjacency, bool self_loops) {
  if (adjacency.rows() != adjacency.cols()) throw std::invalid_argument("adjacency must be square");
  Neighborhoods nb;
  for (Index i = 0; i < adjacency.rows(); ++i) {
    for (Index j = 0; j < adjacency.cols(); ++j)
      if ((i == j && self_loops) || (i != j && adjacency(i, j) != 0))
        nb.indices.push_back(static_cast<std::size_t>(j));
    nb.offsets.push_back(nb.indices.size());
  }
  return nb;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Matrix out(av.rows(), bv.cols());
  out.noalias() = av * bv;
  return t.record("matmul", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (a.requires_grad()) tape.add_grad(a, g * b.value().transpose());
    if (b.requires_grad()) tape.add_grad(b, a.value().transpose() * g);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("add", a.value(), b.value());
  return t.record("add", a.value() + b.value(), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.add_grad(a, g);
    tape.add_grad(b, g);
  });
}

Tensor add_row(const Tensor& a, const Tensor& b) {
  Tape& t = tape_of(a, b);
  if (b.rows() != 1 || b.cols() != a.cols()) shape_error("add_row", a.value(), b.value());
  Matrix out = a.value();
  out.rowwise() += b.value().row(0);
  return t.record("add_row", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    tape.add_grad(a, g);
    if (b.requires_grad()) tape.add_grad(b, g.colwise().sum());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a.value(), b.value());
  return t.record("mul", a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (a.requires_grad()) tape.add_grad(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) tape.add_grad(b, g.cwiseProduct(a.value()));
  });
}

Tensor scale(const Tensor& a, double s) {
  Tape& t = tape_of(a);
  return t.record("scale", a.value() * s, {a}, [a, s](Tape& tape, const Matrix& g) { tape.add_grad(a, g * s); });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  Tape& t = tape_of(a, s);
  if (s.rows() != 1 || s.cols() != 1) shape_error("scale_by", a.value(), s.value());
  return t.record("scale_by", a.value() * s.value()(0, 0), {a, s}, [a, s](Tape& tape, const Matrix& g) {
    if (a.requires_grad()) tape.add_grad(a, g * s.value()(0, 0));
    if (s.requires_grad()) tape.add_grad(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
  });
}

Tensor sum(const Tensor& a) {
  Tape& t = tape_of(a);
  return t.record("sum", Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Tape& tape, const Matrix& g) {
    tape.add_grad(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Tensor relu(const Tensor& a) { return leaky_relu(a, 0.0); }

Tensor leaky_relu(const Tensor& a, double slope) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return t.record(slope == 0.0 ? "relu" : "leaky_relu", std::move(out), {a},
                  [a, slope](Tape& tape, const Matrix& g) {
                    Matrix d = a.value().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
                    tape.add_grad(a, g.cwiseProduct(d));
                  });
}

Tensor exp(const Tensor& a) {
  Tape& t = tape_of(a);
  Matrix y = a.value().array().exp().matrix();
  return t.record("exp", y, {a}, [a, y](Tape& tape, const Matrix& g) { tape.add_grad(a, g.cwiseProduct(y)); });
}

Tensor log(const Tensor& a) {
  Tape& t = tape_of(a);
  if ((a.value().array() <= 0.0).any()) throw std::domain_error("log: non-positive input");
  return t.record("log", a.value().array().log().matrix(), {a}, [a](Tape& tape, const Matrix& g) {
    tape.add_grad(a, g.cwiseQuotient(a.value()));
  });
}

namespace {
Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}
}  // namespace

Tensor row_softmax(const Tensor& a) {
  Tape& t = tape_of(a);
  if (a.cols() == 0) throw std::invalid_argument("row_softmax: zero columns");
  Matrix y = softmax_rows(a.value());
  return t.record("row_softmax", y, {a}, [a, y](Tape& tape, const Matrix& g) {
    Matrix d(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      const double dotp = g.row(i).dot(y.row(i));
      d.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dotp).matrix());
    }
    tape.add_grad(a, d);
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tape& t = tape_of(a, b);
  if (a.rows() != b.rows()) shape_error("concat_cols", a.value(), b.value());
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return t.record("concat_cols", std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
    if (a.requires_grad()) tape.add_grad(a, g.leftCols(a.cols()));
    if (b.requires_grad()) tape.add_grad(b, g.rightCols(b.cols()));
  });
}

Tensor l2_normalize_rows(const Tensor& a) {
  constexpr double kFloor = 1e-12;
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Eigen::VectorXd norms(x.rows());
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    norms(i) = std::max(x.row(i).norm(), kFloor);
    y.row(i) = x.row(i) / norms(i);
  }
  return t.record("l2_normalize_rows", y, {a}, [a, y, norms](Tape& tape, const Matrix& g) {
    Matrix d(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      if (norms(i) > kFloor)
        d.row(i) = (g.row(i) - y.row(i) * g.row(i).dot(y.row(i))) / norms(i);
      else
        d.row(i) = g.row(i) / norms(i);
    }
    tape.add_grad(a, d);
  });
}

Tensor row_max_pool(const Tensor& x, const Neighborhoods& sets) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  const auto n = static_cast<Index>(sets.num_rows());
  check_sets("row_max_pool", sets, n, xv.rows());
  Matrix out = Matrix::Zero(n, xv.cols());
  // argmax[i * cols + c] = source row, or -1 for empty sets.
  std::vector<Index> argmax(static_cast<std::size_t>(n * xv.cols()), -1);
  for (Index i = 0; i < n; ++i) {
    const auto row = sets.row(static_cast<std::size_t>(i));
    if (row.empty()) continue;
    for (Index c = 0; c < xv.cols(); ++c) {
      Index best = static_cast<Index>(row[0]);
      for (std::size_t k = 1; k < row.size(); ++k) {
        const auto j = static_cast<Index>(row[k]);
        if (xv(j, c) > xv(best, c)) best = j;
      }
      out(i, c) = xv(best, c);
      argmax[static_cast<std::size_t>(i * xv.cols() + c)] = best;
    }
  }
  return t.record("row_max_pool", std::move(out), {x}, [x, argmax](Tape& tape, const Matrix& g) {
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    for (Index i = 0; i < g.rows(); ++i)
      for (Index c = 0; c < g.cols(); ++c) {
        const Index src = argmax[static_cast<std::size_t>(i * g.cols() + c)];
        if (src >= 0) d(src, c) += g(i, c);
      }
    tape.add_grad(x, d);
  });
}

Tensor row_sum_pool(const Tensor& x, const Neighborhoods& sets) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  const auto n = static_cast<Index>(sets.num_rows());
  check_sets("row_sum_pool", sets, n, xv.rows());
  Matrix out = Matrix::Zero(n, xv.cols());
  for (Index i = 0; i < n; ++i)
    for (std::size_t j : sets.row(static_cast<std::size_t>(i))) out.row(i) += xv.row(static_cast<Index>(j));
  // Neighborhoods is captured by value; callers commonly pass temporaries.
  return t.record("row_sum_pool", std::move(out), {x}, [x, sets](Tape& tape, const Matrix& g) {
    Matrix d = Matrix::Zero(x.rows(), x.cols());
    for (Index i = 0; i < g.rows(); ++i)
      for (std::size_t j : sets.row(static_cast<std::size_t>(i))) d.row(static_cast<Index>(j)) += g.row(i);
    tape.add_grad(x, d);
  });
}

Tensor weighted_sum_pool(const Tensor& x, const Neighborhoods& sets, const Tensor& weights) {
  Tape& t = tape_of(x, weights);
  const Matrix& xv = x.value();
  const Matrix& wv = weights.value();
  const auto n = static_cast<Index>(sets.num_rows());
  check_sets("weighted_sum_pool", sets, n, xv.rows());
  if (wv.rows() != static_cast<Index>(sets.num_entries()) || wv.cols() != 1)
    throw std::invalid_argument("weighted_sum_pool: weights must be E x 1");
  Matrix out = Matrix::Zero(n, xv.cols());
  for (Index i = 0; i < n; ++i)
    for (std::size_t k = sets.offsets[static_cast<std::size_t>(i)]; k < sets.offsets[static_cast<std::size_t>(i) + 1]; ++k)
      out.row(i) += wv(static_cast<Index>(k), 0) * xv.row(static_cast<Index>(sets.indices[k]));
  return t.record("weighted_sum_pool", std::move(out), {x, weights},
                  [x, weights, sets](Tape& tape, const Matrix& g) {
                    const Matrix& xv = x.value();
                    const Matrix& wv = weights.value();
                    Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
                    Matrix dw = Matrix::Zero(wv.rows(), 1);
                    for (Index i = 0; i < g.rows(); ++i)
                      for (std::size_t k = sets.offsets[static_cast<std::size_t>(i)];
                           k < sets.offsets[static_cast<std::size_t>(i) + 1]; ++k) {
                        const auto j = static_cast<Index>(sets.indices[k]);
                        const auto kk = static_cast<Index>(k);
                        dx.row(j) += wv(kk, 0) * g.row(i);
                        dw(kk, 0) = g.row(i).dot(xv.row(j));
                      }
                    if (x.requires_grad()) tape.add_grad(x, dx);
                    if (weights.requires_grad()) tape.add_grad(weights, dw);
                  });
}

Tensor edge_pair_sum(const Tensor& u, const Tensor& v, const Neighborhoods& sets) {
  Tape& t = tape_of(u, v);
  if (u.cols() != 1 || v.cols() != 1 || u.rows() != v.rows()) shape_error("edge_pair_sum", u.value(), v.value());
  const auto n = static_cast<Index>(sets.num_rows());
  check_sets("edge_pair_sum", sets, u.rows(), v.rows());
  Matrix out(static_cast<Index>(sets.num_entries()), 1);
  for (Index i = 0; i < n; ++i)
    for (std::size_t k = sets.offsets[static_cast<std::size_t>(i)]; k < sets.offsets[static_cast<std::size_t>(i) + 1]; ++k)
      out(static_cast<Index>(k), 0) = u.value()(i, 0) + v.value()(static_cast<Index>(sets.indices[k]), 0);
  return t.record("edge_pair_sum", std::move(out), {u, v}, [u, v, sets](Tape& tape, const Matrix& g) {
    Matrix du = Matrix::Zero(u.rows(), 1);
    Matrix dv = Matrix::Zero(v.rows(), 1);
    for (std::size_t i = 0; i < sets.num_rows(); ++i)
      for (std::size_t k = sets.offsets[i]; k < sets.offsets[i + 1]; ++k) {
        du(static_cast<Index>(i), 0) += g(static_cast<Index>(k), 0);
        dv(static_cast<Index>(sets.indices[k]), 0) += g(static_cast<Index>(k), 0);
      }
    tape.add_grad(u, du);
    tape.add_grad(v, dv);
  });
}

Tensor segment_softmax(const Tensor& e, const Neighborhoods& sets) {
  Tape& t = tape_of(e);
  if (e.cols() != 1 || e.rows() != static_cast<Index>(sets.num_entries()))
    throw std::invalid_argument("segment_softmax: input must be E x 1");
  const Matrix& ev = e.value();
  Matrix y(ev.rows(), 1);
  for (std::size_t i = 0; i < sets.num_rows(); ++i) {
    const auto lo = static_cast<Index>(sets.offsets[i]);
    const auto len = static_cast<Index>(sets.offsets[i + 1]) - lo;
    if (len == 0) continue;
    const double m = ev.block(lo, 0, len, 1).maxCoeff();
    y.block(lo, 0, len, 1) = (ev.block(lo, 0, len, 1).array() - m).exp().matrix();
    y.block(lo, 0, len, 1) /= y.block(lo, 0, len, 1).sum();
  }
  return t.record("segment_softmax", y, {e}, [e, y, sets](Tape& tape, const Matrix& g) {
    Matrix d(y.rows(), 1);
    for (std::size_t i = 0; i < sets.num_rows(); ++i) {
      const auto lo = static_cast<Index>(sets.offsets[i]);
      const auto len = static_cast<Index>(sets.offsets[i + 1]) - lo;
      if (len == 0) continue;
      const double dotp = g.block(lo, 0, len, 1).cwiseProduct(y.block(lo, 0, len, 1)).sum();
      d.block(lo, 0, len, 1) =
          y.block(lo, 0, len, 1).cwiseProduct((g.block(lo, 0, len, 1).array() - dotp).matrix());
    }
    tape.add_grad(e, d);
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels,
                             std::span<const std::size_t> rows) {
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  if (static_cast<Index>(labels.size()) != z.rows())
    throw std::invalid_argument("softmax_cross_entropy: one label per row required");
  std::vector<std::size_t> selected;
  if (rows.empty()) {
    selected.resize(labels.size());
    for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
  } else {
    selected.assign(rows.begin(), rows.end());
  }
  if (selected.empty()) throw std::invalid_argument("softmax_cross_entropy: empty selection");

  const Matrix p = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t r : selected) {
    const auto i = static_cast<Index>(r);
    if (i >= z.rows()) throw std::out_of_range("softmax_cross_entropy: row out of range");
    const int y = labels[r];
    if (y < 0 || y >= z.cols()) throw std::out_of_range("softmax_cross_entropy: label out of range");
    const double m = z.row(i).maxCoeff();
    const double lse = m + std::log((z.row(i).array() - m).exp().sum());
    loss += lse - z(i, y);
  }
  const double inv = 1.0 / static_cast<double>(selected.size());
  std::vector<int> label_copy(labels.begin(), labels.end());
  return t.record("softmax_cross_entropy", Matrix::Constant(1, 1, loss * inv), {logits},
                  [logits, p, selected, label_copy, inv](Tape& tape, const Matrix& g) {
                    Matrix d = Matrix::Zero(p.rows(), p.cols());
                    for (std::size_t r : selected) {
                      const auto i = static_cast<Index>(r);
                      d.row(i) = p.row(i) * inv;
                      d(i, label_copy[r]) -= inv;
                    }
                    tape.add_grad(logits, d * g(0, 0));
                  });
}

}  // namespace artery::ad
