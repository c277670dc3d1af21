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

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "artery/adam.hpp"
#include "artery/autodiff.hpp"
#include "gradcheck.hpp"

using namespace artery;
using ad::Matrix;
using ad::Tensor;

namespace {

// Naive row-major matrix for the scalar-loop oracle.
struct Naive {
  int r = 0, c = 0;
  std::vector<double> v;
  double& at(int i, int j) { return v[static_cast<std::size_t>(i * c + j)]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i * c + j)]; }
};

Naive naive(const Matrix& m) {
  Naive n{static_cast<int>(m.rows()), static_cast<int>(m.cols()), {}};
  for (int i = 0; i < n.r; ++i)
    for (int j = 0; j < n.c; ++j) n.v.push_back(m(i, j));
  return n;
}

Naive blank(int r, int c) { return {r, c, std::vector<double>(static_cast<std::size_t>(r * c), 0.0)}; }

double max_abs(const Naive& n) {
  double m = 0.0;
  for (double x : n.v) m = std::max(m, std::abs(x));
  return m;
}

bool all_positive(const Naive& n) {
  for (double x : n.v)
    if (!(x > 0.0)) return false;
  return true;
}

std::vector<std::vector<std::size_t>> random_sets(std::mt19937_64& rng, int rows, int source_rows) {
  std::vector<std::vector<std::size_t>> sets(static_cast<std::size_t>(rows));
  for (auto& s : sets)
    for (int j = 0; j < source_rows; ++j)
      if (rng() % 2) s.push_back(static_cast<std::size_t>(j));
  return sets;
}

bool close(const Matrix& got, const Naive& want, double tol = 1e-12) {
  if (got.rows() != want.r || got.cols() != want.c) return false;
  for (int i = 0; i < want.r; ++i)
    for (int j = 0; j < want.c; ++j)
      if (std::abs(got(i, j) - want.at(i, j)) > tol * std::max(1.0, std::abs(want.at(i, j)))) return false;
  return true;
}

}  // namespace

TEST_CASE("identity matmul and uniform softmax") {
  std::mt19937_64 rng(1);
  ad::Tape t;
  const Matrix a = test::random_matrix(rng, 3, 4);
  CHECK(ad::matmul(t.constant(Matrix::Identity(3, 3)), t.constant(a)).value() == a);
  const auto s = ad::row_softmax(t.constant(Matrix::Constant(1, 4, 3.0))).value();
  for (int j = 0; j < 4; ++j) CHECK(s(0, j) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("row softmax sums to one and ignores row shifts") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    ad::Tape t;
    const Matrix a = test::random_matrix(rng, 5, 7, 3.0);
    Matrix shifted = a;
    for (int i = 0; i < 5; ++i) shifted.row(i).array() += 100.0 * (i - 2);
    const Matrix s = ad::row_softmax(t.constant(a)).value();
    const Matrix s2 = ad::row_softmax(t.constant(shifted)).value();
    for (int i = 0; i < 5; ++i) CHECK(std::abs(s.row(i).sum() - 1.0) < 1e-12);
    CHECK((s - s2).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("500 random op compositions match scalar loops") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int trial = 0; trial < 500; ++trial) {
    ad::Tape tape;
    const int r0 = dim(rng), c0 = dim(rng);
    Matrix x0 = test::random_matrix(rng, r0, c0);
    Tensor x = tape.constant(x0);
    Naive n = naive(x0);
    const int steps = 2 + static_cast<int>(rng() % 5);
    for (int s = 0; s < steps; ++s) {
      const int op = static_cast<int>(rng() % 16);
      Naive out;
      switch (op) {
        case 0: {  // matmul
          const int k = dim(rng);
          const Matrix w = test::random_matrix(rng, n.c, k);
          const Naive nw = naive(w);
          out = blank(n.r, k);
          for (int i = 0; i < n.r; ++i)
            for (int j = 0; j < k; ++j)
              for (int l = 0; l < n.c; ++l) out.at(i, j) += n.at(i, l) * nw.at(l, j);
          x = ad::matmul(x, tape.constant(w));
          break;
        }
        case 1: {  // add
          const Matrix b = test::random_matrix(rng, n.r, n.c);
          out = n;
          for (int i = 0; i < n.r; ++i)
            for (int j = 0; j < n.c; ++j) out.at(i, j) += b(i, j);
          x = ad::add(x, tape.constant(b));
          break;
        }
        case 2: {  // add_row
          const Matrix b = test::random_matrix(rng, 1, n.c);
          out = n;
          for (int i = 0; i < n.r; ++i)
            for (int j = 0; j < n.c; ++j) out.at(i, j) += b(0, j);
          x = ad::add_row(x, tape.constant(b));
          break;
        }
        case 3: {  // mul
          const Matrix b = test::random_matrix(rng, n.r, n.c);
          out = n;
          for (int i = 0; i < n.r; ++i)
            for (int j = 0; j < n.c; ++j) out.at(i, j) *= b(i, j);
          x = ad::mul(x, tape.constant(b));
          break;
        }
        case 4:  // relu
          out = n;
          for (double& v : out.v) v = v > 0 ? v : 0.0;
          x = ad::relu(x);
          break;
        case 5:  // leaky_relu
          out = n;
          for (double& v : out.v) v = v > 0 ? v : 0.2 * v;
          x = ad::leaky_relu(x, 0.2);
          break;
        case 6:  // exp
          if (max_abs(n) > 30) continue;
          out = n;
          for (double& v : out.v) v = std::exp(v);
          x = ad::exp(x);
          break;
        case 7:  // log
          if (!all_positive(n)) continue;
          out = n;
          for (double& v : out.v) v = std::log(v);
          x = ad::log(x);
          break;
        case 8: {  // row_softmax
          out = n;
          for (int i = 0; i < n.r; ++i) {
            double m = -1e300, z = 0.0;
            for (int j = 0; j < n.c; ++j) m = std::max(m, n.at(i, j));
            for (int j = 0; j < n.c; ++j) z += std::exp(n.at(i, j) - m);
            for (int j = 0; j < n.c; ++j) out.at(i, j) = std::exp(n.at(i, j) - m) / z;
          }
          x = ad::row_softmax(x);
          break;
        }
        case 9: {  // concat_cols
          const int k = dim(rng);
          const Matrix b = test::random_matrix(rng, n.r, k);
          out = blank(n.r, n.c + k);
          for (int i = 0; i < n.r; ++i) {
            for (int j = 0; j < n.c; ++j) out.at(i, j) = n.at(i, j);
            for (int j = 0; j < k; ++j) out.at(i, n.c + j) = b(i, j);
          }
          x = ad::concat_cols(x, tape.constant(b));
          break;
        }
        case 10: {  // l2_normalize_rows
          out = n;
          for (int i = 0; i < n.r; ++i) {
            double ss = 0.0;
            for (int j = 0; j < n.c; ++j) ss += n.at(i, j) * n.at(i, j);
            const double d = std::max(std::sqrt(ss), 1e-12);
            for (int j = 0; j < n.c; ++j) out.at(i, j) = n.at(i, j) / d;
          }
          x = ad::l2_normalize_rows(x);
          break;
        }
        case 11:
        case 12: {  // row_max_pool / row_sum_pool
          const int rows = dim(rng);
          const auto lists = random_sets(rng, rows, n.r);
          out = blank(rows, n.c);
          for (int i = 0; i < rows; ++i)
            for (int j = 0; j < n.c; ++j) {
              const auto& l = lists[static_cast<std::size_t>(i)];
              double acc = op == 11 ? (l.empty() ? 0.0 : -1e300) : 0.0;
              for (std::size_t src : l)
                acc = op == 11 ? std::max(acc, n.at(static_cast<int>(src), j)) : acc + n.at(static_cast<int>(src), j);
              out.at(i, j) = acc;
            }
          const auto sets = ad::Neighborhoods::from_lists(lists);
          x = op == 11 ? ad::row_max_pool(x, sets) : ad::row_sum_pool(x, sets);
          break;
        }
        case 13: {  // weighted_sum_pool
          const int rows = dim(rng);
          const auto lists = random_sets(rng, rows, n.r);
          const auto sets = ad::Neighborhoods::from_lists(lists);
          const Matrix w = test::random_matrix(rng, static_cast<ad::Index>(sets.num_entries()), 1);
          out = blank(rows, n.c);
          for (int i = 0; i < rows; ++i) {
            const auto row = sets.row(static_cast<std::size_t>(i));
            for (std::size_t e = 0; e < row.size(); ++e)
              for (int j = 0; j < n.c; ++j)
                out.at(i, j) += w(static_cast<ad::Index>(sets.offsets[i] + e), 0) * n.at(static_cast<int>(row[e]), j);
          }
          x = ad::weighted_sum_pool(x, sets, tape.constant(w));
          break;
        }
        case 14: {  // scale
          const double k = std::normal_distribution<double>(0, 2)(rng);
          out = n;
          for (double& v : out.v) v *= k;
          x = ad::scale(x, k);
          break;
        }
        case 15: {  // edge_pair_sum then segment_softmax, on column 0
          if (n.c != 1) continue;
          const auto lists = random_sets(rng, n.r, n.r);
          const auto sets = ad::Neighborhoods::from_lists(lists);
          const Matrix v = test::random_matrix(rng, n.r, 1);
          Naive e = blank(static_cast<int>(sets.num_entries()), 1);
          for (std::size_t i = 0; i < sets.num_rows(); ++i) {
            const auto row = sets.row(i);
            double m = -1e300, z = 0.0;
            for (std::size_t k = 0; k < row.size(); ++k) {
              const double val = n.at(static_cast<int>(i), 0) + v(static_cast<ad::Index>(row[k]), 0);
              e.at(static_cast<int>(sets.offsets[i] + k), 0) = val;
              m = std::max(m, val);
            }
            for (std::size_t k = 0; k < row.size(); ++k) z += std::exp(e.at(static_cast<int>(sets.offsets[i] + k), 0) - m);
            for (std::size_t k = 0; k < row.size(); ++k) {
              double& val = e.at(static_cast<int>(sets.offsets[i] + k), 0);
              val = std::exp(val - m) / z;
            }
          }
          if (e.r == 0) continue;
          out = e;
          x = ad::segment_softmax(ad::edge_pair_sum(x, tape.constant(v), sets), sets);
          break;
        }
      }
      n = out;
      REQUIRE_MESSAGE(close(x.value(), n), "trial " << trial << " op " << op);
    }
  }
}

TEST_CASE("backward basics") {
  ad::Tape t;
  auto w = t.leaf(Matrix::Constant(2, 2, 0.5), true);
  auto unused = t.leaf(Matrix::Constant(1, 3, 1.0), true);
  auto loss = ad::sum(w);
  t.backward(loss);
  CHECK(w.grad() == Matrix::Ones(2, 2));
  CHECK(unused.grad() == Matrix::Zero(1, 3));
  CHECK_THROWS_AS(t.backward(loss), std::logic_error);

  ad::Tape t2;
  Matrix wv(2, 2);
  wv << -1, 2, 0, -3;
  auto w2 = t2.leaf(wv, true);
  t2.backward(ad::sum(ad::relu(w2)));
  Matrix expect(2, 2);
  expect << 0, 1, 0, 0;
  CHECK(w2.grad() == expect);
}

TEST_CASE("backward errors") {
  ad::Tape t;
  auto w = t.leaf(Matrix::Ones(2, 2), true);
  CHECK_THROWS_AS(w.grad(), std::logic_error);
  CHECK_THROWS_AS(t.backward(ad::relu(w)), std::invalid_argument);
  auto c = t.constant(Matrix::Ones(1, 1));
  CHECK_THROWS_AS(t.backward(c), std::logic_error);
  CHECK_THROWS_AS(ad::matmul(w, t.constant(Matrix::Ones(3, 1))), std::invalid_argument);
}

TEST_CASE("non-finite results are rejected") {
  ad::Tape t;
  CHECK_THROWS_AS(ad::log(t.constant(Matrix::Zero(1, 1))), std::domain_error);
  CHECK_THROWS_AS(ad::exp(t.constant(Matrix::Constant(1, 1, 1000.0))), std::domain_error);
  Matrix bad = Matrix::Zero(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(t.leaf(bad), std::domain_error);
}

TEST_CASE("max pool routes ties to the lowest index") {
  ad::Tape t;
  auto x = t.leaf(Matrix::Constant(3, 1, 2.0), true);
  const auto sets = ad::Neighborhoods::from_lists({{0, 1, 2}, {}});
  auto y = ad::row_max_pool(x, sets);
  CHECK(y.value()(1, 0) == 0.0);
  t.backward(ad::sum(y));
  CHECK(x.grad()(0, 0) == 1.0);
  CHECK(x.grad()(1, 0) == 0.0);
  CHECK(x.grad()(2, 0) == 0.0);
}

TEST_CASE("finite differences for every op") {
  using V = std::vector<Tensor>;
  std::mt19937_64 rng(9);
  const auto sets = ad::Neighborhoods::from_lists({{0, 2}, {1}, {0, 1, 2, 3}, {}, {3}});
  const auto self = ad::Neighborhoods::from_lists({{0, 2}, {1}, {0, 1, 2, 3}, {3}});
  const std::vector<std::pair<const char*, test::LossBuilder>> cases = {
      {"matmul", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::matmul(v[0], v[1]), 1); }},
      {"add", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::add(v[0], v[2]), 2); }},
      {"add_row", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::add_row(v[0], v[3]), 3); }},
      {"mul", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::mul(v[0], v[2]), 4); }},
      {"scale_by", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::scale_by(v[0], v[4]), 5); }},
      {"relu", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::relu(v[0]), 6); }},
      {"leaky", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::leaky_relu(v[0], 0.2), 7); }},
      {"exp", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::exp(v[0]), 8); }},
      {"log", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::log(ad::exp(v[0])), 9); }},
      {"softmax", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::row_softmax(v[0]), 10); }},
      {"concat", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::concat_cols(v[0], v[2]), 11); }},
      {"l2norm", [](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::l2_normalize_rows(v[0]), 12); }},
      {"maxpool", [&](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::row_max_pool(v[0], sets), 13); }},
      {"sumpool", [&](ad::Tape& t, const V& v) { return test::probe_loss(t, ad::row_sum_pool(v[0], sets), 14); }},
      {"wsum",
       [&](ad::Tape& t, const V& v) {
         return test::probe_loss(t, ad::weighted_sum_pool(v[0], self, v[5]), 15);
       }},
      {"attention",
       [&](ad::Tape& t, const V& v) {
         auto u = ad::matmul(v[0], v[6]);
         auto e = ad::leaky_relu(ad::edge_pair_sum(u, ad::matmul(v[0], v[7]), self), 0.2);
         return test::probe_loss(t, ad::segment_softmax(e, self), 16);
       }},
      {"xent",
       [](ad::Tape&, const V& v) {
         const std::vector<int> labels = {0, 2, 1, 2};
         return ad::softmax_cross_entropy(v[0], labels);
       }},
  };
  for (int seed = 0; seed < 20; ++seed) {
    std::vector<Matrix> in = {test::random_matrix(rng, 4, 3), test::random_matrix(rng, 3, 2),
                              test::random_matrix(rng, 4, 3), test::random_matrix(rng, 1, 3),
                              test::random_matrix(rng, 1, 1), test::random_matrix(rng, 8, 1),
                              test::random_matrix(rng, 3, 1), test::random_matrix(rng, 3, 1)};
    for (const auto& [name, f] : cases) CHECK_MESSAGE(test::gradcheck(f, in) < 1e-4, std::string(name) << " seed " << seed);
  }
}

TEST_CASE("cross entropy values and gradient identity") {
  ad::Tape t;
  const std::vector<int> labels = {4};
  CHECK(ad::softmax_cross_entropy(t.constant(Matrix::Zero(1, 13)), labels).value()(0, 0) ==
        doctest::Approx(std::log(13.0)).epsilon(1e-15));
  Matrix sat = Matrix::Zero(1, 13);
  sat(0, 4) = 1000.0;
  CHECK(ad::softmax_cross_entropy(t.constant(sat), labels).value()(0, 0) < 1e-9);

  std::mt19937_64 rng(12);
  const Matrix z = test::random_matrix(rng, 6, 5, 2.0);
  const std::vector<int> y = {0, 4, 2, 2, 1, 3};
  const std::vector<std::size_t> rows = {1, 3, 4};
  ad::Tape t2;
  auto logits = t2.leaf(z, true);
  t2.backward(ad::softmax_cross_entropy(logits, y, rows));
  Matrix expect = Matrix::Zero(6, 5);
  for (std::size_t r : rows) {
    const auto i = static_cast<ad::Index>(r);
    const double m = z.row(i).maxCoeff();
    const Eigen::RowVectorXd p = (z.row(i).array() - m).exp().matrix();
    expect.row(i) = p / p.sum() / 3.0;
    expect(i, y[r]) -= 1.0 / 3.0;
  }
  CHECK((logits.grad() - expect).cwiseAbs().maxCoeff() < 1e-9);

  ad::Tape t3;
  const std::vector<int> none_labels = {};
  CHECK_THROWS_AS(ad::softmax_cross_entropy(t3.constant(Matrix::Zero(0, 3)), none_labels), std::invalid_argument);
}

TEST_CASE("adam: zero gradient and first step") {
  Matrix p = Matrix::Constant(2, 2, 0.7);
  Matrix* ptrs[] = {&p};
  const Matrix* cptrs[] = {&p};
  ad::AdamState st({}, cptrs);
  const Matrix zero = Matrix::Zero(2, 2);
  ad::adam_step(ptrs, std::span<const Matrix>(&zero, 1), st);
  CHECK(p == Matrix::Constant(2, 2, 0.7));
  CHECK(st.t == 1);

  Matrix q = Matrix::Constant(1, 1, 1.0);
  Matrix* qp[] = {&q};
  const Matrix* qc[] = {&q};
  ad::AdamState s2({}, qc);
  const Matrix g = Matrix::Constant(1, 1, 0.5);
  ad::adam_step(qp, std::span<const Matrix>(&g, 1), s2);
  CHECK(q(0, 0) == doctest::Approx(1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
  CHECK(q(0, 0) == doctest::Approx(0.999));
}

TEST_CASE("adam matches the update equations over 100 steps") {
  std::mt19937_64 rng(13);
  Matrix p = test::random_matrix(rng, 3, 4);
  Matrix* ptrs[] = {&p};
  const Matrix* cptrs[] = {&p};
  ad::AdamConfig cfg{0.01, 0.85, 0.995, 1e-7};
  ad::AdamState st(cfg, cptrs);

  std::vector<double> ref(p.data(), p.data() + p.size());
  std::vector<double> m(ref.size(), 0.0), v(ref.size(), 0.0);
  for (int t = 1; t <= 100; ++t) {
    const Matrix g = test::random_matrix(rng, 3, 4);
    ad::adam_step(ptrs, std::span<const Matrix>(&g, 1), st);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double gi = g.data()[i];
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
      const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
      const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
      ref[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
    for (std::size_t i = 0; i < ref.size(); ++i) REQUIRE(std::abs(p.data()[i] - ref[i]) < 1e-12);
  }
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(st.v[0].data()[i] >= 0.0);
}

TEST_CASE("neighborhoods from adjacency") {
  Eigen::MatrixXi a(3, 3);
  a << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  const auto nb = ad::Neighborhoods::from_adjacency(a, false);
  CHECK(nb.num_rows() == 3);
  CHECK(nb.num_entries() == 4);
  const auto self = ad::Neighborhoods::from_adjacency(a, true);
  CHECK(std::vector<std::size_t>(self.row(1).begin(), self.row(1).end()) == std::vector<std::size_t>{0, 1, 2});
}
