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

// Brute-force references shared by the unit and acceptance tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "artery/autodiff.hpp"
#include "artery/graph_build.hpp"
#include "artery/models.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

namespace artery::test {

inline std::set<std::array<double, 3>> coords(const std::vector<Point3>& pts) {
  std::set<std::array<double, 3>> out;
  for (const auto& p : pts) out.insert({p.x, p.y, p.z});
  return out;
}

struct GraphOracleReport {
  bool segment_count = true;
  bool junctions = true;
  bool adjacency = true;
  bool ok() const { return segment_count && junctions && adjacency; }
};

/// Segment count from attachment bookkeeping, junction set from branch ends
/// plus attachment points, adjacency from pairwise shared endpoints.
inline GraphOracleReport check_graph_oracles(const RandomTree& tree) {
  GraphOracleReport r;
  const auto& cls = tree.subject.centerlines;
  const auto skel = split_into_segments(tree.subject);

  std::vector<std::set<std::size_t>> interior(cls.size());
  std::vector<Point3> junction_pts;
  for (std::size_t b = 0; b < cls.size(); ++b) {
    junction_pts.push_back(cls[b].points.front());
    junction_pts.push_back(cls[b].points.back());
    if (const auto& a = tree.attach[b]) {
      if (a->index + 1 < cls[a->parent].points.size()) interior[a->parent].insert(a->index);
      junction_pts.push_back(cls[a->parent].points[a->index]);
    }
  }
  std::size_t expected = 0;
  for (const auto& s : interior) expected += 1 + s.size();
  r.segment_count = skel.segments.size() == expected;
  const auto want = coords(junction_pts);
  r.junctions = coords(skel.junctions) == want && skel.junctions.size() == want.size();
  for (const auto& s : skel.segments)
    r.junctions = r.junctions && s.points.front() == skel.junctions[s.start_junction] &&
                  s.points.back() == skel.junctions[s.end_junction];

  const auto g = line_graph(skel);
  const std::size_t n = skel.segments.size();
  r.adjacency = static_cast<std::size_t>(g.adjacency.rows()) == n;
  for (std::size_t i = 0; i < n && r.adjacency; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto& a = skel.segments[i].points;
      const auto& b = skel.segments[j].points;
      const bool share = i != j && (a.front() == b.front() || a.front() == b.back() || a.back() == b.front() ||
                                    a.back() == b.back());
      if (g.adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != (share ? 1 : 0))
        r.adjacency = false;
    }
  return r;
}

inline Eigen::MatrixXi random_adjacency(std::mt19937_64& rng, int n, double p = 0.35) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(n, n);
  std::bernoulli_distribution edge(p);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (edge(rng)) a(i, j) = a(j, i) = 1;
  return a;
}

/// Relative FD error of d(cross-entropy)/d(params) for a full model on a
/// random graph. Draws that land within h of a kink are redrawn.
inline double model_fd_error(nn::Variant v, std::uint64_t seed, double h = 1e-5) {
  std::mt19937_64 rng(seed);
  nn::ModelConfig cfg;
  cfg.variant = v;
  cfg.hidden_dim = 6;
  cfg.gin_eps = 0.1;
  cfg.seed = seed;
  const int n = 5;
  for (;;) {
    nn::Model model(cfg);
    for (auto& p : model.params())
      if (p.value.rows() == 1) p.value = random_matrix(rng, 1, p.value.cols(), 0.1);
    const auto g = nn::GraphInput::from_dense(random_matrix(rng, n, cfg.in_dim), random_adjacency(rng, n, 0.5));
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng() % cfg.num_classes);

    std::vector<ad::Matrix> values;
    for (const auto& p : model.params()) values.push_back(p.value);
    nn::Model probe = model;
    const auto eval = [&](const std::vector<ad::Matrix>& xs) {
      for (std::size_t k = 0; k < xs.size(); ++k) probe.params()[k].value = xs[k];
      ad::Tape tape;
      return ad::softmax_cross_entropy(probe.forward(tape, g, false).logits, labels).value()(0, 0);
    };
    if (!smooth_at(eval, values, h)) continue;

    ad::Tape tape;
    const auto fwd = model.forward(tape, g, true);
    tape.backward(ad::softmax_cross_entropy(fwd.logits, labels));
    double worst = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const ad::Matrix analytic = fwd.leaves[k].grad();
      const ad::Matrix numeric = numeric_gradient(eval, values, k, h);
      const double scale = std::max({analytic.norm(), numeric.norm(), 1e-6});
      worst = std::max(worst, (analytic - numeric).norm() / scale);
    }
    return worst;
  }
}

/// Relative FD error of one layer with respect to its input features and
/// every weight, under a random linear probe. Kinked draws are redrawn.
inline double layer_fd_error(nn::Variant v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = 6, d = 4, k = 3;
  for (;;) {
    const auto g = nn::GraphInput::from_dense(ad::Matrix::Zero(n, d), random_adjacency(rng, n, 0.5));
    std::vector<ad::Matrix> in = {random_matrix(rng, n, d)};
    LossBuilder f;
    switch (v) {
      case nn::Variant::GCN:
        in.push_back(random_matrix(rng, d, k));
        in.push_back(random_matrix(rng, 1, k, 0.1));
        f = [&g](ad::Tape& t, const std::vector<ad::Tensor>& x) {
          return probe_loss(t, nn::gcn_layer(x[0], g, x[1], x[2], true), 1);
        };
        break;
      case nn::Variant::GAT:
        for (int q = 0; q < 2; ++q) {
          in.push_back(random_matrix(rng, d, k));
          in.push_back(random_matrix(rng, k, 1));
          in.push_back(random_matrix(rng, k, 1));
        }
        in.push_back(random_matrix(rng, 1, 2 * k, 0.1));
        f = [&g](ad::Tape& t, const std::vector<ad::Tensor>& x) {
          const std::vector<nn::GatHead> heads = {{x[1], x[2], x[3]}, {x[4], x[5], x[6]}};
          return probe_loss(t, nn::gat_layer(x[0], g, heads, x[7], 0.2, true).h, 2);
        };
        break;
      case nn::Variant::GIN:
        in.push_back(ad::Matrix::Constant(1, 1, 0.1));
        in.push_back(random_matrix(rng, d, 5));
        in.push_back(random_matrix(rng, 1, 5, 0.1));
        in.push_back(random_matrix(rng, 5, k));
        in.push_back(random_matrix(rng, 1, k, 0.1));
        f = [&g](ad::Tape& t, const std::vector<ad::Tensor>& x) {
          return probe_loss(t, nn::gin_layer(x[0], g, x[1], {x[2], x[3], x[4], x[5]}), 3);
        };
        break;
      case nn::Variant::SAGE:
        in.push_back(random_matrix(rng, d, 5));
        in.push_back(random_matrix(rng, 1, 5, 0.1));
        in.push_back(random_matrix(rng, d + 5, k));
        in.push_back(random_matrix(rng, 1, k, 0.1));
        f = [&g](ad::Tape& t, const std::vector<ad::Tensor>& x) {
          return probe_loss(t, nn::sage_layer(x[0], g.neighbors, x[1], x[2], x[3], x[4], true), 4);
        };
        break;
    }
    if (smooth_at(loss_evaluator(f), in, 1e-5)) return gradcheck(f, in);
  }
}

inline double weighted_f1_oracle(const std::vector<int>& p, const std::vector<int>& y, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    long tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) ++support;
      if (p[i] == c && y[i] == c) ++tp;
      if (p[i] == c && y[i] != c) ++fp;
      if (p[i] != c && y[i] == c) ++fn;
    }
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    total += f1 * double(support) / double(y.size());
  }
  return total;
}

/// Largest |logits(P x, P A P^T) - P logits(x, A)| over a random graph.
inline double permutation_error(const nn::Model& model, std::mt19937_64& rng, int n) {
  const auto a = random_adjacency(rng, n);
  const ad::Matrix x = random_matrix(rng, n, model.config().in_dim);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  ad::Matrix px(n, x.cols());
  Eigen::MatrixXi pa(n, n);
  for (int i = 0; i < n; ++i) {
    px.row(i) = x.row(perm[i]);
    for (int j = 0; j < n; ++j) pa(i, j) = a(perm[i], perm[j]);
  }
  const ad::Matrix base = model.logits(nn::GraphInput::from_dense(x, a));
  const ad::Matrix permuted = model.logits(nn::GraphInput::from_dense(px, pa));
  double worst = 0.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, (permuted.row(i) - base.row(perm[i])).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace artery::test
