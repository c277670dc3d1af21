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

// Random inputs shared by the unit and acceptance tests.

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "artery/centerline.hpp"
#include "artery/graph_build.hpp"
#include "artery/synth.hpp"
#include "artery/training.hpp"

namespace artery::test {

struct Attach {
  std::size_t parent;
  std::size_t index;
};

/// Subject whose non-root branches start exactly on a point of an earlier
/// same-side branch. attach[b] is empty for the two roots (branches 0, 1).
struct RandomTree {
  SubjectRecord subject;
  std::vector<std::optional<Attach>> attach;
};

inline Point3 random_step(std::mt19937_64& rng, double lo, double hi) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> len(lo, hi);
  Point3 d{g(rng), g(rng), g(rng)};
  const double n = norm(d);
  return d * (len(rng) / n);
}

inline std::vector<Point3> random_walk(std::mt19937_64& rng, Point3 start, int n) {
  std::vector<Point3> pts{start};
  for (int i = 1; i < n; ++i) pts.push_back(pts.back() + random_step(rng, 1.0, 6.0));
  return pts;
}

inline RandomTree random_tree(std::mt19937_64& rng, int max_branches = 20) {
  std::uniform_int_distribution<int> nb(2, max_branches);
  std::uniform_int_distribution<int> npts(2, 8);
  std::uniform_int_distribution<int> cls(0, 12);
  RandomTree t;
  SubjectRecord& s = t.subject;
  s.subject_id = "random";
  const int branches = nb(rng);
  for (int b = 0; b < branches; ++b) {
    Centerline cl;
    cl.branch_id = "b" + std::to_string(b);
    std::optional<Attach> at;
    if (b == 0) {
      cl.tree_side = TreeSide::Left;
      cl.points = random_walk(rng, {0, 0, 0}, npts(rng));
    } else if (b == 1) {
      cl.tree_side = TreeSide::Right;
      cl.points = random_walk(rng, {0, 200, 0}, npts(rng));
    } else {
      cl.tree_side = std::bernoulli_distribution(0.5)(rng) ? TreeSide::Left : TreeSide::Right;
      std::vector<std::size_t> same;
      for (int o = 0; o < b; ++o)
        if (s.centerlines[o].tree_side == cl.tree_side) same.push_back(static_cast<std::size_t>(o));
      const std::size_t parent = same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)];
      const auto& pp = s.centerlines[parent].points;
      // Reuse an existing attachment point now and then so junctions get shared.
      std::optional<std::size_t> index;
      if (std::bernoulli_distribution(0.2)(rng)) {
        for (std::size_t o = 2; o < t.attach.size(); ++o)
          if (t.attach[o] && t.attach[o]->parent == parent) index = t.attach[o]->index;
      }
      if (!index) index = std::uniform_int_distribution<std::size_t>(1, pp.size() - 1)(rng);
      at = Attach{parent, *index};
      cl.points = random_walk(rng, pp[*index], npts(rng));
    }
    s.labels[cl.branch_id] = static_cast<SegmentClass>(cls(rng));
    s.centerlines.push_back(std::move(cl));
    t.attach.push_back(at);
  }
  return t;
}

struct RigidMotion {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d translation;

  Point3 apply(const Point3& p) const {
    const Eigen::Vector3d v = rotation * Eigen::Vector3d(p.x, p.y, p.z) + translation;
    return {v.x(), v.y(), v.z()};
  }
};

inline RigidMotion random_motion(std::mt19937_64& rng, double translation = 100.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-translation, translation);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return {q.toRotationMatrix(), Eigen::Vector3d(u(rng), u(rng), u(rng))};
}

inline SubjectRecord transformed(SubjectRecord s, const RigidMotion& m) {
  for (auto& cl : s.centerlines)
    for (auto& p : cl.points) p = m.apply(p);
  return s;
}

inline SubjectRecord scaled(SubjectRecord s, double k) {
  for (auto& cl : s.centerlines)
    for (auto& p : cl.points) p = p * k;
  return s;
}

/// Generated subjects run through the full graph pipeline.
inline std::vector<Sample> synth_samples(GenParams params, int n) {
  params.num_subjects = n;
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const auto g = generate_subject(params, i);
    out.push_back({g.subject.subject_id, build_segment_graph(prepare_subject(g.subject))});
  }
  return out;
}

}  // namespace artery::test
