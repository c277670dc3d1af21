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

#include "artery/graph_build.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <Eigen/Geometry>

#include "artery/error.hpp"

namespace artery {

namespace {

Eigen::Vector3d as_eigen(const Point3& p) { return {p.x, p.y, p.z}; }
Point3 as_point(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

using CoordKey = std::array<double, 3>;
CoordKey key_of(const Point3& p) { return {p.x, p.y, p.z}; }

// Relative size below which a local vector counts as lying on the z axis;
// its azimuth is then fixed to 0 so round-off cannot flip it.
constexpr double kPoleTolerance = 1e-9;

struct Attachment {
  std::size_t parent = 0;
  std::size_t index = 0;
};

}  // namespace

Point3 ReferenceFrame::to_local(const Point3& p) const {
  return as_point(basis * as_eigen(p - origin) / scale_mm);
}

Point3 ReferenceFrame::to_local_vector(const Point3& v) const {
  return as_point(basis * as_eigen(v) / scale_mm);
}

SkeletonGraph split_into_segments(const SubjectRecord& subject) {
  const auto& cls = subject.centerlines;
  for (const auto& cl : cls) validate(cl);

  std::optional<std::size_t> left_root, right_root;
  for (std::size_t b = 0; b < cls.size(); ++b) {
    auto& root = cls[b].tree_side == TreeSide::Left ? left_root : right_root;
    if (!root) root = b;
  }

  // Parent attachment of every non-root branch.
  std::vector<std::optional<Attachment>> parent(cls.size());
  for (std::size_t b = 0; b < cls.size(); ++b) {
    if (b == left_root || b == right_root) continue;
    const Point3& start = cls[b].points.front();
    for (std::size_t o = 0; o < cls.size() && !parent[b]; ++o) {
      if (o == b || cls[o].tree_side != cls[b].tree_side) continue;
      for (std::size_t i = 1; i < cls[o].points.size(); ++i) {
        if (cls[o].points[i] == start) {
          parent[b] = Attachment{o, i};
          break;
        }
      }
    }
    if (!parent[b])
      throw ValidationError("dangling branch '" + cls[b].branch_id +
                            "': start does not coincide with any point of another branch");
  }

  // Every branch must reach its side's root through its parent chain.
  for (std::size_t b = 0; b < cls.size(); ++b) {
    std::size_t cur = b;
    std::size_t steps = 0;
    while (parent[cur]) {
      cur = parent[cur]->parent;
      if (++steps > cls.size())
        throw ValidationError("dangling branch '" + cls[b].branch_id + "': attachment cycle");
    }
  }

  std::vector<std::set<std::size_t>> cuts(cls.size());
  for (std::size_t b = 0; b < cls.size(); ++b) {
    cuts[b].insert(0);
    cuts[b].insert(cls[b].points.size() - 1);
  }
  for (std::size_t b = 0; b < cls.size(); ++b)
    if (parent[b]) cuts[parent[b]->parent].insert(parent[b]->index);

  SkeletonGraph skel;
  std::map<CoordKey, JunctionId> junction_of;
  auto junction = [&](const Point3& p) {
    auto [it, inserted] = junction_of.emplace(key_of(p), skel.junctions.size());
    if (inserted) skel.junctions.push_back(p);
    return it->second;
  };

  for (std::size_t b = 0; b < cls.size(); ++b) {
    const auto& pts = cls[b].points;
    std::optional<SegmentClass> label;
    if (auto it = subject.labels.find(cls[b].branch_id); it != subject.labels.end())
      label = it->second;
    std::size_t prev = 0;
    for (auto it = std::next(cuts[b].begin()); it != cuts[b].end(); ++it) {
      Segment seg;
      seg.segment_id = skel.segments.size();
      seg.parent_branch_id = cls[b].branch_id;
      seg.points.assign(pts.begin() + static_cast<std::ptrdiff_t>(prev),
                        pts.begin() + static_cast<std::ptrdiff_t>(*it) + 1);
      seg.start_junction = junction(seg.points.front());
      seg.end_junction = junction(seg.points.back());
      seg.label = label;
      skel.segments.push_back(std::move(seg));
      prev = *it;
    }
  }
  return skel;
}

SegmentGraph line_graph(const SkeletonGraph& skel) {
  const auto n = static_cast<Eigen::Index>(skel.segments.size());
  SegmentGraph g;
  g.node_features = RowMatrix::Zero(n, 0);
  g.adjacency = Eigen::MatrixXi::Zero(n, n);

  std::vector<std::vector<Eigen::Index>> incident(skel.junctions.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& seg = skel.segments[static_cast<std::size_t>(i)];
    incident.at(seg.start_junction).push_back(i);
    if (seg.end_junction != seg.start_junction) incident.at(seg.end_junction).push_back(i);
  }
  for (const auto& nodes : incident)
    for (std::size_t a = 0; a < nodes.size(); ++a)
      for (std::size_t b = a + 1; b < nodes.size(); ++b) {
        g.adjacency(nodes[a], nodes[b]) = 1;
        g.adjacency(nodes[b], nodes[a]) = 1;
      }

  std::map<std::string, int> piece;
  for (const auto& seg : skel.segments)
    g.node_ids.push_back(seg.parent_branch_id + "#" + std::to_string(piece[seg.parent_branch_id]++));
  return g;
}

ReferenceFrame build_reference_frame(const SubjectRecord& subject) {
  const Centerline* first_left = nullptr;
  const Centerline* last_right = nullptr;
  for (const auto& cl : subject.centerlines) {
    if (cl.tree_side == TreeSide::Left && first_left == nullptr) first_left = &cl;
    if (cl.tree_side == TreeSide::Right) last_right = &cl;
  }
  if (first_left == nullptr || last_right == nullptr)
    throw ValidationError("reference frame needs at least one left and one right branch");
  if (first_left->points.size() < 2)
    throw ValidationError("centerline too short: branch '" + first_left->branch_id + "'");

  ReferenceFrame frame;
  frame.origin = first_left->points[0];
  const Point3 dz = first_left->points[1] - frame.origin;
  if (norm(dz) == 0.0)
    throw ValidationError("degenerate frame: first two points of branch '" +
                          first_left->branch_id + "' coincide");
  const Eigen::Vector3d z = as_eigen(dz).normalized();

  const Eigen::Vector3d w = as_eigen(last_right->points.back() - frame.origin);
  const Eigen::Vector3d w_perp = w - w.dot(z) * z;
  if (w.norm() == 0.0 || w_perp.norm() <= 1e-9 * w.norm())
    throw ValidationError("degenerate frame: control point lies on the z axis");
  const Eigen::Vector3d y = w_perp.normalized();
  const Eigen::Vector3d x = y.cross(z);
  frame.basis.row(0) = x.transpose();
  frame.basis.row(1) = y.transpose();
  frame.basis.row(2) = z.transpose();

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& cl : subject.centerlines)
    for (const auto& p : cl.points) {
      const Eigen::Vector3d q = frame.basis * as_eigen(p - frame.origin);
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
  frame.scale_mm = (hi - lo).norm();
  if (!(frame.scale_mm > 0.0)) throw ValidationError("degenerate frame: zero extent");
  return frame;
}

SphericalRepr spherical_from_local(const Point3& q) {
  SphericalRepr s;
  s.r = norm(q);
  if (s.r == 0.0) return s;
  const double rho = std::hypot(q.x, q.y);
  if (rho > kPoleTolerance * s.r) {
    const double az = std::atan2(q.y, q.x);
    s.cos_az = std::cos(az);
    s.sin_az = std::sin(az);
  }
  const double el = std::atan2(rho, q.z);
  s.cos_el = std::cos(el);
  s.sin_el = std::sin(el);
  return s;
}

SphericalRepr to_local_spherical(const Point3& p, const ReferenceFrame& frame) {
  return spherical_from_local(frame.to_local(p));
}

std::array<double, kEmbeddingDim> node_embedding(const Segment& seg, const ReferenceFrame& frame) {
  if (seg.points.size() < 2)
    throw ValidationError("segment of branch '" + seg.parent_branch_id + "' has fewer than 2 points");
  const std::size_t n = seg.points.size();
  const Point3& first = seg.points.front();
  const Point3& mid = seg.points[(n - 1) / 2];
  const Point3& last = seg.points.back();

  const std::array<Point3, 6> local = {
      frame.to_local(first),
      frame.to_local(mid),
      frame.to_local(last),
      frame.to_local_vector(seg.points[1] - first),
      frame.to_local_vector(mid - first),
      frame.to_local_vector(last - mid),
  };
  std::array<double, kEmbeddingDim> out{};
  std::size_t k = 0;
  for (const auto& q : local) {
    const auto s = spherical_from_local(q);
    for (double v : {q.x, q.y, q.z, s.r, s.cos_az, s.sin_az, s.cos_el, s.sin_el}) out[k++] = v;
  }
  return out;
}

SegmentGraph build_segment_graph(const SubjectRecord& subject) {
  const SkeletonGraph skel = split_into_segments(subject);
  const ReferenceFrame frame = build_reference_frame(subject);
  SegmentGraph g = line_graph(skel);
  const auto n = static_cast<Eigen::Index>(skel.segments.size());
  g.node_features.resize(n, kEmbeddingDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto emb = node_embedding(skel.segments[static_cast<std::size_t>(i)], frame);
    for (int j = 0; j < kEmbeddingDim; ++j) g.node_features(i, j) = emb[static_cast<std::size_t>(j)];
  }
  if (subject.has_labels()) {
    std::vector<SegmentClass> labels;
    for (const auto& seg : skel.segments) {
      if (!seg.label)
        throw ValidationError("branch '" + seg.parent_branch_id + "' has no label in an annotated subject");
      labels.push_back(*seg.label);
    }
    g.node_labels = std::move(labels);
  }
  return g;
}

nlohmann::ordered_json segment_graph_to_json(const SegmentGraph& g) {
  nlohmann::ordered_json doc;
  auto nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    nlohmann::ordered_json node;
    node["id"] = g.node_ids[i];
    auto feats = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < g.node_features.cols(); ++j)
      feats.push_back(g.node_features(static_cast<Eigen::Index>(i), j));
    node["features"] = std::move(feats);
    if (g.node_labels) node["label"] = class_code((*g.node_labels)[i]);
    nodes.push_back(std::move(node));
  }
  auto edges = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < g.adjacency.rows(); ++i)
    for (Eigen::Index j = i + 1; j < g.adjacency.cols(); ++j)
      if (g.adjacency(i, j) != 0) edges.push_back({i, j});
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc;
}

SegmentGraph segment_graph_from_json(const nlohmann::ordered_json& doc) {
  SegmentGraph g;
  try {
    const auto& nodes = doc.at("nodes");
    const auto n = static_cast<Eigen::Index>(nodes.size());
    if (n == 0) throw ValidationError("segment graph has no nodes");
    g.node_features.resize(n, kEmbeddingDim);
    g.adjacency = Eigen::MatrixXi::Zero(n, n);
    std::vector<SegmentClass> labels;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& node = nodes[static_cast<std::size_t>(i)];
      g.node_ids.push_back(node.at("id").get<std::string>());
      const auto& feats = node.at("features");
      if (feats.size() != kEmbeddingDim)
        throw ValidationError("node '" + g.node_ids.back() + "' does not have 48 features");
      for (int j = 0; j < kEmbeddingDim; ++j) g.node_features(i, j) = feats[static_cast<std::size_t>(j)].get<double>();
      if (node.contains("label")) {
        const auto cls = parse_class_code(node["label"].get<std::string>());
        if (!cls) throw ValidationError("unknown label on node '" + g.node_ids.back() + "'");
        labels.push_back(*cls);
      }
    }
    if (!labels.empty()) {
      if (static_cast<Eigen::Index>(labels.size()) != n)
        throw ValidationError("segment graph is partially labeled");
      g.node_labels = std::move(labels);
    }
    for (const auto& e : doc.at("edges")) {
      const auto i = e.at(0).get<Eigen::Index>();
      const auto j = e.at(1).get<Eigen::Index>();
      if (i < 0 || j < 0 || i >= n || j >= n || i == j)
        throw ValidationError("invalid edge in segment graph");
      g.adjacency(i, j) = g.adjacency(j, i) = 1;
    }
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ValidationError(std::string("invalid segment graph JSON: ") + e.what());
  }
  return g;
}

}  // namespace artery
