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

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "artery/centerline.hpp"

namespace artery {

inline constexpr int kEmbeddingDim = 48;

/// Subject-specific coordinate frame. Rows of `basis` are the local x, y, z
/// axes expressed in patient coordinates.
struct ReferenceFrame {
  Point3 origin;
  Eigen::Matrix3d basis = Eigen::Matrix3d::Identity();
  double scale_mm = 1.0;

  /// basis (p - origin) / scale_mm
  Point3 to_local(const Point3& p) const;
  /// basis v / scale_mm, for displacement vectors.
  Point3 to_local_vector(const Point3& v) const;
};

/// Radius plus azimuth/elevation embedded as two unit-circle pairs.
struct SphericalRepr {
  double r = 0.0;
  double cos_az = 1.0;
  double sin_az = 0.0;
  double cos_el = 1.0;
  double sin_el = 0.0;
};

using JunctionId = std::size_t;

struct Segment {
  std::size_t segment_id = 0;
  std::string parent_branch_id;
  std::vector<Point3> points;
  JunctionId start_junction = 0;
  JunctionId end_junction = 0;
  std::optional<SegmentClass> label;
};

struct SkeletonGraph {
  /// Junction positions indexed by JunctionId.
  std::vector<Point3> junctions;
  std::vector<Segment> segments;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Line graph of a skeleton. Node i is segment i.
struct SegmentGraph {
  RowMatrix node_features;     // N x 48
  Eigen::MatrixXi adjacency;   // N x N, symmetric 0/1, zero diagonal
  std::vector<std::string> node_ids;
  /// Raw 13-class labels, one per node, when the subject is annotated.
  std::optional<std::vector<SegmentClass>> node_labels;

  std::size_t num_nodes() const { return node_ids.size(); }
  bool has_labels() const { return node_labels.has_value(); }
};

/// Cuts every branch at the points where other branches attach.
///
/// The first branch of each tree side (file order) is that side's root. Any
/// other branch must start exactly on a non-start point of a same-side
/// branch; otherwise a ValidationError("dangling branch ...") is thrown.
/// Junctions are the distinct attachment points plus all branch endpoints.
SkeletonGraph split_into_segments(const SubjectRecord& subject);

/// Nodes = segments; edge between two segments iff they share a junction.
/// Features are left empty (N x 0).
SegmentGraph line_graph(const SkeletonGraph& skel);

/// Origin: first point of the first left branch. z: towards that branch's
/// second point. y: component of (last point of last right branch - origin)
/// orthogonal to z. x = y cross z. scale_mm: diagonal of the bounding box of
/// all points measured in the local axes.
ReferenceFrame build_reference_frame(const SubjectRecord& subject);

/// Spherical encoding of a local-frame vector q. At r = 0 the angles are
/// fixed to (1, 0, 1, 0).
SphericalRepr spherical_from_local(const Point3& q);
SphericalRepr to_local_spherical(const Point3& p, const ReferenceFrame& frame);

/// 48 features: first point, midpoint (index (n-1)/2), last point, first
/// tangent, first->mid, mid->last; each as local xyz (3) followed by
/// spherical (r, cos az, sin az, cos el, sin el).
std::array<double, kEmbeddingDim> node_embedding(const Segment& seg, const ReferenceFrame& frame);

/// Full pipeline on an already resampled and merged subject:
/// split_into_segments -> line_graph -> node_embedding per node. Segments
/// inherit their parent branch's label.
SegmentGraph build_segment_graph(const SubjectRecord& subject);

/// {nodes:[{id, features[48], label?}], edges:[[i,j],...]} with i < j.
nlohmann::ordered_json segment_graph_to_json(const SegmentGraph& g);
SegmentGraph segment_graph_from_json(const nlohmann::ordered_json& doc);

}  // namespace artery
