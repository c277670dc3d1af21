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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "artery/geometry.hpp"
#include "artery/segment_class.hpp"

namespace artery {

/// Which coronary ostium a branch's root path starts from.
enum class TreeSide { Left, Right };

std::string_view side_name(TreeSide side);

struct Centerline {
  std::string branch_id;
  std::vector<Point3> points;
  TreeSide tree_side = TreeSide::Left;

  friend bool operator==(const Centerline&, const Centerline&) = default;
};

struct SubjectRecord {
  std::string subject_id;
  double voxel_spacing_mm = 0.5;
  std::vector<Centerline> centerlines;
  /// Ground-truth class per branch id, when annotated.
  std::map<std::string, SegmentClass> labels;

  bool has_labels() const { return !labels.empty(); }

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

/// Resampling distance used when none is given: 10 voxels.
inline double default_resample_spacing(const SubjectRecord& s) { return 10.0 * s.voxel_spacing_mm; }

inline constexpr double kDefaultMergeToleranceMm = 1.5;

/// Throws ValidationError when any Centerline / SubjectRecord invariant is
/// violated.
void validate(const Centerline& cl);
void validate(const SubjectRecord& subject);

/// Parses the subject JSON schema:
///   { "subject_id": str, "voxel_spacing_mm": number,
///     "branches": [ { "id": str, "side": "left"|"right",
///                     "points": [[x,y,z],...], "label": optional str } ] }
SubjectRecord parse_subject(std::string_view bytes);

/// Canonical JSON text (2-space indent, fixed key order, shortest
/// round-trip doubles). parse_subject(serialize_subject(s)) == s.
std::string serialize_subject(const SubjectRecord& subject);

SubjectRecord load_subject(const std::string& path);
void save_subject(const SubjectRecord& subject, const std::string& path);

/// Resamples a polyline so consecutive points are spacing_mm apart. Starting
/// from the first point, each new point is the first point further along the
/// curve at Euclidean distance spacing_mm from the previous one; the last
/// input point closes the polyline, so the final gap lies in (0, spacing_mm].
/// Re-resampling the output at the same spacing reproduces it.
Centerline resample_centerline(const Centerline& cl, double spacing_mm);

/// Snaps every branch start that lies within tol_mm of a point on another
/// branch onto the nearest such point. Start points of other branches are
/// not snap targets. Ties go to the lower branch index, then the lower point
/// index.
SubjectRecord merge_branch_origins(const SubjectRecord& subject,
                                   double tol_mm = kDefaultMergeToleranceMm);

/// Resample every branch (default spacing when spacing_mm is unset), then
/// merge branch origins.
SubjectRecord prepare_subject(const SubjectRecord& subject,
                              std::optional<double> spacing_mm = std::nullopt,
                              double merge_tol_mm = kDefaultMergeToleranceMm);

}  // namespace artery
