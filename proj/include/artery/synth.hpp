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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "artery/centerline.hpp"

namespace artery {

/// One optional side-branch class grown off a main vessel.
struct BranchSpawn {
  SegmentClass cls = SegmentClass::D;
  SegmentClass parent = SegmentClass::LAD;
  double presence = 0.0;  // probability that any instance exists
  int min_count = 1;
  int max_count = 1;
  double attach_lo = 0.2;  // attachment position as a fraction of parent length
  double attach_hi = 0.8;
  Point3 direction{0, 0, 1};  // initial heading in the canonical frame
  double length_lo_mm = 20.0;
  double length_hi_mm = 40.0;
};

struct GenParams {
  int num_subjects = 141;
  std::uint64_t seed = 0;
  double voxel_spacing_mm = 0.5;
  std::vector<BranchSpawn> spawns;
  /// Uniform jitter per axis of main-vessel waypoints.
  double waypoint_jitter_mm = 4.0;
  /// Angular jitter of side-branch headings (radians, per axis).
  double direction_jitter = 0.25;
  /// Lateral bow of side branches as a fraction of their length.
  double bend = 0.15;
  /// Offset of child starts from the parent vertex; stays below the merge
  /// tolerance so the pipeline snaps them back.
  double junction_jitter_mm = 0.4;
  /// Whole-tree size factor drawn from [1 - s, 1 + s].
  double scale_jitter = 0.1;
  double translation_mm = 50.0;
  bool random_rotation = true;

  static GenParams defaults();
  static GenParams low_noise();
  /// Every side branch absent: LM, LAD, LCX and RCA only.
  static GenParams minimal();

  void validate() const;
};

nlohmann::ordered_json to_json(const GenParams& p);

struct GeneratedSubject {
  SubjectRecord subject;
  std::uint64_t seed = 0;
  /// Counts by class code, from the generator's own bookkeeping.
  std::map<std::string, int> branch_counts;
  std::map<std::string, int> segment_counts;
  int num_branches = 0;
  int num_segments = 0;
};

/// Deterministic in (params, index). Child branches start within
/// junction_jitter_mm of an interior vertex of their resampled parent, at
/// most one child per vertex, so the processed graph has exactly
/// num_segments nodes.
GeneratedSubject generate_subject(const GenParams& params, int index);

struct Corpus {
  std::vector<GeneratedSubject> subjects;
  nlohmann::ordered_json manifest;
};

Corpus generate_corpus(const GenParams& params);

}  // namespace artery
