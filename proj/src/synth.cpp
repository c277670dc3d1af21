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

#include "artery/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <stdexcept>

#include <Eigen/Geometry>

#include "artery/error.hpp"
#include "artery/graph_build.hpp"
#include "artery/rng.hpp"

namespace artery {

namespace {

constexpr int kMaxAttempts = 64;

// Main vessels in the canonical frame (mm): LM runs up +z from the origin,
// the right tree lies along +y so it fixes the azimuth reference.
const std::vector<Point3> kLm = {{0, 0, 0}, {0, 0, 5}, {1, 0, 10}};
const std::vector<Point3> kLad = {{1, 0, 10}, {-10, -8, 28}, {-25, -18, 55}, {-35, -22, 85}, {-38, -20, 115},
                                  {-35, -15, 140}};
const std::vector<Point3> kLcx = {{1, 0, 10}, {12, -8, 18}, {30, -20, 22}, {45, -35, 15}, {52, -50, 0},
                                  {55, -62, -15}};
const std::vector<Point3> kRca = {{-5, 30, -12}, {-15, 45, -25}, {-20, 60, -50}, {-15, 68, -80}, {-5, 66, -105},
                                  {0, 60, -125}};

bool is_main(SegmentClass c) {
  return c == SegmentClass::LM || c == SegmentClass::LAD || c == SegmentClass::LCX || c == SegmentClass::RCA;
}

Point3 normalized(const Point3& v) {
  const double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

Point3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    const Point3 v{g(rng), g(rng), g(rng)};
    if (norm(v) > 1e-6) return normalized(v);
  }
}

Point3 uniform_cube(std::mt19937_64& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  const double x = u(rng), y = u(rng), z = u(rng);
  return {x, y, z};
}

// Uniform Catmull-Rom through the waypoints, end tangents by duplication.
std::vector<Point3> catmull_rom(const std::vector<Point3>& w, int per_span = 24) {
  std::vector<Point3> out{w.front()};
  const std::size_t n = w.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Point3 p0 = w[i == 0 ? 0 : i - 1];
    const Point3 p1 = w[i];
    const Point3 p2 = w[i + 1];
    const Point3 p3 = w[std::min(i + 2, n - 1)];
    for (int s = 1; s <= per_span; ++s) {
      if (s == per_span) {
        out.push_back(p2);
        break;
      }
      const double t = static_cast<double>(s) / per_span;
      const double t2 = t * t, t3 = t2 * t;
      out.push_back((p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 +
                     (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3) *
                    0.5);
    }
  }
  return out;
}

std::vector<Point3> resampled(const std::vector<Point3>& waypoints, double spacing) {
  Centerline cl{"tmp", catmull_rom(waypoints), TreeSide::Left};
  return resample_centerline(cl, spacing).points;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

struct Draft {
  std::string id;
  SegmentClass cls;
  TreeSide side;
  std::vector<Point3> points;
  std::vector<int> used;  // parent vertices already taken by children
};

GeneratedSubject draw(const GenParams& p, int index, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double spacing = 10.0 * p.voxel_spacing_mm;
  const double scale = 1.0 + p.scale_jitter * (2.0 * unit(rng) - 1.0);

  auto jittered = [&](const std::vector<Point3>& base, const Point3* start) {
    std::vector<Point3> w;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (i == 0 && start) {
        w.push_back(*start);
      } else if (i == 0 && base.front() == Point3{0, 0, 0}) {
        w.push_back(base.front());
      } else {
        w.push_back(base[i] * scale + uniform_cube(rng, p.waypoint_jitter_mm));
      }
    }
    return w;
  };
  auto junction_offset = [&] { return random_unit(rng) * (p.junction_jitter_mm * unit(rng)); };

  std::vector<Draft> drafts;
  drafts.push_back({"LM", SegmentClass::LM, TreeSide::Left, resampled(jittered(kLm, nullptr), spacing), {}});
  const Point3 lm_end = drafts[0].points.back() + junction_offset();
  drafts.push_back({"LAD", SegmentClass::LAD, TreeSide::Left, resampled(jittered(kLad, &lm_end), spacing), {}});
  const Point3 lm_end2 = drafts[0].points.back() + junction_offset();
  drafts.push_back({"LCX", SegmentClass::LCX, TreeSide::Left, resampled(jittered(kLcx, &lm_end2), spacing), {}});
  drafts.push_back({"RCA", SegmentClass::RCA, TreeSide::Right, resampled(jittered(kRca, nullptr), spacing), {}});

  GeneratedSubject out;
  for (const auto& d : drafts) out.branch_counts[std::string(class_code(d.cls))] += 1;

  std::vector<Draft> left_side, right_side;
  std::map<SegmentClass, int> serial;
  for (const auto& sp : p.spawns) {
    if (unit(rng) >= sp.presence) continue;
    const int count = std::uniform_int_distribution<int>(sp.min_count, sp.max_count)(rng);
    auto parent = std::find_if(drafts.begin(), drafts.end(), [&](const Draft& d) { return d.cls == sp.parent; });
    const int n = static_cast<int>(parent->points.size());
    const int lo = std::max(1, static_cast<int>(std::ceil(sp.attach_lo * (n - 1))));
    const int hi = std::min(n - 2, static_cast<int>(std::floor(sp.attach_hi * (n - 1))));
    for (int c = 0; c < count; ++c) {
      int k = -1;
      for (int attempt = 0; attempt < 20 && k < 0 && lo <= hi; ++attempt) {
        const int cand = std::uniform_int_distribution<int>(lo, hi)(rng);
        const bool clear = std::none_of(parent->used.begin(), parent->used.end(),
                                        [&](int u) { return std::abs(u - cand) < 2; });
        if (clear) k = cand;
      }
      if (k < 0) continue;
      parent->used.push_back(k);

      Point3 dir = normalized(normalized(sp.direction) + uniform_cube(rng, p.direction_jitter));
      Point3 perp = cross(dir, random_unit(rng));
      while (norm(perp) < 1e-6) perp = cross(dir, random_unit(rng));
      perp = normalized(perp);
      const double len = scale * (sp.length_lo_mm + (sp.length_hi_mm - sp.length_lo_mm) * unit(rng));
      const double bow = p.bend * len * (2.0 * unit(rng) - 1.0);
      const Point3 start = parent->points[static_cast<std::size_t>(k)] + junction_offset();
      std::vector<Point3> w{start};
      for (double t : {1.0 / 3.0, 2.0 / 3.0, 1.0})
        w.push_back(start + dir * (len * t) + perp * (bow * std::sin(std::numbers::pi * t)));

      const std::string code(class_code(sp.cls));
      Draft child{code + "-" + std::to_string(++serial[sp.cls]), sp.cls, parent->side, resampled(w, spacing), {}};
      out.branch_counts[code] += 1;
      (child.side == TreeSide::Left ? left_side : right_side).push_back(std::move(child));
    }
  }

  // Interior attachments split their parent into extra segments.
  for (const auto& d : drafts)
    out.segment_counts[std::string(class_code(d.cls))] += 1 + static_cast<int>(d.used.size());
  for (const auto* group : {&left_side, &right_side})
    for (const auto& d : *group) out.segment_counts[std::string(class_code(d.cls))] += 1;

  // File order: left mains, left children, RCA, right children.
  std::vector<Draft> ordered{drafts[0], drafts[1], drafts[2]};
  ordered.insert(ordered.end(), left_side.begin(), left_side.end());
  ordered.push_back(drafts[3]);
  ordered.insert(ordered.end(), right_side.begin(), right_side.end());

  const Eigen::Matrix3d rot = p.random_rotation ? random_rotation(rng) : Eigen::Matrix3d::Identity();
  const Point3 shift = uniform_cube(rng, p.translation_mm);

  char id[32];
  std::snprintf(id, sizeof id, "subject-%03d", index);
  SubjectRecord& s = out.subject;
  s.subject_id = id;
  s.voxel_spacing_mm = p.voxel_spacing_mm;
  for (const auto& d : ordered) {
    Centerline cl{d.id, {}, d.side};
    for (const auto& q : d.points) {
      const Eigen::Vector3d v = rot * Eigen::Vector3d(q.x, q.y, q.z);
      cl.points.push_back(Point3{v.x(), v.y(), v.z()} + shift);
    }
    s.labels[d.id] = d.cls;
    s.centerlines.push_back(std::move(cl));
  }
  out.seed = seed;
  for (const auto& [k, v] : out.branch_counts) out.num_branches += v;
  for (const auto& [k, v] : out.segment_counts) out.num_segments += v;
  return out;
}

nlohmann::ordered_json counts_json(const std::map<std::string, int>& counts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (SegmentClass c : kAllClasses) {
    const std::string code(class_code(c));
    const auto it = counts.find(code);
    j[code] = it == counts.end() ? 0 : it->second;
  }
  return j;
}

}  // namespace

GenParams GenParams::defaults() {
  using C = SegmentClass;
  GenParams p;
  p.spawns = {
      {C::R, C::LAD, 0.45, 1, 1, 0.05, 0.15, {-0.9, 0.1, 0.2}, 30, 50},
      {C::S, C::LAD, 0.85, 1, 2, 0.25, 0.6, {0.3, 0.6, 0.4}, 15, 30},
      {C::OM, C::LAD, 0.9, 1, 2, 0.2, 0.75, {-0.6, -0.6, -0.3}, 30, 60},
      {C::D, C::LCX, 0.95, 1, 2, 0.2, 0.6, {0.4, -0.5, -0.7}, 30, 55},
      {C::L_PLB, C::LCX, 0.44, 1, 1, 0.7, 0.8, {0.8, 0.2, -0.5}, 20, 35},
      {C::L_PDA, C::LCX, 0.28, 1, 1, 0.82, 0.92, {-0.2, -0.3, -0.9}, 25, 45},
      {C::AM, C::RCA, 0.85, 1, 2, 0.3, 0.6, {-0.9, 0.2, -0.3}, 30, 55},
      {C::R_PDA, C::RCA, 0.72, 1, 1, 0.85, 0.95, {0.0, 0.3, -0.95}, 30, 50},
      {C::R_PLB, C::RCA, 0.85, 1, 2, 0.65, 0.82, {0.0, -0.8, -0.3}, 20, 35},
  };
  return p;
}

GenParams GenParams::low_noise() {
  GenParams p = defaults();
  p.waypoint_jitter_mm = 1.5;
  p.direction_jitter = 0.1;
  p.bend = 0.08;
  p.junction_jitter_mm = 0.2;
  p.scale_jitter = 0.05;
  return p;
}

GenParams GenParams::minimal() {
  GenParams p = defaults();
  for (auto& s : p.spawns) s.presence = 0.0;
  return p;
}

void GenParams::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("invalid generator params: " + m); };
  if (num_subjects < 1) fail("num_subjects must be >= 1");
  if (!(voxel_spacing_mm > 0.0)) fail("voxel_spacing_mm must be > 0");
  if (waypoint_jitter_mm < 0 || direction_jitter < 0 || bend < 0 || translation_mm < 0) fail("negative jitter");
  if (!(scale_jitter >= 0.0 && scale_jitter < 0.5)) fail("scale_jitter must be in [0, 0.5)");
  if (!(junction_jitter_mm >= 0.0 && junction_jitter_mm < kDefaultMergeToleranceMm / 2))
    fail("junction_jitter_mm must be in [0, merge tolerance / 2)");
  for (const auto& s : spawns) {
    const std::string c(class_code(s.cls));
    if (is_main(s.cls)) fail(c + " is a main vessel");
    if (!is_main(s.parent) || s.parent == SegmentClass::LM) fail(c + ": parent must be LAD, LCX or RCA");
    if (!(s.presence >= 0.0 && s.presence <= 1.0)) fail(c + ": presence outside [0, 1]");
    if (s.min_count < 1 || s.max_count < s.min_count) fail(c + ": bad count range");
    if (!(s.attach_lo >= 0.0 && s.attach_lo <= s.attach_hi && s.attach_hi <= 1.0)) fail(c + ": bad attach range");
    if (!(s.length_lo_mm > 0.0 && s.length_lo_mm <= s.length_hi_mm)) fail(c + ": bad length range");
    if (norm(s.direction) < 1e-9) fail(c + ": zero direction");
  }
}

nlohmann::ordered_json to_json(const GenParams& p) {
  nlohmann::ordered_json j;
  j["num_subjects"] = p.num_subjects;
  j["seed"] = p.seed;
  j["voxel_spacing_mm"] = p.voxel_spacing_mm;
  j["waypoint_jitter_mm"] = p.waypoint_jitter_mm;
  j["direction_jitter"] = p.direction_jitter;
  j["bend"] = p.bend;
  j["junction_jitter_mm"] = p.junction_jitter_mm;
  j["scale_jitter"] = p.scale_jitter;
  j["translation_mm"] = p.translation_mm;
  j["random_rotation"] = p.random_rotation;
  auto spawns = nlohmann::ordered_json::array();
  for (const auto& s : p.spawns) {
    nlohmann::ordered_json e;
    e["class"] = class_code(s.cls);
    e["parent"] = class_code(s.parent);
    e["presence"] = s.presence;
    e["count"] = {s.min_count, s.max_count};
    e["attach"] = {s.attach_lo, s.attach_hi};
    e["direction"] = {s.direction.x, s.direction.y, s.direction.z};
    e["length_mm"] = {s.length_lo_mm, s.length_hi_mm};
    spawns.push_back(std::move(e));
  }
  j["spawns"] = std::move(spawns);
  return j;
}

GeneratedSubject generate_subject(const GenParams& params, int index) {
  params.validate();
  if (index < 0) throw std::invalid_argument("subject index must be >= 0");
  const std::uint64_t base = mix_seed(params.seed, static_cast<std::uint64_t>(index));
  // Redraw the rare subject whose branches brush past another branch's
  // start closely enough to change the merged topology.
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t seed = attempt == 0 ? base : mix_seed(base, static_cast<std::uint64_t>(attempt));
    GeneratedSubject g = draw(params, index, seed);
    try {
      const SubjectRecord prepared = prepare_subject(g.subject);
      if (static_cast<int>(split_into_segments(prepared).segments.size()) == g.num_segments) return g;
    } catch (const ValidationError&) {
    }
  }
  throw std::runtime_error("generator could not produce a consistent subject " + std::to_string(index));
}

Corpus generate_corpus(const GenParams& params) {
  params.validate();
  Corpus corpus;
  std::map<std::string, int> branch_total, segment_total;
  auto subjects = nlohmann::ordered_json::array();
  for (int i = 0; i < params.num_subjects; ++i) {
    GeneratedSubject g = generate_subject(params, i);
    nlohmann::ordered_json e;
    e["subject_id"] = g.subject.subject_id;
    e["seed"] = g.seed;
    e["num_branches"] = g.num_branches;
    e["num_segments"] = g.num_segments;
    e["branches"] = counts_json(g.branch_counts);
    e["segments"] = counts_json(g.segment_counts);
    subjects.push_back(std::move(e));
    for (const auto& [k, v] : g.branch_counts) branch_total[k] += v;
    for (const auto& [k, v] : g.segment_counts) segment_total[k] += v;
    corpus.subjects.push_back(std::move(g));
  }
  int nb = 0, ns = 0;
  for (const auto& [k, v] : branch_total) nb += v;
  for (const auto& [k, v] : segment_total) ns += v;

  nlohmann::ordered_json& m = corpus.manifest;
  m["generator"] = to_json(params);
  m["num_subjects"] = params.num_subjects;
  m["total_branches"] = nb;
  m["total_segments"] = ns;
  m["mean_branches"] = static_cast<double>(nb) / params.num_subjects;
  m["mean_segments"] = static_cast<double>(ns) / params.num_subjects;
  m["branches"] = counts_json(branch_total);
  m["segments"] = counts_json(segment_total);
  m["subjects"] = std::move(subjects);
  return corpus;
}

}  // namespace artery
