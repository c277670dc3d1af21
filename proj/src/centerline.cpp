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

#include "artery/centerline.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "artery/error.hpp"

namespace artery {

using nlohmann::ordered_json;

std::string_view side_name(TreeSide side) { return side == TreeSide::Left ? "left" : "right"; }

void validate(const Centerline& cl) {
  if (cl.points.size() < 2)
    throw ValidationError("centerline too short: branch '" + cl.branch_id + "' has " +
                          std::to_string(cl.points.size()) + " point(s), need at least 2");
  for (std::size_t i = 0; i < cl.points.size(); ++i) {
    if (!is_finite(cl.points[i]))
      throw ValidationError("branch '" + cl.branch_id + "': non-finite coordinate at point " +
                            std::to_string(i));
    if (i > 0 && cl.points[i] == cl.points[i - 1])
      throw ValidationError("branch '" + cl.branch_id + "': repeated consecutive point at index " +
                            std::to_string(i));
  }
}

void validate(const SubjectRecord& subject) {
  if (!(subject.voxel_spacing_mm > 0.0) || !std::isfinite(subject.voxel_spacing_mm))
    throw ValidationError("voxel_spacing_mm must be positive");
  bool has_left = false;
  bool has_right = false;
  std::set<std::string> ids;
  for (const auto& cl : subject.centerlines) {
    validate(cl);
    if (!ids.insert(cl.branch_id).second)
      throw ValidationError("duplicate branch id '" + cl.branch_id + "'");
    (cl.tree_side == TreeSide::Left ? has_left : has_right) = true;
  }
  if (!has_left) throw ValidationError("subject has no left-side branch");
  if (!has_right) throw ValidationError("subject has no right-side branch");
  for (const auto& [id, cls] : subject.labels)
    if (!ids.contains(id)) throw ValidationError("label refers to unknown branch '" + id + "'");
}

SubjectRecord parse_subject(std::string_view bytes) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(bytes.begin(), bytes.end());
  } catch (const ordered_json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("subject file must be a JSON object");

  SubjectRecord s;
  try {
    s.subject_id = doc.at("subject_id").get<std::string>();
    s.voxel_spacing_mm = doc.at("voxel_spacing_mm").get<double>();
    const auto& branches = doc.at("branches");
    if (!branches.is_array()) throw ValidationError("'branches' must be an array");
    for (const auto& b : branches) {
      Centerline cl;
      cl.branch_id = b.at("id").get<std::string>();
      const auto side = b.at("side").get<std::string>();
      if (side == "left")
        cl.tree_side = TreeSide::Left;
      else if (side == "right")
        cl.tree_side = TreeSide::Right;
      else
        throw ValidationError("branch '" + cl.branch_id + "': side must be \"left\" or \"right\"");
      if (!b.contains("points") || !b["points"].is_array())
        throw ValidationError("branch '" + cl.branch_id + "': missing points array");
      for (const auto& p : b["points"]) {
        if (!p.is_array() || p.size() != 3)
          throw ValidationError("branch '" + cl.branch_id + "': each point must be [x,y,z]");
        cl.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
      }
      if (b.contains("label") && !b["label"].is_null()) {
        const auto code = b["label"].get<std::string>();
        const auto cls = parse_class_code(code);
        if (!cls) throw ValidationError("branch '" + cl.branch_id + "': unknown label '" + code + "'");
        s.labels[cl.branch_id] = *cls;
      }
      s.centerlines.push_back(std::move(cl));
    }
  } catch (const ordered_json::exception& e) {
    throw ValidationError(std::string("invalid subject schema: ") + e.what());
  }
  validate(s);
  return s;
}

std::string serialize_subject(const SubjectRecord& subject) {
  ordered_json doc;
  doc["subject_id"] = subject.subject_id;
  doc["voxel_spacing_mm"] = subject.voxel_spacing_mm;
  auto branches = ordered_json::array();
  for (const auto& cl : subject.centerlines) {
    ordered_json b;
    b["id"] = cl.branch_id;
    b["side"] = side_name(cl.tree_side);
    auto pts = ordered_json::array();
    for (const auto& p : cl.points) pts.push_back({p.x, p.y, p.z});
    b["points"] = std::move(pts);
    if (auto it = subject.labels.find(cl.branch_id); it != subject.labels.end())
      b["label"] = class_code(it->second);
    branches.push_back(std::move(b));
  }
  doc["branches"] = std::move(branches);
  return doc.dump(2) + "\n";
}

SubjectRecord load_subject(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open subject file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_subject(ss.str());
}

void save_subject(const SubjectRecord& subject, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << serialize_subject(subject);
}

namespace {

// Largest u in [u_min, 1] with |a + u (b - a) - c| = r, assuming the point at
// u_min is within r of c. Returns a negative value when the whole remaining
// part of the segment stays inside the sphere.
double sphere_exit(const Point3& a, const Point3& b, const Point3& c, double r, double u_min) {
  const Point3 d = b - a;
  const Point3 f = a - c;
  const double qa = dot(d, d);
  const double qb = 2.0 * dot(f, d);
  const double qc = dot(f, f) - r * r;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return -1.0;
  const double u = (-qb + std::sqrt(disc)) / (2.0 * qa);
  // A vertex exactly r away may land a rounding error past the segment end.
  if (u < u_min || u > 1.0 + 1e-12) return -1.0;
  return std::min(u, 1.0);
}

}  // namespace

Centerline resample_centerline(const Centerline& cl, double spacing_mm) {
  if (!(spacing_mm > 0.0) || !std::isfinite(spacing_mm))
    throw std::invalid_argument("resample spacing must be positive");
  if (cl.points.empty()) throw ValidationError("branch '" + cl.branch_id + "': empty centerline");

  // Drop exact repeats so every polyline segment has positive length.
  std::vector<Point3> pts;
  pts.reserve(cl.points.size());
  for (const auto& p : cl.points)
    if (pts.empty() || !(p == pts.back())) pts.push_back(p);
  if (pts.size() < 2)
    throw ValidationError("branch '" + cl.branch_id + "': zero-length centerline");

  Centerline out{cl.branch_id, {pts.front()}, cl.tree_side};
  const double snap_eps = 1e-9 * std::max(1.0, spacing_mm);

  std::size_t seg = 0;
  double u = 0.0;
  Point3 current = pts.front();
  while (seg + 1 < pts.size()) {
    const double exit = sphere_exit(pts[seg], pts[seg + 1], current, spacing_mm, u);
    if (exit < 0.0) {
      ++seg;
      u = 0.0;
      continue;
    }
    u = exit;
    current = lerp(pts[seg], pts[seg + 1], u);
    out.points.push_back(current);
  }

  const Point3& last = pts.back();
  if (distance(out.points.back(), last) <= snap_eps && out.points.size() > 1)
    out.points.back() = last;
  else
    out.points.push_back(last);
  return out;
}

SubjectRecord merge_branch_origins(const SubjectRecord& subject, double tol_mm) {
  SubjectRecord out = subject;
  const auto& src = subject.centerlines;
  for (std::size_t b = 0; b < src.size(); ++b) {
    if (src[b].points.empty()) continue;
    const Point3 start = src[b].points.front();
    double best = std::numeric_limits<double>::infinity();
    const Point3* target = nullptr;
    for (std::size_t o = 0; o < src.size(); ++o) {
      if (o == b) continue;
      for (std::size_t i = 1; i < src[o].points.size(); ++i) {
        const double d = distance(start, src[o].points[i]);
        if (d < best) {
          best = d;
          target = &src[o].points[i];
        }
      }
    }
    if (target == nullptr || best > tol_mm) continue;
    auto& pts = out.centerlines[b].points;
    pts.front() = *target;
    if (pts.size() > 2 && pts[1] == pts[0]) pts.erase(pts.begin() + 1);
  }
  return out;
}

SubjectRecord prepare_subject(const SubjectRecord& subject, std::optional<double> spacing_mm,
                              double merge_tol_mm) {
  const double spacing = spacing_mm.value_or(default_resample_spacing(subject));
  SubjectRecord resampled = subject;
  for (auto& cl : resampled.centerlines) cl = resample_centerline(cl, spacing);
  return merge_branch_origins(resampled, merge_tol_mm);
}

}  // namespace artery
