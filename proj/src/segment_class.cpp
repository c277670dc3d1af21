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

#include "artery/segment_class.hpp"

#include <stdexcept>

namespace artery {

namespace {
constexpr std::array<std::string_view, kNumClasses13> kCodes = {
    "LM", "LAD", "LCX", "R", "S", "OM", "D", "L-PLB", "L-PDA", "RCA", "AM", "R-PLB", "R-PDA"};

void check_mode(int class_mode) {
  if (class_mode != kNumClasses11 && class_mode != kNumClasses13)
    throw std::invalid_argument("class mode must be 11 or 13, got " + std::to_string(class_mode));
}
}  // namespace

std::string_view class_code(SegmentClass c) { return kCodes.at(static_cast<std::size_t>(c)); }

std::optional<SegmentClass> parse_class_code(std::string_view code) {
  for (std::size_t i = 0; i < kCodes.size(); ++i)
    if (kCodes[i] == code) return static_cast<SegmentClass>(i);
  return std::nullopt;
}

std::optional<int> class_index(SegmentClass c, int class_mode) {
  check_mode(class_mode);
  const int raw = static_cast<int>(c);
  if (class_mode == kNumClasses13) return raw;
  if (is_removed_in_11(c)) return std::nullopt;
  return raw < static_cast<int>(SegmentClass::L_PLB) ? raw : raw - 2;
}

SegmentClass class_from_index(int index, int class_mode) {
  check_mode(class_mode);
  if (index < 0 || index >= class_mode)
    throw std::out_of_range("class index " + std::to_string(index) + " out of range");
  if (class_mode == kNumClasses13 || index < static_cast<int>(SegmentClass::L_PLB))
    return static_cast<SegmentClass>(index);
  return static_cast<SegmentClass>(index + 2);
}

std::string_view index_code(int index, int class_mode) {
  return class_code(class_from_index(index, class_mode));
}

}  // namespace artery
