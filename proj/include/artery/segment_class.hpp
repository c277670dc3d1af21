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
#include <string_view>

namespace artery {

/// The 13 SCCT coronary segment classes. Enumerator values are the
/// 13-class label indices.
enum class SegmentClass : int {
  LM = 0,
  LAD,
  LCX,
  R,
  S,
  OM,
  D,
  L_PLB,
  L_PDA,
  RCA,
  AM,
  R_PLB,
  R_PDA,
};

inline constexpr int kNumClasses13 = 13;
inline constexpr int kNumClasses11 = 11;

inline constexpr std::array<SegmentClass, kNumClasses13> kAllClasses = {
    SegmentClass::LM,    SegmentClass::LAD,   SegmentClass::LCX, SegmentClass::R,
    SegmentClass::S,     SegmentClass::OM,    SegmentClass::D,   SegmentClass::L_PLB,
    SegmentClass::L_PDA, SegmentClass::RCA,   SegmentClass::AM,  SegmentClass::R_PLB,
    SegmentClass::R_PDA};

/// Class code as written in subject files, e.g. "L-PDA".
std::string_view class_code(SegmentClass c);
std::optional<SegmentClass> parse_class_code(std::string_view code);

/// True for the two classes removed in the 11-class dataset.
inline bool is_removed_in_11(SegmentClass c) {
  return c == SegmentClass::L_PLB || c == SegmentClass::L_PDA;
}

/// Label index of c in the given class mode (11 or 13). Returns nullopt
/// when c does not exist in that mode.
std::optional<int> class_index(SegmentClass c, int class_mode);

/// Inverse of class_index.
SegmentClass class_from_index(int index, int class_mode);

/// Code for a label index in the given class mode.
std::string_view index_code(int index, int class_mode);

}  // namespace artery
