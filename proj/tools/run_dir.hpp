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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace artery::cli {

namespace fs = std::filesystem;

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);

/// Output directory of one command invocation: <out>/<UTC timestamp>-seed<seed>.
/// Every artifact goes through write(); finish() writes manifest.json last,
/// via a rename so a present manifest marks a complete run.
class RunDir {
 public:
  RunDir(const fs::path& out_root, std::uint64_t seed);

  const fs::path& path() const { return path_; }

  void write(const std::string& relative, const std::string& text);
  void add_input(const fs::path& path);

  void finish(const std::string& command, const std::vector<std::string>& args,
              const nlohmann::ordered_json& config, const nlohmann::ordered_json& seeds);

 private:
  fs::path path_;
  std::vector<std::string> artifacts_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
  std::chrono::steady_clock::time_point start_;
};

}  // namespace artery::cli
