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

#include "run_dir.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "artery/error.hpp"

namespace artery::cli {

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

RunDir::RunDir(const fs::path& out_root, std::uint64_t seed) : start_(std::chrono::steady_clock::now()) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream name;
  name << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << "-seed" << seed;
  path_ = out_root / name.str();
  for (int k = 2; fs::exists(path_); ++k) path_ = out_root / (name.str() + "-" + std::to_string(k));
  fs::create_directories(path_);
}

void RunDir::write(const std::string& relative, const std::string& text) {
  write_text(path_ / relative, text);
  artifacts_.push_back(relative);
}

void RunDir::add_input(const fs::path& path) {
  nlohmann::ordered_json e;
  e["path"] = path.string();
  e["sha256"] = sha256_file(path);
  inputs_.push_back(std::move(e));
}

void RunDir::finish(const std::string& command, const std::vector<std::string>& args,
                    const nlohmann::ordered_json& config, const nlohmann::ordered_json& seeds) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["args"] = args;
  m["config"] = config;
  m["seeds"] = seeds;
  m["inputs"] = inputs_;
  m["artifacts"] = artifacts_;
  m["duration_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  const fs::path tmp = path_ / "manifest.json.tmp";
  write_text(tmp, m.dump(2) + "\n");
  fs::rename(tmp, path_ / "manifest.json");
}

}  // namespace artery::cli
