// Copyright 2026 The pheno Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/stat.h>
#include <unistd.h>

#include "pheno/catalog.hpp"

namespace pheno::testing {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(PHENO_FIXTURE_DIR); }

class TempDir {
public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "pheno-test-XXXXXX").string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (mkdtemp(buf.data()) == nullptr)
      throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text, bool executable = false) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
  if (executable)
    fs::permissions(p, fs::perms::owner_all | fs::perms::group_read | fs::perms::others_read);
}

/// FNV-1a over every entry's relative path, type, mode, size, mtime and
/// content, in sorted path order.
inline std::uint64_t tree_hash(const fs::path& root) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  std::vector<fs::path> entries;
  for (const auto& e : fs::recursive_directory_iterator(root))
    entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  struct stat root_st{};
  ::lstat(root.c_str(), &root_st);
  mix(std::to_string(root_st.st_mode) + ":" + std::to_string(root_st.st_mtim.tv_sec) + "." +
      std::to_string(root_st.st_mtim.tv_nsec));
  for (const auto& p : entries) {
    struct stat st{};
    ::lstat(p.c_str(), &st);
    mix(fs::relative(p, root).string());
    mix(std::to_string(st.st_mode) + ":" + std::to_string(st.st_size) + ":" +
        std::to_string(st.st_mtim.tv_sec) + "." + std::to_string(st.st_mtim.tv_nsec));
    if (S_ISREG(st.st_mode))
      mix(slurp(p));
  }
  return h;
}

/// Random catalog over apps "a0".."a{n-1}". Each app gets one to three
/// versions; each version may override the dependency list. Edges only go
/// from higher to lower index only.
struct RandomCatalog {
  catalog::Catalog catalog;
  std::vector<std::string> names;
};

inline RandomCatalog random_dag_catalog(std::mt19937_64& rng, int n) {
  std::map<std::string, catalog::ApplicationEntry> entries;
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i)
    names.push_back("a" + std::to_string(i));
  auto pick_deps = [&](int i) {
    std::vector<std::string> deps;
    for (int j = 0; j < i; ++j)
      if (std::uniform_int_distribution<int>(0, 2)(rng) == 0)
        deps.push_back(names[j]);
    std::shuffle(deps.begin(), deps.end(), rng);
    return deps;
  };
  for (int i = 0; i < n; ++i) {
    catalog::ApplicationEntry e;
    e.name = names[i];
    e.defaults.installer = "install.sh";
    e.defaults.base_url = "https://example.org/" + names[i] + "/";
    e.defaults.dependencies = pick_deps(i);
    int versions = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int v = 0; v < versions; ++v) {
      catalog::VersionSpec spec;
      spec.version_key = std::to_string(v + 1) + ".0";
      spec.version_name = spec.version_key;
      if (std::uniform_int_distribution<int>(0, 2)(rng) == 0)
        spec.overrides.dependencies = pick_deps(i);
      e.versions.emplace(spec.version_key, spec);
    }
    entries.emplace(e.name, e);
  }
  return {catalog::Catalog(std::move(entries)), names};
}

} // namespace pheno::testing
