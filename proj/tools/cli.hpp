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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pheno::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Defaults shared by all subcommands. Loaded from the JSON file named by
/// PHENO_CONFIG; command-line flags take precedence.
struct GlobalConfig {
  std::optional<std::string> catalog;
  std::optional<std::string> scripts_dir;
  std::optional<std::string> sandbox_root;
  std::optional<std::string> identity_config;
  std::optional<std::string> principal_store;
  std::optional<std::string> signing_key_file;
  int verbosity = 0;
};

/// Throws pheno::Error on unreadable or malformed files.
GlobalConfig load_global_config(const std::string& path);

/// Runs one invocation. `args` excludes the program name. Data goes to
/// `out`, diagnostics and JSON error objects to `err`. Returns the process
/// exit code: 0 success, 1 domain failure, 2 usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace pheno::cli
