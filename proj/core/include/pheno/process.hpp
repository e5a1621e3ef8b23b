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

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

// POSIX child-process helpers shared by the contextualizer, scanner and
// benchmark harness.

namespace pheno::process {

/// How a child terminated, plus its resource usage as reported by wait4().
struct ExitStatus {
  bool exited = false;   // normal exit
  int code = -1;         // exit code when `exited`
  int signal = 0;        // terminating signal otherwise
  bool timed_out = false;
  double real_s = 0.0;
  double user_s = 0.0;
  double sys_s = 0.0;
  long max_rss_kb = 0;

  bool success() const noexcept { return exited && code == 0 && !timed_out; }
  std::string describe() const;
};

struct Credentials {
  uid_t uid;
  gid_t gid;
};

/// Looks up a local account. Returns nullopt when unknown.
std::optional<Credentials> lookup_user(const std::string& name);

struct SpawnOptions {
  std::vector<std::string> argv;
  /// When set, the child environment is exactly this map.
  std::optional<std::map<std::string, std::string>> env;
  std::optional<std::filesystem::path> cwd;
  /// File connected to the child's stdin (default /dev/null).
  std::optional<std::filesystem::path> stdin_path;
  /// Drop to these credentials before exec (requires privilege).
  std::optional<Credentials> run_as;
  /// Zero means no limit. On expiry the child's process group is killed.
  std::chrono::milliseconds timeout{0};
  /// When false the child's stderr is inherited instead of captured.
  bool capture_stderr = true;
};

struct RunResult {
  ExitStatus status;
  /// Captured stdout, interleaved with stderr when `capture_stderr`.
  std::string output;
};

/// Runs a child to completion, capturing its output. Throws IoError if the
/// child cannot be created; exec failures surface as exit code 127.
RunResult run(const SpawnOptions& options);

/// Converts a rusage timeval to seconds.
double seconds(const struct timeval& tv);

/// Count of distinct physical cores, from sysfs topology when available.
unsigned physical_core_count();
/// Logical CPUs online.
unsigned logical_cpu_count();

} // namespace pheno::process
