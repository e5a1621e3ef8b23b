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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace pheno::bench {

/// Per-process times in seconds, GNU time style.
struct TimingRecord {
  double real_s = 0.0;
  double user_s = 0.0;
  /// Absent when the platform cannot separate system time.
  std::optional<double> sys_s;
  std::optional<long> max_rss_kb;
  /// Row label for summary fixtures ("max"/"min"); empty for live runs.
  std::string label;

  bool operator==(const TimingRecord&) const = default;
};

enum class SizeClass { S, M, L, XL, R };

std::string_view to_string(SizeClass c);
/// Throws FormatError.
SizeClass size_class_from_string(std::string_view s);
/// RAM of the virtual machine classes in GB; R (physical host) has none.
std::optional<double> conventional_ram_gb(SizeClass c);

struct MachineLabel {
  SizeClass size_class = SizeClass::R;
  int cores = 1;
  bool hyperthreading = false;
  double ram_gb = 0.0;

  /// e.g. "XL_HT(8)".
  std::string name() const;
  bool operator==(const MachineLabel&) const = default;
};

/// The host this process runs on, labelled as class R.
MachineLabel detect_host();

struct BenchRun {
  /// Display label; derived from machine and process count when empty.
  std::string label;
  MachineLabel machine;
  int processes = 1;
  std::string phase;
  std::vector<TimingRecord> records;
  /// Records are the published extreme rows, not one per process.
  bool summary = false;
  bool multithreaded = false;
  bool failed = false;

  /// `label`, or e.g. "XL_HT(8/6)" (just the machine name when P = 1).
  std::string name() const;
};

/// Throws ValidationError on an empty run, negative times, a non-positive
/// real time, or a record count that disagrees with `processes`.
void validate(const BenchRun& run);

nlohmann::json to_json(const TimingRecord& r);
nlohmann::json to_json(const BenchRun& run);
BenchRun run_from_json(const nlohmann::json& doc);
/// A file holds one run object or a list of runs.
std::vector<BenchRun> load_runs(const std::filesystem::path& path);
void save_runs(const std::filesystem::path& path, const std::vector<BenchRun>& runs);

struct BuiltinWorkload {
  std::uint64_t work_units = 0;
};
/// Shell command run through /bin/sh -c.
struct CommandWorkload {
  std::string command;
};
using Workload = std::variant<BuiltinWorkload, CommandWorkload>;

/// Parses "builtin" or "cmd:<command>".
Workload parse_workload(std::string_view spec, std::uint64_t work_units);

/// Starts `processes` copies of the workload behind a common launch
/// barrier, releases them together and reaps each one with wait4(). Real
/// time runs from the release to the reap; user/sys come from the child's
/// rusage. A child that exits nonzero marks the run failed.
BenchRun run_concurrent(const Workload& workload, int processes, std::string phase = "builtin");

/// Record with maximal / minimal real time; the first occurrence wins ties.
const TimingRecord& slowest(const BenchRun& run);
const TimingRecord& fastest(const BenchRun& run);

/// 100 * sys / real; nullopt when sys is unavailable.
std::optional<double> sys_pct(const TimingRecord& t);

/// 100 * (candidate - baseline) / baseline on real time.
double degradation_pct(const TimingRecord& candidate, const TimingRecord& baseline);

/// (P, t(1) / t(P)) sorted by P. Throws ValidationError without exactly one
/// P = 1 entry, or with non-positive times.
std::vector<std::pair<int, double>> speedup_curve(std::vector<std::pair<int, double>> runs);

struct RunSummary {
  std::string name;
  std::string phase;
  int processes = 1;
  TimingRecord slowest;
  TimingRecord fastest;
  std::optional<double> sys_pct;
  /// Against the first baseline with the same phase, process count and
  /// core count; failing that, the first with the same phase and count.
  std::optional<std::string> baseline;
  std::optional<double> degradation_pct;
};

struct SpeedupSeries {
  std::string machine;
  std::string phase;
  std::vector<std::pair<int, double>> points;
};

struct BenchReport {
  std::vector<RunSummary> runs;
  std::vector<SpeedupSeries> speedups;
};

/// Pure function of its inputs.
BenchReport analyze(const std::vector<BenchRun>& runs, const std::vector<BenchRun>& baselines);

nlohmann::json to_json(const BenchReport& report);
std::string to_table(const BenchReport& report);

} // namespace pheno::bench
