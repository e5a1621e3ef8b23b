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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

// Statically partitioned two-dimensional parameter scan over (M_A, tan beta).
//
// The coordinator broadcasts the scan job to W worker processes. Each worker
// owns one contiguous slice of the linearized grid, evaluates it with the
// kernel and writes `<out>.part<w>`. The coordinator joins all workers and
// concatenates the parts in worker order, which makes the merged file
// independent of W for any deterministic kernel.

namespace pheno::scan {

struct ScanGrid {
  double ma_min = 90.0;
  double ma_max = 500.0;
  double tb_min = 1.1;
  double tb_max = 60.0;
  int steps_per_axis = 120;

  /// Throws ValidationError.
  void validate() const;
  std::size_t size() const { return static_cast<std::size_t>(steps_per_axis) * steps_per_axis; }
};

struct GridPoint {
  double ma = 0.0;
  double tanb = 0.0;

  bool operator==(const GridPoint&) const = default;
};

/// Value `k` of an inclusive linear axis with `steps` values.
double axis_value(double lo, double hi, int steps, int k);

/// Point at linearized index `i_ma * steps + i_tb`.
GridPoint point_at(const ScanGrid& grid, std::size_t index);

/// All points in linearized order.
std::vector<GridPoint> build_grid(const ScanGrid& grid);

/// Half-open range [lo, hi) of linearized indices owned by one worker.
struct Partition {
  int worker_index = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;

  std::size_t size() const noexcept { return hi - lo; }
  bool operator==(const Partition&) const = default;
};

/// Equal contiguous shares; the first N mod W workers get one extra point.
/// Throws UsageError when `workers` < 1.
std::vector<Partition> partition(std::size_t points, int workers);

enum class Status { allowed, excluded_lhc, excluded_lep };

std::string_view to_token(Status s);
/// Throws FormatError on an unknown token.
Status status_from_token(std::string_view token);

struct ScanResult {
  double ma = 0.0;
  double tanb = 0.0;
  Status status = Status::allowed;

  bool operator==(const ScanResult&) const = default;
};

/// Burns exactly `work_units` iterations of a fixed arithmetic loop, then
/// classifies: excluded_lep if tanb < 4 and ma < 200, excluded_lhc if
/// tanb > 40, allowed otherwise.
Status builtin_kernel(double ma, double tanb, std::uint64_t work_units);

struct BuiltinKernel {
  std::uint64_t work_units = 0;
};

/// External evaluator run through /bin/sh -c. It reads "MA TANB" lines on
/// stdin and must answer one "MA TANB STATUS" line per input, in order.
struct CommandKernel {
  std::string command;
};

using Kernel = std::variant<BuiltinKernel, CommandKernel>;

/// Everything a worker needs; this is what the coordinator broadcasts.
struct ScanJob {
  ScanGrid grid;
  Kernel kernel;
  std::filesystem::path out;
  int workers = 1;
  /// Per-point evaluation limit; zero disables it.
  std::chrono::milliseconds point_timeout{0};
};

nlohmann::json to_json(const ScanJob& job);
ScanJob job_from_json(const nlohmann::json& doc);

/// Parses "--kernel" syntax: "builtin" or "cmd:<shell command>".
Kernel parse_kernel(std::string_view spec, std::uint64_t work_units);

/// "lo:hi" range syntax.
std::pair<double, double> parse_range(std::string_view spec);

/// One output line (with trailing newline): MA and TANB in 6-significant
/// digit %g form, then the status token.
std::string format_line(const ScanResult& r);
inline constexpr std::string_view kHeader = "# MA TANB STATUS\n";

std::filesystem::path part_path(const std::filesystem::path& out, int worker_index);

/// Evaluates one partition and writes its part file. Throws on failure.
void run_worker(const ScanJob& job, const Partition& part);

struct ScanSummary {
  std::size_t points = 0;
  std::vector<Partition> partitions;
  double wall_s = 0.0;
};

/// Runs the scan with `job.workers` worker processes and writes the merged
/// file. Throws ScanError when any worker fails; part files are then left
/// in place.
ScanSummary run_scan(const ScanJob& job);

/// Evaluates every point in index order in the calling process.
std::string evaluate_serial(const ScanJob& job);

std::vector<ScanResult> read_results(const std::filesystem::path& path);

/// Writes the excluded points into two files (LHC and LEP), "MA TANB" per line.
void split_results(const std::filesystem::path& merged, const std::filesystem::path& lhc_out,
                   const std::filesystem::path& lep_out);

} // namespace pheno::scan
