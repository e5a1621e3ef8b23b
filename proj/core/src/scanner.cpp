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

#include "pheno/scanner.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "pheno/error.hpp"
#include "pheno/process.hpp"

namespace pheno::scan {

namespace fs = std::filesystem;
using nlohmann::json;

void ScanGrid::validate() const {
  if (steps_per_axis < 1)
    throw ValidationError("grid", "steps_per_axis", "steps per axis must be at least 1");
  if (!(ma_min < ma_max))
    throw ValidationError("grid", "ma", "M_A range must satisfy min < max");
  if (!(tb_min < tb_max))
    throw ValidationError("grid", "tb", "tan(beta) range must satisfy min < max");
}

double axis_value(double lo, double hi, int steps, int k) {
  if (steps <= 1 || k == 0)
    return lo;
  if (k == steps - 1)
    return hi;
  return lo + k * (hi - lo) / (steps - 1);
}

GridPoint point_at(const ScanGrid& grid, std::size_t index) {
  const auto steps = static_cast<std::size_t>(grid.steps_per_axis);
  const int i_ma = static_cast<int>(index / steps);
  const int i_tb = static_cast<int>(index % steps);
  return {axis_value(grid.ma_min, grid.ma_max, grid.steps_per_axis, i_ma),
          axis_value(grid.tb_min, grid.tb_max, grid.steps_per_axis, i_tb)};
}

std::vector<GridPoint> build_grid(const ScanGrid& grid) {
  grid.validate();
  std::vector<GridPoint> points;
  points.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    points.push_back(point_at(grid, i));
  return points;
}

std::vector<Partition> partition(std::size_t points, int workers) {
  if (workers < 1)
    throw UsageError("worker count must be at least 1");
  const auto w = static_cast<std::size_t>(workers);
  const std::size_t base = points / w;
  const std::size_t extra = points % w;
  std::vector<Partition> parts;
  parts.reserve(w);
  std::size_t lo = 0;
  for (std::size_t i = 0; i < w; ++i) {
    const std::size_t n = base + (i < extra ? 1 : 0);
    parts.push_back({static_cast<int>(i), lo, lo + n});
    lo += n;
  }
  return parts;
}

std::string_view to_token(Status s) {
  switch (s) {
  case Status::allowed:
    return "ALLOWED";
  case Status::excluded_lhc:
    return "EXC_LHC";
  case Status::excluded_lep:
    return "EXC_LEP";
  }
  return "ALLOWED";
}

Status status_from_token(std::string_view token) {
  if (token == "ALLOWED")
    return Status::allowed;
  if (token == "EXC_LHC")
    return Status::excluded_lhc;
  if (token == "EXC_LEP")
    return Status::excluded_lep;
  throw FormatError("unknown scan status '" + std::string(token) + "'");
}

Status builtin_kernel(double ma, double tanb, std::uint64_t work_units) {
  double x = 1.0 + ma * 1e-3 + tanb * 1e-2;
  for (std::uint64_t i = 0; i < work_units; ++i) {
    x = x * 0.99999999 + 1e-8;
    asm volatile("" : "+x"(x));
  }
  if (tanb < 4.0 && ma < 200.0)
    return Status::excluded_lep;
  if (tanb > 40.0)
    return Status::excluded_lhc;
  return Status::allowed;
}

json to_json(const ScanJob& job) {
  json kernel;
  if (const auto* b = std::get_if<BuiltinKernel>(&job.kernel))
    kernel = {{"type", "builtin"}, {"work_units", b->work_units}};
  else
    kernel = {{"type", "cmd"}, {"command", std::get<CommandKernel>(job.kernel).command}};
  return {{"grid",
           {{"ma_min", job.grid.ma_min},
            {"ma_max", job.grid.ma_max},
            {"tb_min", job.grid.tb_min},
            {"tb_max", job.grid.tb_max},
            {"steps_per_axis", job.grid.steps_per_axis}}},
          {"kernel", kernel},
          {"out", job.out.string()},
          {"workers", job.workers},
          {"point_timeout_ms", job.point_timeout.count()}};
}

ScanJob job_from_json(const json& doc) {
  try {
    ScanJob job;
    const auto& g = doc.at("grid");
    job.grid.ma_min = g.at("ma_min").get<double>();
    job.grid.ma_max = g.at("ma_max").get<double>();
    job.grid.tb_min = g.at("tb_min").get<double>();
    job.grid.tb_max = g.at("tb_max").get<double>();
    job.grid.steps_per_axis = g.at("steps_per_axis").get<int>();
    const auto& k = doc.at("kernel");
    if (k.at("type").get<std::string>() == "builtin")
      job.kernel = BuiltinKernel{k.at("work_units").get<std::uint64_t>()};
    else
      job.kernel = CommandKernel{k.at("command").get<std::string>()};
    job.out = doc.at("out").get<std::string>();
    job.workers = doc.at("workers").get<int>();
    job.point_timeout = std::chrono::milliseconds(doc.value("point_timeout_ms", 0));
    return job;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed scan job: ") + e.what());
  }
}

Kernel parse_kernel(std::string_view spec, std::uint64_t work_units) {
  if (spec == "builtin")
    return BuiltinKernel{work_units};
  if (spec.starts_with("cmd:") && spec.size() > 4)
    return CommandKernel{std::string(spec.substr(4))};
  throw UsageError("kernel must be 'builtin' or 'cmd:<command>', got '" + std::string(spec) + "'");
}

std::pair<double, double> parse_range(std::string_view spec) {
  auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw UsageError("range must look like lo:hi, got '" + std::string(spec) + "'");
  auto num = [&](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw UsageError("bad number '" + std::string(s) + "' in range '" + std::string(spec) + "'");
    return v;
  };
  return {num(spec.substr(0, colon)), num(spec.substr(colon + 1))};
}

std::string format_line(const ScanResult& r) {
  return fmt::format("{:.6g} {:.6g} {}\n", r.ma, r.tanb, to_token(r.status));
}

fs::path part_path(const fs::path& out, int worker_index) {
  return fs::path(out.string() + ".part" + std::to_string(worker_index));
}

namespace {

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out)
    throw IoError("short write to '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
      ++j;
    if (j > i)
      out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string evaluate_builtin(const ScanJob& job, const BuiltinKernel& k, const Partition& part) {
  using Clock = std::chrono::steady_clock;
  std::string out;
  out.reserve(part.size() * 24);
  for (std::size_t i = part.lo; i < part.hi; ++i) {
    const GridPoint p = point_at(job.grid, i);
    const auto t0 = Clock::now();
    const Status s = builtin_kernel(p.ma, p.tanb, k.work_units);
    if (job.point_timeout.count() > 0 && Clock::now() - t0 > job.point_timeout)
      throw ScanError(fmt::format("point {} exceeded the evaluation time limit", i),
                      {part.worker_index});
    out += format_line({p.ma, p.tanb, s});
  }
  return out;
}

std::string evaluate_command(const ScanJob& job, const CommandKernel& k, const Partition& part) {
  std::string input;
  std::vector<std::string> expected;
  for (std::size_t i = part.lo; i < part.hi; ++i) {
    const GridPoint p = point_at(job.grid, i);
    std::string line = fmt::format("{:.6g} {:.6g}", p.ma, p.tanb);
    input += line + "\n";
    expected.push_back(std::move(line));
  }
  const fs::path in_path = fs::path(part_path(job.out, part.worker_index).string() + ".in");
  write_file(in_path, input);

  process::SpawnOptions spawn;
  spawn.argv = {"/bin/sh", "-c", k.command};
  spawn.stdin_path = in_path;
  spawn.capture_stderr = false;
  spawn.timeout = job.point_timeout * static_cast<long>(std::max<std::size_t>(part.size(), 1));
  auto result = process::run(spawn);
  fs::remove(in_path);
  if (!result.status.success())
    throw ScanError("external kernel failed (" + result.status.describe() + ")",
                    {part.worker_index});

  std::string out;
  std::istringstream lines(result.output);
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto fields = split_ws(line);
    if (fields.empty())
      continue;
    if (n >= expected.size())
      throw ScanError("external kernel produced more lines than points", {part.worker_index});
    auto want = split_ws(expected[n]);
    if (fields.size() != 3 || fields[0] != want[0] || fields[1] != want[1])
      throw ScanError(fmt::format("external kernel line {} does not answer '{}'", n + 1,
                                  expected[n]),
                      {part.worker_index});
    const GridPoint p = point_at(job.grid, part.lo + n);
    out += format_line({p.ma, p.tanb, status_from_token(fields[2])});
    ++n;
  }
  if (n != expected.size())
    throw ScanError(fmt::format("external kernel answered {} of {} points", n, expected.size()),
                    {part.worker_index});
  return out;
}

std::string evaluate(const ScanJob& job, const Partition& part) {
  if (const auto* b = std::get_if<BuiltinKernel>(&job.kernel))
    return evaluate_builtin(job, *b, part);
  return evaluate_command(job, std::get<CommandKernel>(job.kernel), part);
}

// Worker process body. Never returns.
[[noreturn]] void worker_main(int job_fd, int worker_index) {
  int code = 0;
  try {
    std::string payload;
    char buf[4096];
    for (;;) {
      ssize_t n = ::read(job_fd, buf, sizeof buf);
      if (n < 0 && errno == EINTR)
        continue;
      if (n <= 0)
        break;
      payload.append(buf, static_cast<std::size_t>(n));
    }
    ::close(job_fd);
    const ScanJob job = job_from_json(json::parse(payload));
    const auto parts = partition(job.grid.size(), job.workers);
    run_worker(job, parts.at(static_cast<std::size_t>(worker_index)));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scan worker %d: %s\n", worker_index, e.what());
    code = 1;
  }
  std::fflush(stderr);
  ::_exit(code);
}

} // namespace

void run_worker(const ScanJob& job, const Partition& part) {
  write_file(part_path(job.out, part.worker_index), evaluate(job, part));
}

std::string evaluate_serial(const ScanJob& job) {
  job.grid.validate();
  std::string out(kHeader);
  out += evaluate(job, Partition{0, 0, job.grid.size()});
  return out;
}

ScanSummary run_scan(const ScanJob& job) {
  job.grid.validate();
  if (job.out.empty())
    throw UsageError("scan output path must not be empty");
  const auto start = std::chrono::steady_clock::now();
  ScanSummary summary;
  summary.points = job.grid.size();
  summary.partitions = partition(summary.points, job.workers);

  const std::string payload = to_json(job).dump();
  std::cout.flush();
  std::cerr.flush();

  std::vector<pid_t> pids;
  std::vector<int> failed;
  for (const auto& part : summary.partitions) {
    int fds[2];
    if (::pipe(fds) != 0)
      throw IoError("cannot create worker pipe");
    pid_t pid = ::fork();
    if (pid < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      failed.push_back(part.worker_index);
      break;
    }
    if (pid == 0) {
      ::close(fds[1]);
      worker_main(fds[0], part.worker_index);
    }
    ::close(fds[0]);
    std::size_t off = 0;
    while (off < payload.size()) {
      ssize_t n = ::write(fds[1], payload.data() + off, payload.size() - off);
      if (n < 0 && errno == EINTR)
        continue;
      if (n <= 0)
        break;
      off += static_cast<std::size_t>(n);
    }
    ::close(fds[1]);
    pids.push_back(pid);
  }

  for (std::size_t w = 0; w < pids.size(); ++w) {
    int status = 0;
    while (::waitpid(pids[w], &status, 0) < 0 && errno == EINTR) {
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      failed.push_back(static_cast<int>(w));
  }
  if (!failed.empty()) {
    std::sort(failed.begin(), failed.end());
    std::string which;
    for (int w : failed)
      which += (which.empty() ? "" : ", ") + std::to_string(w);
    throw ScanError("scan failed in worker(s) " + which + "; partial files kept", failed);
  }

  const fs::path tmp = job.out.string() + ".merge";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot write '" + tmp.string() + "'");
    out << kHeader;
    for (const auto& part : summary.partitions) {
      const fs::path pp = part_path(job.out, part.worker_index);
      if (!fs::exists(pp))
        throw ScanError("missing part file of worker " + std::to_string(part.worker_index),
                        {part.worker_index});
      out << read_file(pp);
    }
    out.flush();
    if (!out)
      throw IoError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, job.out);
  for (const auto& part : summary.partitions)
    fs::remove(part_path(job.out, part.worker_index));
  summary.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

std::vector<ScanResult> read_results(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<ScanResult> results;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line.front() == '#')
      continue;
    auto f = split_ws(line);
    if (f.size() != 3)
      throw FormatError("bad scan result line '" + line + "'");
    ScanResult r;
    auto parse = [&](std::string_view s, double& v) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size())
        throw FormatError("bad number in scan result line '" + line + "'");
    };
    parse(f[0], r.ma);
    parse(f[1], r.tanb);
    r.status = status_from_token(f[2]);
    results.push_back(r);
  }
  return results;
}

void split_results(const fs::path& merged, const fs::path& lhc_out, const fs::path& lep_out) {
  std::string lhc = "# MA TANB\n";
  std::string lep = "# MA TANB\n";
  for (const auto& r : read_results(merged)) {
    std::string line = fmt::format("{:.6g} {:.6g}\n", r.ma, r.tanb);
    if (r.status == Status::excluded_lhc)
      lhc += line;
    else if (r.status == Status::excluded_lep)
      lep += line;
  }
  write_file(lhc_out, lhc);
  write_file(lep_out, lep);
}

} // namespace pheno::scan
