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

#include "pheno/bench.hpp"

#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "pheno/error.hpp"
#include "pheno/process.hpp"
#include "pheno/scanner.hpp"

namespace pheno::bench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SizeClass c) {
  switch (c) {
  case SizeClass::S:
    return "S";
  case SizeClass::M:
    return "M";
  case SizeClass::L:
    return "L";
  case SizeClass::XL:
    return "XL";
  case SizeClass::R:
    return "R";
  }
  return "R";
}

SizeClass size_class_from_string(std::string_view s) {
  if (s == "S")
    return SizeClass::S;
  if (s == "M")
    return SizeClass::M;
  if (s == "L")
    return SizeClass::L;
  if (s == "XL")
    return SizeClass::XL;
  if (s == "R")
    return SizeClass::R;
  throw FormatError("unknown machine size class '" + std::string(s) + "'");
}

std::optional<double> conventional_ram_gb(SizeClass c) {
  switch (c) {
  case SizeClass::S:
    return 2.0;
  case SizeClass::M:
    return 4.0;
  case SizeClass::L:
    return 7.0;
  case SizeClass::XL:
    return 14.0;
  case SizeClass::R:
    return std::nullopt;
  }
  return std::nullopt;
}

std::string MachineLabel::name() const {
  return fmt::format("{}_{}({})", to_string(size_class), hyperthreading ? "HT" : "nHT", cores);
}

MachineLabel detect_host() {
  MachineLabel m;
  m.size_class = SizeClass::R;
  m.cores = static_cast<int>(process::physical_core_count());
  m.hyperthreading = process::logical_cpu_count() > process::physical_core_count();
  long pages = ::sysconf(_SC_PHYS_PAGES);
  long page_size = ::sysconf(_SC_PAGESIZE);
  if (pages > 0 && page_size > 0)
    m.ram_gb = std::round(static_cast<double>(pages) * static_cast<double>(page_size) /
                          (1024.0 * 1024.0 * 1024.0) * 10.0) /
               10.0;
  return m;
}

std::string BenchRun::name() const {
  if (!label.empty())
    return label;
  if (processes == 1)
    return machine.name();
  return fmt::format("{}_{}({}/{})", to_string(machine.size_class),
                     machine.hyperthreading ? "HT" : "nHT", machine.cores, processes);
}

void validate(const BenchRun& run) {
  const std::string n = run.name();
  if (run.processes < 1)
    throw ValidationError(n, "processes", n + ": process count must be at least 1");
  if (run.records.empty())
    throw ValidationError(n, "records", n + ": run has no timing records");
  if (!run.summary && !run.failed && static_cast<int>(run.records.size()) != run.processes)
    throw ValidationError(n, "records",
                          fmt::format("{}: {} records for {} processes", n, run.records.size(),
                                      run.processes));
  for (const auto& r : run.records) {
    if (!(r.real_s > 0.0) || !std::isfinite(r.real_s))
      throw ValidationError(n, "real_s", n + ": real time must be positive");
    if (r.user_s < 0.0 || (r.sys_s && *r.sys_s < 0.0))
      throw ValidationError(n, "user_s", n + ": CPU times must be non-negative");
  }
}

json to_json(const TimingRecord& r) {
  json j{{"real_s", r.real_s}, {"user_s", r.user_s}};
  j["sys_s"] = r.sys_s ? json(*r.sys_s) : json(nullptr);
  if (r.max_rss_kb)
    j["max_rss_kb"] = *r.max_rss_kb;
  if (!r.label.empty())
    j["row"] = r.label;
  return j;
}

json to_json(const BenchRun& run) {
  json records = json::array();
  for (const auto& r : run.records)
    records.push_back(to_json(r));
  json j{{"machine",
          {{"size_class", to_string(run.machine.size_class)},
           {"cores", run.machine.cores},
           {"hyperthreading", run.machine.hyperthreading},
           {"ram_gb", run.machine.ram_gb}}},
         {"phase", run.phase},
         {"processes", run.processes},
         {"records", records}};
  if (!run.label.empty())
    j["label"] = run.label;
  if (run.summary)
    j["summary"] = true;
  if (run.multithreaded)
    j["multithreaded"] = true;
  if (run.failed)
    j["failed"] = true;
  return j;
}

BenchRun run_from_json(const json& doc) {
  try {
    BenchRun run;
    const auto& m = doc.at("machine");
    run.machine.size_class = size_class_from_string(m.at("size_class").get<std::string>());
    run.machine.cores = m.at("cores").get<int>();
    run.machine.hyperthreading = m.at("hyperthreading").get<bool>();
    run.machine.ram_gb =
        m.value("ram_gb", conventional_ram_gb(run.machine.size_class).value_or(0.0));
    run.phase = doc.at("phase").get<std::string>();
    run.processes = doc.at("processes").get<int>();
    run.label = doc.value("label", "");
    run.summary = doc.value("summary", false);
    run.multithreaded = doc.value("multithreaded", false);
    run.failed = doc.value("failed", false);
    for (const auto& r : doc.at("records")) {
      TimingRecord t;
      t.real_s = r.at("real_s").get<double>();
      t.user_s = r.at("user_s").get<double>();
      if (auto it = r.find("sys_s"); it != r.end() && !it->is_null())
        t.sys_s = it->get<double>();
      if (auto it = r.find("max_rss_kb"); it != r.end() && !it->is_null())
        t.max_rss_kb = it->get<long>();
      t.label = r.value("row", "");
      run.records.push_back(std::move(t));
    }
    validate(run);
    return run;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed benchmark run: ") + e.what());
  }
}

std::vector<BenchRun> load_runs(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open benchmark file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("benchmark file '" + path.string() + "' is not valid JSON: " + e.what(),
                     e.byte);
  }
  std::vector<BenchRun> runs;
  if (doc.is_array()) {
    for (const auto& j : doc)
      runs.push_back(run_from_json(j));
  } else {
    runs.push_back(run_from_json(doc));
  }
  return runs;
}

void save_runs(const fs::path& path, const std::vector<BenchRun>& runs) {
  json doc;
  if (runs.size() == 1) {
    doc = to_json(runs.front());
  } else {
    doc = json::array();
    for (const auto& r : runs)
      doc.push_back(to_json(r));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

Workload parse_workload(std::string_view spec, std::uint64_t work_units) {
  if (spec == "builtin")
    return BuiltinWorkload{work_units};
  if (spec.starts_with("cmd:") && spec.size() > 4)
    return CommandWorkload{std::string(spec.substr(4))};
  throw UsageError("workload must be 'builtin' or 'cmd:<command>', got '" + std::string(spec) +
                   "'");
}

BenchRun run_concurrent(const Workload& workload, int processes, std::string phase) {
  if (processes < 1)
    throw UsageError("process count must be at least 1");

  BenchRun run;
  run.machine = detect_host();
  run.processes = processes;
  run.phase = std::move(phase);

  int barrier[2];
  if (::pipe2(barrier, O_CLOEXEC) != 0)
    throw IoError("cannot create launch barrier");
  std::cout.flush();
  std::cerr.flush();

  std::vector<pid_t> pids;
  pid_t group = 0;
  for (int i = 0; i < processes; ++i) {
    pid_t pid = ::fork();
    if (pid < 0)
      break;
    if (pid == 0) {
      ::setpgid(0, group);
      ::close(barrier[1]);
      char c;
      while (::read(barrier[0], &c, 1) < 0 && errno == EINTR) {
      }
      ::close(barrier[0]);
      if (const auto* b = std::get_if<BuiltinWorkload>(&workload)) {
        scan::builtin_kernel(300.0, 10.0, b->work_units);
        ::_exit(0);
      }
      int devnull = ::open("/dev/null", O_WRONLY);
      if (devnull >= 0)
        ::dup2(devnull, STDOUT_FILENO);
      const std::string& cmd = std::get<CommandWorkload>(workload).command;
      ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    if (group == 0)
      group = pid;
    ::setpgid(pid, group);
    pids.push_back(pid);
  }
  ::close(barrier[0]);

  // Release every child at once.
  const auto release = std::chrono::steady_clock::now();
  ::close(barrier[1]);

  std::map<pid_t, TimingRecord> by_pid;
  for (std::size_t reaped = 0; reaped < pids.size();) {
    int status = 0;
    struct rusage usage{};
    pid_t pid = ::wait4(-group, &status, 0, &usage);
    if (pid < 0) {
      if (errno == EINTR)
        continue;
      break;
    }
    const auto end = std::chrono::steady_clock::now();
    TimingRecord t;
    t.real_s = std::chrono::duration<double>(end - release).count();
    t.user_s = process::seconds(usage.ru_utime);
    t.sys_s = process::seconds(usage.ru_stime);
    t.max_rss_kb = usage.ru_maxrss;
    by_pid[pid] = t;
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      run.failed = true;
    ++reaped;
  }
  if (static_cast<int>(pids.size()) != processes)
    run.failed = true;
  for (pid_t pid : pids)
    if (auto it = by_pid.find(pid); it != by_pid.end())
      run.records.push_back(it->second);
  return run;
}

const TimingRecord& slowest(const BenchRun& run) {
  if (run.records.empty())
    throw ValidationError(run.name(), "records", "cannot take the slowest of an empty run");
  const TimingRecord* best = &run.records.front();
  for (const auto& r : run.records)
    if (r.real_s > best->real_s)
      best = &r;
  return *best;
}

const TimingRecord& fastest(const BenchRun& run) {
  if (run.records.empty())
    throw ValidationError(run.name(), "records", "cannot take the fastest of an empty run");
  const TimingRecord* best = &run.records.front();
  for (const auto& r : run.records)
    if (r.real_s < best->real_s)
      best = &r;
  return *best;
}

std::optional<double> sys_pct(const TimingRecord& t) {
  if (!t.sys_s)
    return std::nullopt;
  if (!(t.real_s > 0.0))
    throw ValidationError("record", "real_s", "real time must be positive");
  return 100.0 * *t.sys_s / t.real_s;
}

double degradation_pct(const TimingRecord& candidate, const TimingRecord& baseline) {
  if (!(baseline.real_s > 0.0))
    throw ValidationError("baseline", "real_s", "baseline real time must be positive");
  return 100.0 * (candidate.real_s - baseline.real_s) / baseline.real_s;
}

std::vector<std::pair<int, double>> speedup_curve(std::vector<std::pair<int, double>> runs) {
  std::sort(runs.begin(), runs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const auto ones = std::count_if(runs.begin(), runs.end(), [](const auto& r) { return r.first == 1; });
  if (ones == 0)
    throw ValidationError("speedup", "processes", "speedup curve needs a P = 1 baseline");
  if (ones > 1)
    throw ValidationError("speedup", "processes", "ambiguous baseline: more than one P = 1 entry");
  double t1 = 0.0;
  for (const auto& [p, t] : runs) {
    if (p < 1)
      throw ValidationError("speedup", "processes", "process counts must be positive");
    if (!(t > 0.0))
      throw ValidationError("speedup", "time", "wall times must be positive");
    if (p == 1)
      t1 = t;
  }
  std::vector<std::pair<int, double>> curve;
  for (const auto& [p, t] : runs)
    curve.emplace_back(p, p == 1 ? 1.0 : t1 / t);
  return curve;
}

BenchReport analyze(const std::vector<BenchRun>& runs, const std::vector<BenchRun>& baselines) {
  BenchReport report;
  for (const auto& run : runs) {
    RunSummary s;
    s.name = run.name();
    s.phase = run.phase;
    s.processes = run.processes;
    s.slowest = slowest(run);
    s.fastest = fastest(run);
    s.sys_pct = sys_pct(s.slowest);
    const BenchRun* match = nullptr;
    for (const auto& b : baselines) {
      if (b.phase != run.phase || b.processes != run.processes)
        continue;
      if (b.machine.cores == run.machine.cores) {
        match = &b;
        break;
      }
      if (match == nullptr)
        match = &b;
    }
    if (match != nullptr) {
      s.baseline = match->name();
      s.degradation_pct = degradation_pct(s.slowest, slowest(*match));
    }
    report.runs.push_back(std::move(s));
  }

  // One curve per machine and phase that has a single-process run.
  std::map<std::pair<std::string, std::string>, std::map<int, double>> groups;
  for (const auto& run : runs) {
    auto& g = groups[{run.machine.name(), run.phase}];
    g.emplace(run.processes, slowest(run).real_s);
  }
  for (const auto& [key, points] : groups) {
    if (points.size() < 2 || !points.contains(1))
      continue;
    std::vector<std::pair<int, double>> pts(points.begin(), points.end());
    report.speedups.push_back({key.first, key.second, speedup_curve(std::move(pts))});
  }
  return report;
}

json to_json(const BenchReport& report) {
  json runs = json::array();
  for (const auto& s : report.runs) {
    json j{{"name", s.name},
           {"phase", s.phase},
           {"processes", s.processes},
           {"max", to_json(s.slowest)},
           {"min", to_json(s.fastest)},
           {"sys_pct", s.sys_pct ? json(*s.sys_pct) : json(nullptr)}};
    if (s.baseline) {
      j["baseline"] = *s.baseline;
      j["degradation_pct"] = *s.degradation_pct;
    }
    runs.push_back(std::move(j));
  }
  json speedups = json::array();
  for (const auto& c : report.speedups) {
    json pts = json::array();
    for (const auto& [p, sp] : c.points)
      pts.push_back({{"processes", p}, {"speedup", sp}});
    speedups.push_back({{"machine", c.machine}, {"phase", c.phase}, {"points", pts}});
  }
  return {{"runs", runs}, {"speedups", speedups}};
}

std::string to_table(const BenchReport& report) {
  std::string out = fmt::format("{:<14} {:<8} {:>10} {:>10} {:>10} {:>10} {:>7} {:>8}  {}\n",
                                "RUN", "PHASE", "MAX.REAL", "MAX.USER", "MAX.SYS", "MIN.REAL",
                                "SYS%", "DEGR%", "BASELINE");
  for (const auto& s : report.runs) {
    out += fmt::format(
        "{:<14} {:<8} {:>10.2f} {:>10.2f} {:>10} {:>10.2f} {:>7} {:>8}  {}\n", s.name, s.phase,
        s.slowest.real_s, s.slowest.user_s,
        s.slowest.sys_s ? fmt::format("{:.2f}", *s.slowest.sys_s) : "n/a", s.fastest.real_s,
        s.sys_pct ? fmt::format("{:.2f}", *s.sys_pct) : "n/a",
        s.degradation_pct ? fmt::format("{:+.2f}", *s.degradation_pct) : "-",
        s.baseline.value_or(""));
  }
  for (const auto& c : report.speedups) {
    out += fmt::format("speedup {} {}:", c.machine, c.phase);
    for (const auto& [p, sp] : c.points)
      out += fmt::format(" P={}:{:.3f}", p, sp);
    out += '\n';
  }
  return out;
}

} // namespace pheno::bench
