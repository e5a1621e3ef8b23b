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

#include <benchmark/benchmark.h>

#include <map>
#include <string>

#include "pheno/bench.hpp"
#include "pheno/catalog.hpp"
#include "pheno/resolver.hpp"
#include "pheno/scanner.hpp"
#include "pheno/token.hpp"

namespace {

using namespace pheno;

// Layered catalog: app i depends on every app in the previous layer.
catalog::Catalog layered_catalog(int layers, int width) {
  std::map<std::string, catalog::ApplicationEntry> entries;
  auto name = [](int l, int w) { return "app" + std::to_string(l) + "_" + std::to_string(w); };
  for (int l = 0; l < layers; ++l)
    for (int w = 0; w < width; ++w) {
      catalog::ApplicationEntry e;
      e.name = name(l, w);
      e.defaults.installer = "install.sh";
      e.defaults.base_url = "https://example.org/";
      e.defaults.file = e.name + ".tgz";
      std::vector<std::string> deps;
      if (l > 0)
        for (int k = 0; k < width; ++k)
          deps.push_back(name(l - 1, k));
      e.defaults.dependencies = deps;
      e.versions["1.0"] = catalog::VersionSpec{"1.0", "1.0", {}, nlohmann::json::object()};
      entries.emplace(e.name, e);
    }
  return catalog::Catalog(std::move(entries));
}

void BM_Resolve(benchmark::State& state) {
  const int layers = static_cast<int>(state.range(0));
  auto cat = layered_catalog(layers, 8);
  resolver::InstallRequest req;
  for (int w = 0; w < 8; ++w)
    req.entries["app" + std::to_string(layers - 1) + "_" + std::to_string(w)] = "1.0";
  for (auto _ : state)
    benchmark::DoNotOptimize(resolver::resolve(cat, req));
  state.SetItemsProcessed(state.iterations() * layers * 8);
}
BENCHMARK(BM_Resolve)->Arg(4)->Arg(16)->Arg(64);

void BM_ParseCatalog(benchmark::State& state) {
  const std::string text = catalog::serialize_catalog(layered_catalog(16, 8));
  for (auto _ : state)
    benchmark::DoNotOptimize(catalog::parse_catalog(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseCatalog);

void BM_Partition(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(scan::partition(14400, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_Partition)->Arg(1)->Arg(8)->Arg(64);

void BM_BuiltinKernel(benchmark::State& state) {
  const auto units = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(scan::builtin_kernel(300.0, 10.0, units));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuiltinKernel)->Arg(1000)->Arg(100000);

void BM_EvaluateSerial(benchmark::State& state) {
  scan::ScanJob job;
  job.grid.steps_per_axis = static_cast<int>(state.range(0));
  job.kernel = scan::BuiltinKernel{0};
  job.out = "/dev/null";
  for (auto _ : state)
    benchmark::DoNotOptimize(scan::evaluate_serial(job));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_EvaluateSerial)->Arg(40)->Arg(120);

void BM_TokenIssueVerify(benchmark::State& state) {
  auto key = identity::key_from_string("benchmark-key");
  for (auto _ : state) {
    auto tok = identity::issue_token(key, "/DC=org/CN=bench", "tenant", 3600, 1000);
    benchmark::DoNotOptimize(identity::verify_token(key, identity::encode_token(tok), 1001));
  }
}
BENCHMARK(BM_TokenIssueVerify);

void BM_SpeedupCurve(benchmark::State& state) {
  std::vector<std::pair<int, double>> pts;
  for (int p = 1; p <= 64; ++p)
    pts.emplace_back(p, 100.0 / p);
  for (auto _ : state)
    benchmark::DoNotOptimize(bench::speedup_curve(pts));
}
BENCHMARK(BM_SpeedupCurve);

} // namespace

BENCHMARK_MAIN();
