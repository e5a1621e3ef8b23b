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

#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "support.hpp"

using nlohmann::json;
using pheno::testing::TempDir;
using pheno::testing::write_file;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = pheno::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string catalog_path() {
  return (pheno::testing::fixture_dir() / "catalog" / "feynapps.json").string();
}

json last_json_line(const std::string& text) {
  auto end = text.find_last_not_of('\n');
  auto start = text.rfind('\n', end);
  return json::parse(text.substr(start == std::string::npos ? 0 : start + 1));
}

} // namespace

TEST_CASE("cli: usage errors exit 2") {
  ::unsetenv("PHENO_CONFIG");
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"scan", "run"}).code == 2);
  auto help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("ctx") != std::string::npos);
  CHECK(run({"ctx", "plan", "--metadata", "/dev/null"}).code == 2);
}

TEST_CASE("cli: ctx plan prints the ordered steps") {
  TempDir dir;
  write_file(dir / "meta.json", R"({"FormCalc": "7.0.2"})");
  auto r = run({"ctx", "plan", "--catalog", catalog_path(), "--metadata", (dir / "meta.json").string()});
  REQUIRE(r.code == 0);
  auto j = json::parse(r.out);
  CHECK(j["steps"][0]["name"] == "FeynHiggs");
  CHECK(j["steps"][1]["name"] == "FormCalc");
}

TEST_CASE("cli: catalog from PHENO_CONFIG, flag wins") {
  TempDir dir;
  write_file(dir / "meta.json", R"({"FormCalc": "7.4"})");
  write_file(dir / "cfg.json", json{{"catalog", catalog_path()}}.dump());
  ::setenv("PHENO_CONFIG", (dir / "cfg.json").c_str(), 1);
  CHECK(run({"ctx", "plan", "--metadata", (dir / "meta.json").string()}).code == 0);
  auto r = run({"ctx", "plan", "--catalog", "/nonexistent.json", "--metadata",
                (dir / "meta.json").string()});
  CHECK(r.code == 1);
  CHECK(last_json_line(r.err)["error"] == "io");
  ::unsetenv("PHENO_CONFIG");
}

TEST_CASE("cli: domain errors are structured JSON on stderr") {
  TempDir dir;
  write_file(dir / "meta.json", R"({"FormCalc": "9.9"})");
  auto r = run({"ctx", "plan", "--catalog", catalog_path(), "--metadata", (dir / "meta.json").string()});
  CHECK(r.code == 1);
  CHECK(last_json_line(r.err)["error"] == "not-found");

  write_file(dir / "cyc.json", R"({"a": {"installer": "i", "dependencies": ["b"], "versions": {"1": {}}},
                                   "b": {"installer": "i", "dependencies": ["a"], "versions": {"1": {}}}})");
  write_file(dir / "ma.json", R"({"a": "1"})");
  r = run({"ctx", "plan", "--catalog", (dir / "cyc.json").string(), "--metadata", (dir / "ma.json").string()});
  CHECK(r.code == 1);
  auto err = last_json_line(r.err);
  CHECK(err["error"] == "cycle");
  CHECK(err["cycle"] == json{"a", "b", "a"});

  r = run({"ctx", "lint", "--catalog", (dir / "cyc.json").string()});
  CHECK(r.code == 1);
  CHECK(last_json_line(r.err)["cycles"].size() == 1);
  CHECK(run({"ctx", "lint", "--catalog", catalog_path()}).code == 0);
}

TEST_CASE("cli: ctx run dry-run and failing execute") {
  TempDir dir;
  write_file(dir / "meta.json", R"({"FormCalc": "7.0.2"})");
  auto dry = run({"ctx", "run", "--dry-run", "--catalog", catalog_path(), "--metadata",
                  (dir / "meta.json").string()});
  REQUIRE(dry.code == 0);
  CHECK(json::parse(dry.out)["overall"] == "success");

  write_file(dir / "cat.json", R"({"a": {"installer": "bad.sh", "versions": {"1": {}}}})");
  write_file(dir / "scripts" / "bad.sh", "exit 9\n");
  write_file(dir / "ma.json", R"({"a": "1"})");
  std::filesystem::create_directories(dir / "root");
  auto ex = run({"ctx", "run", "--catalog", (dir / "cat.json").string(), "--metadata",
                 (dir / "ma.json").string(), "--root", (dir / "root").string(), "--scripts",
                 (dir / "scripts").string(), "--pretty"});
  CHECK(ex.code == 1);
  CHECK(ex.out.find("failed at step 1") != std::string::npos);
  CHECK(last_json_line(ex.err)["failed_at"] == 1);
}

TEST_CASE("cli: auth map-vo, map-user and tokens") {
  TempDir dir;
  write_file(dir / "map.json", R"({"vo_rules": [{"vo": "fusion", "tenant": "fus", "auto_create": true}],
                                   "user_rules": [{"pattern": "ali.*", "tenant": "a", "auto_create": true}]})");
  write_file(dir / "as.json", R"({"subject_dn": "/CN=x", "vo": "fusion", "not_before": 0, "not_after": 100})");
  const auto store = (dir / "store.json").string();
  auto r = run({"auth", "map-vo", "--config", (dir / "map.json").string(), "--store", store,
                "--assertion", (dir / "as.json").string(), "--now", "50"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["created"] == true);
  r = run({"auth", "map-vo", "--config", (dir / "map.json").string(), "--store", store,
           "--assertion", (dir / "as.json").string(), "--now", "50"});
  CHECK(json::parse(r.out)["created"] == false);
  r = run({"auth", "map-vo", "--config", (dir / "map.json").string(), "--store", store,
           "--assertion", (dir / "as.json").string(), "--now", "100"});
  CHECK(r.code == 1);
  CHECK(last_json_line(r.err)["reason"] == "expired");
  CHECK(run({"auth", "map-user", "--config", (dir / "map.json").string(), "--store", store,
             "--username", "alice"}).code == 0);
  CHECK(run({"auth", "map-user", "--config", (dir / "map.json").string(), "--store", store,
             "--username", "bob"}).code == 1);

  write_file(dir / "key", "secret\n");
  r = run({"auth", "token", "issue", "--key-file", (dir / "key").string(), "--subject", "/CN=x",
           "--tenant", "fus", "--lifetime", "60", "--now", "1000"});
  REQUIRE(r.code == 0);
  const std::string tok = json::parse(r.out)["token"];
  CHECK(run({"auth", "token", "verify", "--key-file", (dir / "key").string(), "--token", tok,
             "--now", "1030"}).code == 0);
  auto expired = run({"auth", "token", "verify", "--key-file", (dir / "key").string(), "--token",
                      tok, "--now", "2000"});
  CHECK(expired.code == 1);
  CHECK(last_json_line(expired.err)["verdict"] == "expired");
  ::setenv("PHENO_SIGNING_KEY", "secret", 1);
  CHECK(run({"auth", "token", "verify", "--token", tok, "--now", "1030"}).code == 0);
  ::unsetenv("PHENO_SIGNING_KEY");
  CHECK(run({"auth", "token", "verify", "--token", tok}).code == 2);
}

TEST_CASE("cli: scan run and split") {
  TempDir dir;
  auto out = (dir / "scan.dat").string();
  auto r = run({"scan", "run", "--steps", "8", "--workers", "3", "--work-units", "10", "--out", out});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["points"] == 64);
  CHECK(pheno::testing::slurp(out).rfind("# MA TANB STATUS\n", 0) == 0);
  CHECK(run({"scan", "split", "--in", out, "--lhc", (dir / "lhc").string(), "--lep",
             (dir / "lep").string()}).code == 0);
  CHECK(run({"scan", "run", "--workers", "0", "--out", out}).code == 2);
  CHECK(run({"scan", "run", "--kernel", "cmd:exit 1", "--steps", "2", "--out", out}).code == 1);
}

TEST_CASE("cli: bench run and analyze") {
  TempDir dir;
  auto out = (dir / "run.json").string();
  REQUIRE(run({"bench", "run", "--processes", "2", "--work-units", "1000", "--out", out}).code == 0);
  auto r = run({"bench", "analyze", out});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["runs"].size() == 1);
  auto timing = pheno::testing::fixture_dir() / "timing";
  r = run({"bench", "analyze", (timing / "vm_ht_single.json").string(), "--baseline",
           (timing / "physical_ht_single.json").string(), "--report", "table"});
  CHECK(r.code == 0);
  CHECK(r.out.find("XL_HT(8)") != std::string::npos);
  CHECK(run({"bench", "analyze"}).code == 2);
}

TEST_CASE("cli: stdout is valid JSON whenever a JSON subcommand succeeds") {
  TempDir dir;
  write_file(dir / "meta.json", R"({"FormCalc": "7.4"})");
  write_file(dir / "reg.json", R"([{"id": "a", "properties": {"feynapps": "true"}}])");
  write_file(dir / "map.json", R"({"vo_rules": [{"vo": "v", "tenant": "t", "auto_create": true}]})");
  write_file(dir / "as.json", R"({"subject_dn": "/CN=x", "vo": "v", "not_before": 0, "not_after": 10})");
  write_file(dir / "key", "k");
  auto timing = (pheno::testing::fixture_dir() / "timing" / "vm_ht_multi.json").string();
  const std::vector<std::vector<std::string>> invocations{
      {"ctx", "plan", "--catalog", catalog_path(), "--metadata", (dir / "meta.json").string()},
      {"ctx", "run", "--dry-run", "--catalog", catalog_path(), "--metadata", (dir / "meta.json").string()},
      {"ctx", "images", "--registry", (dir / "reg.json").string()},
      {"ctx", "lint", "--catalog", catalog_path()},
      {"auth", "map-vo", "--config", (dir / "map.json").string(), "--store", (dir / "s.json").string(),
       "--assertion", (dir / "as.json").string(), "--now", "5"},
      {"auth", "token", "issue", "--key-file", (dir / "key").string(), "--subject", "s", "--tenant", "t",
       "--lifetime", "5"},
      {"scan", "run", "--steps", "3", "--out", (dir / "o.dat").string()},
      {"scan", "split", "--in", (dir / "o.dat").string(), "--lhc", (dir / "l1").string(), "--lep",
       (dir / "l2").string()},
      {"bench", "analyze", "--baseline", timing},
  };
  for (const auto& args : invocations) {
    auto r = run(args);
    INFO(args[0] << " " << args[1]);
    REQUIRE(r.code == 0);
    CHECK_NOTHROW((void)json::parse(r.out));
  }
}
