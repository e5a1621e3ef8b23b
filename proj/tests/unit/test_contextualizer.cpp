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

#include <random>

#include <fmt/format.h>

#include "pheno/catalog.hpp"
#include "pheno/contextualizer.hpp"
#include "pheno/error.hpp"
#include "pheno/resolver.hpp"
#include "support.hpp"

using namespace pheno;
using pheno::testing::TempDir;
using pheno::testing::write_file;
namespace fs = std::filesystem;

namespace {

// Two-step world: "top" depends on "base"; archives live under a file://
// mirror and installers under scripts/.
struct World {
  TempDir dir;
  fs::path mirror = dir / "mirror";
  fs::path scripts = dir / "scripts";
  fs::path root = dir / "root";
  catalog::Catalog cat;

  World(const std::string& base_installer, const std::string& top_installer) {
    write_file(mirror / "base-1.tgz", "base archive");
    write_file(mirror / "top-2.tgz", "top archive, a little longer");
    write_file(scripts / "ok.sh",
               "#!/bin/sh\necho \"$APP_NAME $APP_VERSION $APP_ARCHIVE\" > \"$INSTALL_PREFIX/installed\"\n"
               "echo installed $APP_NAME\n");
    write_file(scripts / "fail.sh", "#!/bin/sh\necho boom >&2\nexit 3\n");
    fs::create_directories(root);
    cat = catalog::parse_catalog(fmt::format(R"({{
      "base": {{"installer": "{0}", "base_url": "file://{2}/", "file": "base-1.tgz", "versions": {{"1": {{}}}}}},
      "top": {{"installer": "{1}", "base_url": "file://{2}", "file": "top-2.tgz", "dependencies": ["base"],
               "versions": {{"2": {{}}}}}}}})",
                                             base_installer, top_installer, mirror.string()));
  }

  ctx::Options options(ctx::Mode mode) const {
    ctx::Options o;
    o.mode = mode;
    o.root = root;
    o.scripts_dir = scripts;
    return o;
  }
};

const resolver::InstallRequest kTop{{{"top", "2"}}};

} // namespace

TEST_CASE("ctx: dry run lists the plan and leaves the sandbox untouched") {
  World w("ok.sh", "ok.sh");
  write_file(w.root / "preexisting" / "file.txt", "keep me");
  const auto before = pheno::testing::tree_hash(w.root);
  auto report = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::dry_run));
  CHECK(pheno::testing::tree_hash(w.root) == before);
  REQUIRE(report.steps.size() == 2);
  CHECK(report.steps[0].app == "base");
  CHECK(report.steps[1].app == "top");
  CHECK(report.steps[0].download == ctx::DownloadOutcome::planned);
  CHECK_FALSE(report.steps[0].exit_status.has_value());
  CHECK(report.success());
  CHECK(ctx::to_json(report)["mode"] == "dry-run");
}

TEST_CASE("ctx: dry run does not need a sandbox root") {
  World w("ok.sh", "ok.sh");
  auto opts = w.options(ctx::Mode::dry_run);
  opts.root = w.dir / "does-not-exist";
  CHECK_NOTHROW(ctx::contextualize(w.cat, kTop, opts));
  CHECK_FALSE(fs::exists(opts.root));
}

TEST_CASE("ctx: execute downloads and installs in plan order") {
  World w("ok.sh", "ok.sh");
  auto report = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute));
  REQUIRE(report.success());
  REQUIRE(report.steps.size() == 2);
  CHECK(report.download_count() == 2);
  for (const auto& s : report.steps) {
    CHECK(s.download == ctx::DownloadOutcome::downloaded);
    CHECK(s.exit_status == 0);
    CHECK(fs::exists(s.archive));
    CHECK(s.output.find("installed " + s.app) != std::string::npos);
  }
  CHECK(pheno::testing::slurp(report.steps[1].archive) == "top archive, a little longer");
  auto marker = pheno::testing::slurp(w.root / "apps" / "top" / "2" / "installed");
  CHECK(marker == "top 2 " + report.steps[1].archive + "\n");
  CHECK(report.steps[0].archive == (w.root / "downloads" / "base-1-base-1.tgz").string());
}

TEST_CASE("ctx: a second run reuses cached archives") {
  World w("ok.sh", "ok.sh");
  REQUIRE(ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute)).success());
  auto again = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute));
  REQUIRE(again.success());
  CHECK(again.download_count() == 0);
  for (const auto& s : again.steps)
    CHECK(s.download == ctx::DownloadOutcome::cached);

  // A changed upstream size invalidates the cache entry.
  write_file(w.mirror / "base-1.tgz", "base archive, new release");
  auto third = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute));
  CHECK(third.steps[0].download == ctx::DownloadOutcome::downloaded);
  CHECK(third.steps[1].download == ctx::DownloadOutcome::cached);
}

TEST_CASE("ctx: failing installer stops execution at that step") {
  World w("fail.sh", "ok.sh");
  auto report = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute));
  CHECK_FALSE(report.success());
  CHECK(report.failed_at == 1u);
  REQUIRE(report.steps.size() == 1);
  CHECK(report.steps[0].exit_status == 3);
  CHECK(report.steps[0].output.find("boom") != std::string::npos);
  CHECK_FALSE(fs::exists(w.root / "apps" / "top"));
  CHECK(ctx::to_json(report)["overall"]["failed_at"] == 1);
}

TEST_CASE("ctx: missing installer script fails the step") {
  World w("ok.sh", "missing.sh");
  auto report = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute));
  CHECK(report.failed_at == 2u);
  CHECK_FALSE(report.steps[1].exit_status.has_value());
}

TEST_CASE("ctx: unreachable archive fails the step") {
  World w("ok.sh", "ok.sh");
  fs::remove(w.mirror / "base-1.tgz");
  auto report = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute));
  CHECK(report.failed_at == 1u);
  CHECK(report.steps[0].download == ctx::DownloadOutcome::failed);
}

TEST_CASE("ctx: installer timeout is enforced") {
  World w("ok.sh", "slow.sh");
  write_file(w.scripts / "slow.sh", "#!/bin/sh\nsleep 30\n");
  auto opts = w.options(ctx::Mode::execute);
  opts.installer_timeout = std::chrono::seconds(1);
  auto report = ctx::contextualize(w.cat, kTop, opts);
  CHECK(report.failed_at == 2u);
  CHECK(report.steps[1].duration_s < 10.0);
}

TEST_CASE("ctx: execute mode validates the sandbox root") {
  World w("ok.sh", "ok.sh");
  auto opts = w.options(ctx::Mode::execute);
  opts.root = w.dir / "absent";
  CHECK_THROWS_AS(ctx::contextualize(w.cat, kTop, opts), IoError);
  opts.root.clear();
  CHECK_THROWS_AS(ctx::contextualize(w.cat, kTop, opts), UsageError);
  opts = w.options(ctx::Mode::execute);
  opts.run_as = "no-such-account-xyz";
  CHECK_THROWS_AS(ctx::contextualize(w.cat, kTop, opts), UsageError);
}

TEST_CASE("ctx: metadata from a local file and from a URL") {
  World w("ok.sh", "ok.sh");
  write_file(w.dir / "meta.json", R"({"top": "2"})");
  auto local = ctx::MetadataSource::from_location((w.dir / "meta.json").string());
  CHECK(local.kind == ctx::MetadataSource::Kind::local_file);
  CHECK(ctx::fetch_metadata(local) == kTop);
  auto url = ctx::MetadataSource::from_location("file://" + (w.dir / "meta.json").string());
  CHECK(url.kind == ctx::MetadataSource::Kind::fixed_url);
  CHECK(ctx::fetch_metadata(url) == kTop);
  CHECK_THROWS_AS(ctx::fetch_metadata(ctx::MetadataSource::from_location("file:///nonexistent/x")),
                  FetchError);
  write_file(w.dir / "bad.json", "[1]");
  CHECK_THROWS_AS(
      ctx::fetch_metadata(ctx::MetadataSource::from_location((w.dir / "bad.json").string())),
      FormatError);
}

TEST_CASE("ctx: image filter keeps only flagged images") {
  auto images = ctx::parse_image_registry(R"([
    {"id": "a", "properties": {"feynapps": "true"}},
    {"id": "b", "properties": {"feynapps": "false"}},
    {"id": "c"},
    {"id": "d", "properties": {"feynapps": "true", "os": "sl6"}}])");
  auto ready = ctx::filter_ready_images(images);
  REQUIRE(ready.size() == 2);
  CHECK(ready[0].id == "a");
  CHECK(ready[1].id == "d");
  CHECK_THROWS_AS(ctx::parse_image_registry(R"({"id": "a"})"), FormatError);
  CHECK_THROWS_AS(ctx::parse_image_registry(R"([{"properties": {}}])"), FormatError);
}

TEST_CASE("ctx: table rendering mentions the failing step") {
  World w("fail.sh", "ok.sh");
  auto table = ctx::to_table(ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute)));
  CHECK(table.find("overall: failed at step 1") != std::string::npos);
}

TEST_CASE("ctx: execute with an empty request succeeds with an empty report") {
  World w("ok.sh", "ok.sh");
  auto report = ctx::contextualize(w.cat, resolver::InstallRequest{}, w.options(ctx::Mode::execute));
  CHECK(report.success());
  CHECK(report.steps.empty());
  write_file(w.dir / "empty.json", "{}");
  CHECK(ctx::fetch_metadata(ctx::MetadataSource::from_location((w.dir / "empty.json").string())).empty());
}

TEST_CASE("ctx: execute report order equals the resolver plan order") {
  World w("ok.sh", "ok.sh");
  auto plan = resolver::resolve(w.cat, kTop);
  auto report = ctx::contextualize(w.cat, kTop, w.options(ctx::Mode::execute));
  REQUIRE(report.steps.size() == plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i)
    CHECK(report.steps[i].app == plan.steps[i].name);
}

TEST_CASE("ctx: image filter matches a brute-force filter and keeps order") {
  CHECK(ctx::filter_ready_images({}).empty());
  std::mt19937_64 rng(11);
  std::vector<ctx::ImageRecord> images;
  std::vector<std::string> flagged;
  for (int i = 0; i < 10; ++i) {
    ctx::ImageRecord rec;
    rec.id = "img" + std::to_string(i);
    if (i == 2 || i == 5 || i == 9) {
      rec.properties["feynapps"] = "true";
      flagged.push_back(rec.id);
    } else if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
      rec.properties["feynapps"] = i % 2 == 0 ? "True" : "false";
    }
    images.push_back(rec);
  }
  std::shuffle(images.begin(), images.end(), rng);
  std::vector<std::string> expected;
  for (const auto& img : images)
    if (std::find(flagged.begin(), flagged.end(), img.id) != flagged.end())
      expected.push_back(img.id);
  std::vector<std::string> got;
  for (const auto& img : ctx::filter_ready_images(images))
    got.push_back(img.id);
  CHECK(got == expected);
}
