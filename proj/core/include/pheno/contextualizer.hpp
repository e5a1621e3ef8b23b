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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pheno/catalog.hpp"
#include "pheno/resolver.hpp"

namespace pheno::ctx {

/// Where the instance metadata comes from: a URL (any scheme libcurl
/// understands, including file://) or a plain local path.
struct MetadataSource {
  enum class Kind { fixed_url, local_file };

  Kind kind = Kind::local_file;
  std::string location;

  /// Picks `fixed_url` when `location` contains a scheme separator.
  static MetadataSource from_location(std::string location);
};

/// Reads the metadata payload and parses it as an install request. Throws
/// FetchError when unreachable and FormatError when the payload is not a
/// JSON object of strings.
resolver::InstallRequest fetch_metadata(const MetadataSource& source);

/// Fetches a URL body into memory. Throws FetchError.
std::string fetch_url(const std::string& url);

enum class Mode { dry_run, execute };

enum class DownloadOutcome {
  planned,    // dry run: nothing fetched
  downloaded,
  cached,     // archive already present with matching size
  none,       // no download URL for this step
  failed,
};

std::string to_string(DownloadOutcome outcome);

struct StepReport {
  std::string app;
  std::string version_key;
  std::string installer;
  std::string download_url;
  DownloadOutcome download = DownloadOutcome::planned;
  std::string archive;                 // path of the downloaded file, if any
  std::optional<int> exit_status;      // absent when the script did not run
  double duration_s = 0.0;
  std::string output;                  // captured installer output or error text
};

struct ExecutionReport {
  Mode mode = Mode::dry_run;
  std::vector<StepReport> steps;
  /// 1-based index of the failing step; absent on success.
  std::optional<std::size_t> failed_at;

  bool success() const noexcept { return !failed_at.has_value(); }
  std::size_t download_count() const;
};

nlohmann::json to_json(const ExecutionReport& report);
std::string to_table(const ExecutionReport& report);

struct Options {
  Mode mode = Mode::dry_run;
  std::filesystem::path root;
  std::filesystem::path scripts_dir;
  /// Run installers under this account (needs privilege). When unset the
  /// installers run with the caller's credentials.
  std::optional<std::string> run_as;
  /// Zero disables the per-installer time limit.
  std::chrono::seconds installer_timeout{0};
};

/// Resolves the plan, then for each step in order downloads the archive into
/// `root/downloads` and runs the installer from `scripts_dir` with
/// APP_NAME, APP_VERSION, APP_ARCHIVE and INSTALL_PREFIX set. Execution stops
/// at the first failing step. Dry-run reports the plan and touches nothing.
ExecutionReport contextualize(const catalog::Catalog& catalog,
                              const resolver::InstallRequest& request, const Options& options);

ExecutionReport contextualize(const catalog::Catalog& catalog, const MetadataSource& source,
                              const Options& options);

struct ImageRecord {
  std::string id;
  std::map<std::string, std::string> properties;

  bool operator==(const ImageRecord&) const = default;
};

/// Images flagged with `feynapps` = "true", in input order.
std::vector<ImageRecord> filter_ready_images(const std::vector<ImageRecord>& images);

/// Parses a JSON list of `{"id": ..., "properties": {...}}`.
std::vector<ImageRecord> parse_image_registry(std::string_view text);
nlohmann::json to_json(const std::vector<ImageRecord>& images);

} // namespace pheno::ctx
