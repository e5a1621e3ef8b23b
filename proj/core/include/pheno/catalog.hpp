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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pheno::catalog {

/// The overridable subset of an application description. Every member is
/// optional so that the same type describes both application defaults and
/// the partial overrides carried by a version.
struct FieldSet {
  std::optional<std::string> app_name;
  std::optional<std::string> base_url;
  std::optional<std::string> file;
  std::optional<std::vector<std::string>> dependencies;
  std::optional<std::string> installer;

  /// Field-wise merge: a field present in `overrides` replaces ours.
  FieldSet merged_with(const FieldSet& overrides) const;

  bool operator==(const FieldSet&) const = default;
};

struct VersionSpec {
  std::string version_key;
  std::string version_name;
  FieldSet overrides;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const VersionSpec&) const = default;
};

struct ApplicationEntry {
  std::string name;
  /// Application defaults. `installer` is always engaged after parsing.
  FieldSet defaults;
  std::map<std::string, VersionSpec> versions;
  nlohmann::json extra = nlohmann::json::object();

  const std::string& installer() const { return *defaults.installer; }

  bool operator==(const ApplicationEntry&) const = default;
};

/// Fully merged view of one version of one application.
struct ResolvedApp {
  std::string name;
  std::string version_key;
  std::string version_name;
  std::optional<std::string> app_name;
  std::optional<std::string> base_url;
  std::optional<std::string> file;
  std::vector<std::string> dependencies;
  std::string installer;
  std::string download_url;

  bool operator==(const ResolvedApp&) const = default;
};

/// A validation finding from `Catalog::validate`.
struct Issue {
  std::string application;
  std::string field;
  std::string message;

  bool operator==(const Issue&) const = default;
};

/// Immutable after construction; safe to share across readers.
class Catalog {
public:
  Catalog() = default;
  explicit Catalog(std::map<std::string, ApplicationEntry> entries);

  const std::map<std::string, ApplicationEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool contains(std::string_view name) const;

  /// Throws NotFoundError when absent.
  const ApplicationEntry& at(std::string_view name) const;
  const ApplicationEntry* find(std::string_view name) const;

  /// Referential checks that parsing does not perform: every dependency
  /// (application level or version override) names an existing entry.
  std::vector<Issue> validate() const;
  bool is_valid() const { return validate().empty(); }

  bool operator==(const Catalog&) const = default;

private:
  std::map<std::string, ApplicationEntry> entries_;
};

/// Parses a catalog document. Throws ParseError on malformed JSON and
/// ValidationError when an entry lacks `installer` or `versions`, or a field
/// has the wrong JSON type.
Catalog parse_catalog(std::string_view text);
Catalog load_catalog(const std::string& path);

nlohmann::json to_json(const Catalog& catalog);
std::string serialize_catalog(const Catalog& catalog, int indent = 2);

/// Joins a base URL and a relative file name with exactly one '/'.
std::string join_url(std::string_view base_url, std::string_view file);

ResolvedApp effective_version(const Catalog& catalog, std::string_view name,
                              std::string_view version_key);

/// Lexicographically greatest version key of an entry.
const std::string& default_version_key(const ApplicationEntry& entry);

nlohmann::json to_json(const ResolvedApp& app);

} // namespace pheno::catalog
