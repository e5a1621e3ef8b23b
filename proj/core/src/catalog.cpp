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

#include "pheno/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "pheno/error.hpp"

namespace pheno::catalog {

using nlohmann::json;

namespace {

constexpr const char* kAppName = "app_name";
constexpr const char* kBaseUrl = "base_url";
constexpr const char* kFile = "file";
constexpr const char* kDependencies = "dependencies";
constexpr const char* kInstaller = "installer";
constexpr const char* kVersions = "versions";
constexpr const char* kVersionName = "version_name";
constexpr const char* kAppVersion = "app_version";

bool is_field_key(std::string_view key) {
  return key == kAppName || key == kBaseUrl || key == kFile || key == kDependencies ||
         key == kInstaller;
}

std::optional<std::string> string_field(const json& obj, const char* key,
                                        const std::string& subject) {
  auto it = obj.find(key);
  if (it == obj.end())
    return std::nullopt;
  if (!it->is_string())
    throw ValidationError(subject, std::string(key),
                          "'" + subject + "': field '" + std::string(key) + "' must be a string");
  return it->get<std::string>();
}

// Reads the overridable fields of an application or version object.
FieldSet read_fields(const json& obj, const std::string& subject) {
  FieldSet fs;
  fs.app_name = string_field(obj, kAppName, subject);
  fs.base_url = string_field(obj, kBaseUrl, subject);
  fs.file = string_field(obj, kFile, subject);
  fs.installer = string_field(obj, kInstaller, subject);
  if (auto it = obj.find(kDependencies); it != obj.end()) {
    if (!it->is_array())
      throw ValidationError(subject, std::string(kDependencies),
                            "'" + subject + "': field 'dependencies' must be a list of names");
    std::vector<std::string> deps;
    for (const auto& d : *it) {
      if (!d.is_string())
        throw ValidationError(subject, std::string(kDependencies),
                              "'" + subject + "': dependency names must be strings");
      deps.push_back(d.get<std::string>());
    }
    fs.dependencies = std::move(deps);
  }
  return fs;
}

void write_fields(json& obj, const FieldSet& fs) {
  if (fs.app_name)
    obj[kAppName] = *fs.app_name;
  if (fs.base_url)
    obj[kBaseUrl] = *fs.base_url;
  if (fs.file)
    obj[kFile] = *fs.file;
  if (fs.dependencies)
    obj[kDependencies] = *fs.dependencies;
  if (fs.installer)
    obj[kInstaller] = *fs.installer;
}

VersionSpec read_version(const std::string& app, const std::string& key, const json& obj) {
  const std::string subject = app + "/" + key;
  if (!obj.is_object())
    throw ValidationError(app, std::string(kVersions),
                          "'" + subject + "': version entry must be a JSON object");
  VersionSpec v;
  v.version_key = key;
  v.overrides = read_fields(obj, subject);
  auto name = string_field(obj, kVersionName, subject);
  auto alias = string_field(obj, kAppVersion, subject);
  if (name && !name->empty())
    v.version_name = *name;
  else if (alias && !alias->empty())
    v.version_name = *alias;
  else
    v.version_name = key;
  for (const auto& [k, val] : obj.items())
    if (!is_field_key(k) && k != kVersionName && k != kAppVersion)
      v.extra[k] = val;
  return v;
}

ApplicationEntry read_entry(const std::string& name, const json& obj) {
  if (!obj.is_object())
    throw ValidationError(name, "", "'" + name + "': catalog entry must be a JSON object");
  ApplicationEntry e;
  e.name = name;
  e.defaults = read_fields(obj, name);
  if (!e.defaults.installer)
    throw ValidationError(name, std::string(kInstaller),
                          "'" + name + "': missing mandatory field 'installer'");
  if (e.defaults.installer->empty())
    throw ValidationError(name, std::string(kInstaller),
                          "'" + name + "': field 'installer' must not be empty");
  auto vit = obj.find(kVersions);
  if (vit == obj.end())
    throw ValidationError(name, std::string(kVersions),
                          "'" + name + "': missing mandatory field 'versions'");
  if (!vit->is_object())
    throw ValidationError(name, std::string(kVersions),
                          "'" + name + "': field 'versions' must be a JSON object");
  if (vit->empty())
    throw ValidationError(name, std::string(kVersions),
                          "'" + name + "': field 'versions' must not be empty");
  for (const auto& [key, val] : vit->items())
    e.versions.emplace(key, read_version(name, key, val));
  for (const auto& [k, val] : obj.items())
    if (!is_field_key(k) && k != kVersions)
      e.extra[k] = val;
  return e;
}

} // namespace

FieldSet FieldSet::merged_with(const FieldSet& overrides) const {
  FieldSet out = *this;
  if (overrides.app_name)
    out.app_name = overrides.app_name;
  if (overrides.base_url)
    out.base_url = overrides.base_url;
  if (overrides.file)
    out.file = overrides.file;
  if (overrides.dependencies)
    out.dependencies = overrides.dependencies;
  if (overrides.installer)
    out.installer = overrides.installer;
  return out;
}

Catalog::Catalog(std::map<std::string, ApplicationEntry> entries) : entries_(std::move(entries)) {}

bool Catalog::contains(std::string_view name) const { return find(name) != nullptr; }

const ApplicationEntry* Catalog::find(std::string_view name) const {
  auto it = entries_.find(std::string(name));
  return it == entries_.end() ? nullptr : &it->second;
}

const ApplicationEntry& Catalog::at(std::string_view name) const {
  if (const auto* e = find(name))
    return *e;
  throw NotFoundError(NotFoundError::What::application, std::string(name));
}

std::vector<Issue> Catalog::validate() const {
  std::vector<Issue> issues;
  auto check_deps = [&](const std::string& subject, const std::vector<std::string>& deps) {
    for (const auto& d : deps)
      if (!contains(d))
        issues.push_back({subject, std::string(kDependencies),
                          "dependency '" + d + "' is not in the catalog"});
  };
  for (const auto& [name, entry] : entries_) {
    if (!entry.defaults.installer || entry.defaults.installer->empty())
      issues.push_back({name, std::string(kInstaller), "missing mandatory field 'installer'"});
    if (entry.versions.empty())
      issues.push_back({name, std::string(kVersions), "missing mandatory field 'versions'"});
    if (entry.defaults.dependencies)
      check_deps(name, *entry.defaults.dependencies);
    for (const auto& [key, v] : entry.versions)
      if (v.overrides.dependencies)
        check_deps(name + "/" + key, *v.overrides.dependencies);
  }
  return issues;
}

Catalog parse_catalog(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("catalog is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object())
    throw ValidationError("", "", "catalog must be a JSON object");
  std::map<std::string, ApplicationEntry> entries;
  for (const auto& [name, obj] : doc.items())
    entries.emplace(name, read_entry(name, obj));
  return Catalog(std::move(entries));
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open catalog file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_catalog(ss.str());
}

json to_json(const Catalog& catalog) {
  json doc = json::object();
  for (const auto& [name, e] : catalog.entries()) {
    json obj = e.extra;
    write_fields(obj, e.defaults);
    json versions = json::object();
    for (const auto& [key, v] : e.versions) {
      json vobj = v.extra;
      write_fields(vobj, v.overrides);
      vobj[kVersionName] = v.version_name;
      versions[key] = std::move(vobj);
    }
    obj[kVersions] = std::move(versions);
    doc[name] = std::move(obj);
  }
  return doc;
}

std::string serialize_catalog(const Catalog& catalog, int indent) {
  return to_json(catalog).dump(indent);
}

std::string join_url(std::string_view base_url, std::string_view file) {
  if (file.empty())
    return std::string(base_url);
  while (!base_url.empty() && base_url.back() == '/')
    base_url.remove_suffix(1);
  while (!file.empty() && file.front() == '/')
    file.remove_prefix(1);
  if (base_url.empty())
    return std::string(file);
  std::string out(base_url);
  out += '/';
  out += file;
  return out;
}

const std::string& default_version_key(const ApplicationEntry& entry) {
  if (entry.versions.empty())
    throw ValidationError(entry.name, std::string(kVersions),
                          "'" + entry.name + "' has no versions");
  // Greatest key.
  return entry.versions.rbegin()->first;
}

ResolvedApp effective_version(const Catalog& catalog, std::string_view name,
                              std::string_view version_key) {
  const auto& entry = catalog.at(name);
  auto vit = entry.versions.find(std::string(version_key));
  if (vit == entry.versions.end())
    throw NotFoundError(NotFoundError::What::version, entry.name, std::string(version_key));
  const VersionSpec& v = vit->second;
  FieldSet eff = entry.defaults.merged_with(v.overrides);

  ResolvedApp r;
  r.name = entry.name;
  r.version_key = v.version_key;
  r.version_name = v.version_name;
  r.app_name = eff.app_name;
  r.base_url = eff.base_url;
  r.file = eff.file;
  r.dependencies = eff.dependencies.value_or(std::vector<std::string>{});
  r.installer = eff.installer.value_or(std::string{});
  if (r.file)
    r.download_url = join_url(r.base_url.value_or(""), *r.file);
  else
    r.download_url = r.base_url.value_or("");
  return r;
}

json to_json(const ResolvedApp& app) {
  json j;
  j["name"] = app.name;
  j["version"] = app.version_key;
  j["version_name"] = app.version_name;
  j["app_name"] = app.app_name ? json(*app.app_name) : json(nullptr);
  j["base_url"] = app.base_url ? json(*app.base_url) : json(nullptr);
  j["file"] = app.file ? json(*app.file) : json(nullptr);
  j["dependencies"] = app.dependencies;
  j["installer"] = app.installer;
  j["download_url"] = app.download_url;
  return j;
}

} // namespace pheno::catalog
