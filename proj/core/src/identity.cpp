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

#include "pheno/identity.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "pheno/error.hpp"

namespace pheno::identity {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + " is not valid JSON: " + e.what(), e.byte);
  }
}

std::string read_text(const fs::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string require_string(const json& obj, const char* key, const std::string& subject) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw ValidationError(subject, key, subject + ": '" + key + "' must be a string");
  return it->get<std::string>();
}

bool optional_bool(const json& obj, const char* key, const std::string& subject) {
  auto it = obj.find(key);
  if (it == obj.end())
    return false;
  if (!it->is_boolean())
    throw ValidationError(subject, key, subject + ": '" + key + "' must be a boolean");
  return it->get<bool>();
}

std::vector<std::string> string_list(const json& obj, const char* key) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end())
    return out;
  if (!it->is_array())
    throw ValidationError("assertion", key, std::string("assertion: '") + key + "' must be a list");
  for (const auto& v : *it) {
    if (!v.is_string())
      throw ValidationError("assertion", key,
                            std::string("assertion: '") + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

Timestamp require_time(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer())
    throw ValidationError("assertion", key,
                          std::string("assertion: '") + key + "' must be an integer timestamp");
  return it->get<Timestamp>();
}

json principal_to_json(const Principal& p) {
  return {{"username", p.username},
          {"tenant", p.tenant},
          {"enabled", p.enabled},
          {"created_by", p.created_by == CreatedBy::manual ? "manual" : "auto"}};
}

Principal principal_from_json(const json& j) {
  Principal p;
  p.username = require_string(j, "username", "principal");
  p.tenant = require_string(j, "tenant", "principal");
  p.enabled = j.value("enabled", true);
  p.created_by = j.value("created_by", "manual") == "auto" ? CreatedBy::auto_provisioned
                                                           : CreatedBy::manual;
  return p;
}

// Shared tail of both mapping operations.
Decision admit(PrincipalStore& store, const std::string& username, const std::string& tenant,
               bool auto_create) {
  Decision d;
  d.username = username;
  d.tenant = tenant;
  if (auto existing = store.find(username, tenant)) {
    if (!existing->enabled) {
      d.reason = DenyReason::principal_disabled;
      return d;
    }
    d.allowed = true;
    return d;
  }
  if (!auto_create) {
    d.reason = DenyReason::unknown_principal;
    return d;
  }
  auto [stored, created] =
      store.create_if_absent(Principal{username, tenant, true, CreatedBy::auto_provisioned});
  if (!stored.enabled) {
    d.reason = DenyReason::principal_disabled;
    return d;
  }
  d.allowed = true;
  d.created = created;
  return d;
}

class FileLock {
public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0)
      throw IoError("cannot open lock file '" + path.string() + "'");
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw IoError("cannot lock '" + path.string() + "'");
      }
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

private:
  int fd_ = -1;
};

} // namespace

void validate(const Assertion& a) {
  if (a.subject_dn.empty())
    throw ValidationError("assertion", "subject_dn", "assertion: subject DN must not be empty");
  if (a.not_before >= a.not_after)
    throw ValidationError("assertion", "not_after",
                          "assertion: validity window must satisfy not_before < not_after");
}

Assertion parse_assertion(std::string_view text) {
  json doc = parse_json(text, "assertion");
  if (!doc.is_object())
    throw ValidationError("assertion", "", "assertion must be a JSON object");
  Assertion a;
  a.subject_dn = require_string(doc, "subject_dn", "assertion");
  if (auto it = doc.find("vo"); it != doc.end() && !it->is_null()) {
    if (!it->is_string())
      throw ValidationError("assertion", "vo", "assertion: 'vo' must be a string");
    a.vo = it->get<std::string>();
  }
  a.groups = string_list(doc, "groups");
  a.roles = string_list(doc, "roles");
  a.not_before = require_time(doc, "not_before");
  a.not_after = require_time(doc, "not_after");
  validate(a);
  return a;
}

void MappingConfig::add_vo_rule(std::string vo, std::string tenant, bool auto_create) {
  const std::string subject = "vo_rules[" + std::to_string(vo_rules.size()) + "]";
  if (tenant.empty())
    throw ValidationError(subject, "tenant", subject + ": tenant must not be empty");
  vo_rules.push_back({std::move(vo), std::move(tenant), auto_create});
}

void MappingConfig::add_user_rule(const std::string& pattern, std::string tenant,
                                  bool auto_create) {
  const std::string subject = "user_rules[" + std::to_string(user_rules.size()) + "]";
  if (tenant.empty())
    throw ValidationError(subject, "tenant", subject + ": tenant must not be empty");
  std::regex re;
  try {
    re = std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ValidationError(subject, "pattern",
                          subject + ": pattern '" + pattern + "' does not compile: " + e.what());
  }
  user_rules.push_back({pattern, std::move(re), std::move(tenant), auto_create});
}

MappingConfig MappingConfig::from_json(const json& doc) {
  if (!doc.is_object())
    throw ValidationError("mapping", "", "mapping config must be a JSON object");
  MappingConfig cfg;
  auto rules = [&](const char* key) {
    auto it = doc.find(key);
    if (it == doc.end())
      return json::array();
    if (!it->is_array())
      throw ValidationError("mapping", key, std::string("mapping: '") + key + "' must be a list");
    return *it;
  };
  for (const auto& r : rules("vo_rules")) {
    const std::string subject = "vo_rules[" + std::to_string(cfg.vo_rules.size()) + "]";
    if (!r.is_object())
      throw ValidationError(subject, "", subject + ": rule must be an object");
    cfg.add_vo_rule(require_string(r, "vo", subject), require_string(r, "tenant", subject),
                    optional_bool(r, "auto_create", subject));
  }
  for (const auto& r : rules("user_rules")) {
    const std::string subject = "user_rules[" + std::to_string(cfg.user_rules.size()) + "]";
    if (!r.is_object())
      throw ValidationError(subject, "", subject + ": rule must be an object");
    cfg.add_user_rule(require_string(r, "pattern", subject), require_string(r, "tenant", subject),
                      optional_bool(r, "auto_create", subject));
  }
  return cfg;
}

MappingConfig MappingConfig::parse(std::string_view text) {
  return from_json(parse_json(text, "mapping config"));
}

MappingConfig MappingConfig::load(const fs::path& path) {
  return parse(read_text(path, "mapping config"));
}

json MappingConfig::to_json() const {
  json vo = json::array();
  for (const auto& r : vo_rules)
    vo.push_back({{"vo", r.vo}, {"tenant", r.tenant}, {"auto_create", r.auto_create}});
  json user = json::array();
  for (const auto& r : user_rules)
    user.push_back({{"pattern", r.pattern}, {"tenant", r.tenant}, {"auto_create", r.auto_create}});
  return {{"vo_rules", vo}, {"user_rules", user}};
}

std::optional<Principal> MemoryPrincipalStore::find(const std::string& username,
                                                    const std::string& tenant) const {
  std::lock_guard lock(mu_);
  for (const auto& p : principals_)
    if (p.username == username && p.tenant == tenant)
      return p;
  return std::nullopt;
}

std::pair<Principal, bool> MemoryPrincipalStore::create_if_absent(const Principal& p) {
  std::lock_guard lock(mu_);
  for (const auto& existing : principals_)
    if (existing.username == p.username && existing.tenant == p.tenant)
      return {existing, false};
  principals_.push_back(p);
  return {p, true};
}

std::vector<Principal> MemoryPrincipalStore::list() const {
  std::lock_guard lock(mu_);
  return principals_;
}

JsonFilePrincipalStore::JsonFilePrincipalStore(fs::path path) : path_(std::move(path)) {}

std::vector<Principal> JsonFilePrincipalStore::read() const {
  if (!fs::exists(path_))
    return {};
  json doc = parse_json(read_text(path_, "principal store"), "principal store");
  std::vector<Principal> out;
  const json& list = doc.is_object() ? doc.value("principals", json::array()) : doc;
  if (!list.is_array())
    throw FormatError("principal store '" + path_.string() + "' has no principal list");
  for (const auto& j : list)
    out.push_back(principal_from_json(j));
  return out;
}

void JsonFilePrincipalStore::write(const std::vector<Principal>& principals) const {
  json list = json::array();
  for (const auto& p : principals)
    list.push_back(principal_to_json(p));
  const fs::path tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot write principal store '" + tmp.string() + "'");
    out << json{{"principals", list}}.dump(2) << '\n';
    out.flush();
    if (!out)
      throw IoError("cannot write principal store '" + tmp.string() + "'");
  }
  fs::rename(tmp, path_);
}

std::optional<Principal> JsonFilePrincipalStore::find(const std::string& username,
                                                      const std::string& tenant) const {
  for (auto& p : read())
    if (p.username == username && p.tenant == tenant)
      return p;
  return std::nullopt;
}

std::pair<Principal, bool> JsonFilePrincipalStore::create_if_absent(const Principal& p) {
  FileLock lock(path_.string() + ".lock");
  auto all = read();
  for (const auto& existing : all)
    if (existing.username == p.username && existing.tenant == p.tenant)
      return {existing, false};
  all.push_back(p);
  write(all);
  return {p, true};
}

std::vector<Principal> JsonFilePrincipalStore::list() const { return read(); }

std::string to_string(DenyReason reason) {
  switch (reason) {
  case DenyReason::none:
    return "none";
  case DenyReason::vo_not_allowed:
    return "vo-not-allowed";
  case DenyReason::user_not_allowed:
    return "user-not-allowed";
  case DenyReason::unknown_principal:
    return "unknown-principal";
  case DenyReason::principal_disabled:
    return "principal-disabled";
  case DenyReason::expired:
    return "expired";
  case DenyReason::invalid_assertion:
    return "invalid-assertion";
  }
  return "unknown";
}

json Decision::to_json() const {
  json j{{"allowed", allowed}, {"username", username}};
  if (allowed) {
    j["tenant"] = tenant;
    j["created"] = created;
  } else {
    j["reason"] = to_string(reason);
    if (!tenant.empty())
      j["tenant"] = tenant;
  }
  return j;
}

Decision map_assertion(const MappingConfig& config, PrincipalStore& store, const Assertion& a,
                       Timestamp now) {
  Decision d;
  d.username = a.subject_dn;
  if (a.subject_dn.empty() || a.not_before >= a.not_after) {
    d.reason = DenyReason::invalid_assertion;
    return d;
  }
  if (now < a.not_before || now >= a.not_after) {
    d.reason = DenyReason::expired;
    return d;
  }
  if (a.vo) {
    for (const auto& rule : config.vo_rules)
      if (rule.vo == *a.vo)
        return admit(store, a.subject_dn, rule.tenant, rule.auto_create);
  }
  d.reason = DenyReason::vo_not_allowed;
  return d;
}

Decision map_username(const MappingConfig& config, PrincipalStore& store,
                      const std::string& username) {
  for (const auto& rule : config.user_rules)
    if (std::regex_match(username, rule.regex))
      return admit(store, username, rule.tenant, rule.auto_create);
  Decision d;
  d.username = username;
  d.reason = DenyReason::user_not_allowed;
  return d;
}

} // namespace pheno::identity
