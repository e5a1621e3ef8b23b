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
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pheno::identity {

/// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

/// A pre-validated VO attribute assertion, as extracted from a proxy
/// certificate by the transport layer.
struct Assertion {
  std::string subject_dn;
  std::optional<std::string> vo;
  std::vector<std::string> groups;
  std::vector<std::string> roles;
  Timestamp not_before = 0;
  Timestamp not_after = 0;
};

/// Throws ValidationError on empty DN or an empty validity window.
Assertion parse_assertion(std::string_view text);
void validate(const Assertion& a);

struct VoRule {
  std::string vo;
  std::string tenant;
  bool auto_create = false;
};

struct UserRule {
  std::string pattern;
  std::regex regex;
  std::string tenant;
  bool auto_create = false;
};

/// Ordered mapping rules. Evaluation is first-match-wins in list order.
struct MappingConfig {
  std::vector<VoRule> vo_rules;
  std::vector<UserRule> user_rules;

  /// Compiles patterns; throws ValidationError on a bad regex or an empty
  /// tenant.
  static MappingConfig from_json(const nlohmann::json& doc);
  static MappingConfig parse(std::string_view text);
  static MappingConfig load(const std::filesystem::path& path);

  void add_vo_rule(std::string vo, std::string tenant, bool auto_create);
  void add_user_rule(const std::string& pattern, std::string tenant, bool auto_create);

  nlohmann::json to_json() const;
};

enum class CreatedBy { manual, auto_provisioned };

struct Principal {
  std::string username;
  std::string tenant;
  bool enabled = true;
  CreatedBy created_by = CreatedBy::manual;

  bool operator==(const Principal&) const = default;
};

/// Principal persistence. `(username, tenant)` is unique and
/// `create_if_absent` is atomic with respect to concurrent callers.
class PrincipalStore {
public:
  virtual ~PrincipalStore() = default;

  virtual std::optional<Principal> find(const std::string& username,
                                        const std::string& tenant) const = 0;
  /// Inserts `p` unless a principal with the same key exists. Returns the
  /// stored principal and whether this call created it.
  virtual std::pair<Principal, bool> create_if_absent(const Principal& p) = 0;
  virtual std::vector<Principal> list() const = 0;
};

class MemoryPrincipalStore final : public PrincipalStore {
public:
  std::optional<Principal> find(const std::string& username,
                                const std::string& tenant) const override;
  std::pair<Principal, bool> create_if_absent(const Principal& p) override;
  std::vector<Principal> list() const override;

private:
  mutable std::mutex mu_;
  std::vector<Principal> principals_;
};

/// JSON file store. Every mutation takes an exclusive lock on a sibling
/// `.lock` file, re-reads the file, and atomically replaces it.
class JsonFilePrincipalStore final : public PrincipalStore {
public:
  explicit JsonFilePrincipalStore(std::filesystem::path path);

  std::optional<Principal> find(const std::string& username,
                                const std::string& tenant) const override;
  std::pair<Principal, bool> create_if_absent(const Principal& p) override;
  std::vector<Principal> list() const override;

  const std::filesystem::path& path() const noexcept { return path_; }

private:
  std::vector<Principal> read() const;
  void write(const std::vector<Principal>& principals) const;

  std::filesystem::path path_;
};

enum class DenyReason {
  none,
  vo_not_allowed,
  user_not_allowed,
  unknown_principal,
  principal_disabled,
  expired,
  invalid_assertion,
};

std::string to_string(DenyReason reason);

struct Decision {
  bool allowed = false;
  DenyReason reason = DenyReason::none;
  std::string username;
  std::string tenant;
  /// True when this call auto-provisioned the principal.
  bool created = false;

  nlohmann::json to_json() const;
};

/// VO-based mapping. The DN is the username; the first rule whose VO equals
/// the assertion's VO picks the tenant.
Decision map_assertion(const MappingConfig& config, PrincipalStore& store, const Assertion& a,
                       Timestamp now);

/// Username mapping for callers that already authenticated the user. The
/// first rule whose pattern matches the whole username picks the tenant.
Decision map_username(const MappingConfig& config, PrincipalStore& store,
                      const std::string& username);

} // namespace pheno::identity
