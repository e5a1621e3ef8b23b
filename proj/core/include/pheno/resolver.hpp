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
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pheno/catalog.hpp"

namespace pheno::resolver {

/// Applications requested for installation: name -> version key.
struct InstallRequest {
  std::map<std::string, std::string> entries;

  bool empty() const noexcept { return entries.empty(); }
  bool operator==(const InstallRequest&) const = default;
};

/// Parses `{"<AppName>": "<version_key>", ...}`. Throws FormatError when the
/// document is not a JSON object of strings.
InstallRequest parse_request(std::string_view text);
nlohmann::json to_json(const InstallRequest& request);

/// Installation order. Each application appears once and after all of its
/// dependencies.
struct InstallPlan {
  std::vector<catalog::ResolvedApp> steps;

  std::size_t size() const noexcept { return steps.size(); }
  bool empty() const noexcept { return steps.empty(); }
};

nlohmann::json to_json(const InstallPlan& plan);

/// Builds the plan for the transitive dependency closure of `request`.
///
/// Dependencies carry no version; an application reached only as a
/// dependency is installed at its lexicographically greatest version key.
/// A version pinned in the request always wins. Among applications whose
/// dependencies are already placed, the smallest name goes first.
///
/// Throws NotFoundError, DanglingDependencyError or CycleError.
InstallPlan resolve(const catalog::Catalog& catalog, const InstallRequest& request);

/// Every elementary cycle of the whole-catalog dependency graph, where an
/// edge a -> b exists if any version of a depends on b. Each cycle is a
/// closed path that starts at its smallest member. Dangling names are
/// ignored. Cycles are returned in ascending order.
std::vector<std::vector<std::string>> check_cycles(const catalog::Catalog& catalog);

} // namespace pheno::resolver
