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

#include "pheno/resolver.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "pheno/error.hpp"

namespace pheno::resolver {

using catalog::Catalog;
using catalog::ResolvedApp;
using nlohmann::json;

InstallRequest parse_request(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("install request is not valid JSON: ") + e.what());
  }
  if (!doc.is_object())
    throw FormatError("install request must be a JSON object mapping application names to "
                      "version keys");
  InstallRequest req;
  for (const auto& [name, val] : doc.items()) {
    if (!val.is_string())
      throw FormatError("install request: version for '" + name + "' must be a string");
    req.entries.emplace(name, val.get<std::string>());
  }
  return req;
}

json to_json(const InstallRequest& request) {
  json j = json::object();
  for (const auto& [name, version] : request.entries)
    j[name] = version;
  return j;
}

json to_json(const InstallPlan& plan) {
  json steps = json::array();
  for (const auto& s : plan.steps)
    steps.push_back(catalog::to_json(s));
  return json{{"steps", std::move(steps)}};
}

namespace {

enum class Mark { unvisited, active, done };

// Depth-first search over the selected applications; throws on the first
// back edge found, reporting the closed path.
void reject_cycles(const std::map<std::string, ResolvedApp>& selected) {
  std::map<std::string, Mark> marks;
  std::vector<std::string> stack;

  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    marks[name] = Mark::active;
    stack.push_back(name);
    std::vector<std::string> deps = selected.at(name).dependencies;
    std::sort(deps.begin(), deps.end());
    for (const auto& dep : deps) {
      Mark m = marks[dep];
      if (m == Mark::active) {
        auto from = std::find(stack.begin(), stack.end(), dep);
        std::vector<std::string> path(from, stack.end());
        path.push_back(dep);
        throw CycleError(std::move(path));
      }
      if (m == Mark::unvisited)
        visit(dep);
    }
    stack.pop_back();
    marks[name] = Mark::done;
  };

  for (const auto& [name, _] : selected)
    if (marks[name] == Mark::unvisited)
      visit(name);
}

} // namespace

InstallPlan resolve(const Catalog& catalog, const InstallRequest& request) {
  std::map<std::string, ResolvedApp> selected;
  std::vector<std::string> pending;

  for (const auto& [name, version] : request.entries) {
    selected.emplace(name, catalog::effective_version(catalog, name, version));
    pending.push_back(name);
  }

  while (!pending.empty()) {
    std::string name = std::move(pending.back());
    pending.pop_back();
    for (const auto& dep : selected.at(name).dependencies) {
      if (selected.contains(dep))
        continue;
      const auto* entry = catalog.find(dep);
      if (entry == nullptr)
        throw DanglingDependencyError(name, dep);
      selected.emplace(dep, catalog::effective_version(catalog, dep,
                                                       catalog::default_version_key(*entry)));
      pending.push_back(dep);
    }
  }

  reject_cycles(selected);

  // Kahn's algorithm with an ordered ready set.
  std::map<std::string, std::size_t> unmet;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& [name, app] : selected) {
    std::set<std::string> unique(app.dependencies.begin(), app.dependencies.end());
    unmet[name] = unique.size();
    for (const auto& dep : unique)
      dependents[dep].push_back(name);
  }
  std::set<std::string> ready;
  for (const auto& [name, count] : unmet)
    if (count == 0)
      ready.insert(name);

  InstallPlan plan;
  while (!ready.empty()) {
    std::string name = *ready.begin();
    ready.erase(ready.begin());
    for (const auto& d : dependents[name])
      if (--unmet[d] == 0)
        ready.insert(d);
    plan.steps.push_back(std::move(selected.at(name)));
  }
  return plan;
}

std::vector<std::vector<std::string>> check_cycles(const Catalog& catalog) {
  std::map<std::string, std::set<std::string>> edges;
  for (const auto& [name, entry] : catalog.entries()) {
    auto& out = edges[name];
    auto add = [&](const std::optional<std::vector<std::string>>& deps) {
      if (!deps)
        return;
      for (const auto& d : *deps)
        if (catalog.contains(d))
          out.insert(d);
    };
    add(entry.defaults.dependencies);
    for (const auto& [_, v] : entry.versions)
      add(v.overrides.dependencies);
  }

  // For each start node, enumerate simple paths through strictly greater
  // nodes that return to the start. Every elementary cycle is found exactly
  // once, rooted at its smallest member.
  std::vector<std::vector<std::string>> cycles;
  std::vector<std::string> path;
  std::set<std::string> on_path;

  std::function<void(const std::string&, const std::string&)> walk =
      [&](const std::string& start, const std::string& node) {
        for (const auto& next : edges[node]) {
          if (next == start) {
            auto cycle = path;
            cycle.push_back(start);
            cycles.push_back(std::move(cycle));
          } else if (next > start && !on_path.contains(next)) {
            path.push_back(next);
            on_path.insert(next);
            walk(start, next);
            on_path.erase(next);
            path.pop_back();
          }
        }
      };

  for (const auto& [start, _] : edges) {
    path = {start};
    on_path = {start};
    walk(start, start);
  }
  std::sort(cycles.begin(), cycles.end());
  return cycles;
}

} // namespace pheno::resolver
