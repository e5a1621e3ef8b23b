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

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pheno/catalog.hpp"

namespace pheno::oracle {

/// Dependencies of `name` at `version`, read straight from the entry: the
/// version's own list if it has one, else the application's.
inline std::vector<std::string> deps_of(const catalog::ApplicationEntry& e,
                                        const std::string& version) {
  const auto& v = e.versions.at(version);
  if (v.overrides.dependencies)
    return *v.overrides.dependencies;
  return e.defaults.dependencies.value_or(std::vector<std::string>{});
}

inline std::string greatest_version(const catalog::ApplicationEntry& e) {
  std::string best;
  for (const auto& [k, _] : e.versions)
    if (best.empty() || k > best)
      best = k;
  return best;
}

struct Expected {
  /// Selected version per application in the closure.
  std::map<std::string, std::string> selection;
  /// Edges app -> dependencies within the closure.
  std::map<std::string, std::set<std::string>> edges;
  bool cyclic = false;
  /// Lexicographically smallest order satisfying the predicate; empty when
  /// cyclic.
  std::vector<std::string> order;
};

/// Fixed-point closure, reachability-based cycle test and exhaustive
/// permutation search for the least valid order. Intended for small
/// closures only (n! permutations).
inline Expected expected_plan(const catalog::Catalog& cat,
                              const std::map<std::string, std::string>& request) {
  Expected ex;
  ex.selection = request;
  bool grew = true;
  while (grew) {
    grew = false;
    auto snapshot = ex.selection;
    for (const auto& [name, version] : snapshot)
      for (const auto& d : deps_of(cat.at(name), version))
        if (!ex.selection.contains(d)) {
          ex.selection[d] = greatest_version(cat.at(d));
          grew = true;
        }
  }
  for (const auto& [name, version] : ex.selection) {
    auto deps = deps_of(cat.at(name), version);
    ex.edges[name] = std::set<std::string>(deps.begin(), deps.end());
  }

  // Transitive closure; a node reaching itself is on a cycle.
  std::map<std::string, std::set<std::string>> reach = ex.edges;
  for (bool changed = true; changed;) {
    changed = false;
    for (auto& [n, r] : reach) {
      std::set<std::string> add;
      for (const auto& m : r)
        for (const auto& k : reach[m])
          if (!r.contains(k))
            add.insert(k);
      if (!add.empty()) {
        r.insert(add.begin(), add.end());
        changed = true;
      }
    }
  }
  for (const auto& [n, r] : reach)
    if (r.contains(n))
      ex.cyclic = true;
  if (ex.cyclic)
    return ex;

  std::vector<std::string> perm;
  for (const auto& [n, _] : ex.selection)
    perm.push_back(n);
  do {
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < perm.size(); ++i)
      pos[perm[i]] = i;
    bool ok = true;
    for (const auto& [n, deps] : ex.edges)
      for (const auto& d : deps)
        ok = ok && pos[d] < pos[n];
    if (ok) {
      ex.order = perm;
      break;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return ex;
}

/// The dependency predicate on a proposed order: every app once, exactly
/// the closure, each dependency strictly before its dependents.
inline bool satisfies_predicate(const Expected& ex, const std::vector<std::string>& order,
                                const std::map<std::string, std::string>& versions) {
  if (order.size() != ex.selection.size())
    return false;
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i)
    if (!pos.emplace(order[i], i).second)
      return false;
  for (const auto& [name, version] : ex.selection) {
    if (!pos.contains(name))
      return false;
    auto it = versions.find(name);
    if (it == versions.end() || it->second != version)
      return false;
  }
  for (const auto& [n, deps] : ex.edges)
    for (const auto& d : deps)
      if (pos.at(d) >= pos.at(n))
        return false;
  return true;
}

/// Disjoint, covering, contiguous in worker order, sizes within one.
inline bool partition_ok(std::size_t n, int w, const std::vector<std::size_t>& lo,
                         const std::vector<std::size_t>& hi) {
  if (lo.size() != static_cast<std::size_t>(w) || hi.size() != lo.size())
    return false;
  std::vector<int> hits(n, 0);
  std::size_t min_size = n, max_size = 0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i] || hi[i] > n)
      return false;
    for (std::size_t k = lo[i]; k < hi[i]; ++k)
      ++hits[k];
    min_size = std::min(min_size, hi[i] - lo[i]);
    max_size = std::max(max_size, hi[i] - lo[i]);
  }
  for (int h : hits)
    if (h != 1)
      return false;
  return max_size - min_size <= 1;
}

/// First rule in list order whose key equals `key`; its index or nullopt.
template <typename Rules, typename KeyOf>
std::optional<std::size_t> first_match(const Rules& rules, const std::string& key, KeyOf key_of) {
  for (std::size_t i = 0; i < rules.size(); ++i)
    if (key_of(rules[i]) == key)
      return i;
  return std::nullopt;
}

} // namespace pheno::oracle
