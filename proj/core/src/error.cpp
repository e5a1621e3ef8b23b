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

#include "pheno/error.hpp"

namespace pheno {

namespace {

std::string not_found_message(NotFoundError::What what, const std::string& name,
                              const std::string& version_key) {
  if (what == NotFoundError::What::application)
    return "application '" + name + "' not found in catalog";
  return "version '" + version_key + "' of application '" + name + "' not found in catalog";
}

std::string join_path(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) {
    if (!out.empty())
      out += " -> ";
    out += p;
  }
  return out;
}

} // namespace

NotFoundError::NotFoundError(What what, std::string name, std::string version_key)
    : Error("not-found", not_found_message(what, name, version_key)), what_(what),
      name_(std::move(name)), version_key_(std::move(version_key)) {}

CycleError::CycleError(std::vector<std::string> path)
    : Error("cycle", "dependency cycle: " + join_path(path)), path_(std::move(path)) {}

DanglingDependencyError::DanglingDependencyError(std::string application, std::string dependency)
    : Error("dangling-dependency",
            "application '" + application + "' depends on '" + dependency +
                "' which is not in the catalog"),
      application_(std::move(application)), dependency_(std::move(dependency)) {}

} // namespace pheno
