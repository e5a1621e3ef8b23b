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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pheno {

/// Base of every domain error raised by the toolkit. `kind()` is a stable
/// machine-readable tag used by the CLI when it reports errors as JSON.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

/// Malformed JSON (or another malformed text format). `position` is the
/// byte offset reported by the parser.
class ParseError : public Error {
public:
  ParseError(const std::string& message, std::size_t position)
      : Error("parse", message), position_(position) {}

  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

/// A document parsed but violates a structural rule. `subject` names the
/// offending entry (an application name, a rule index) and `field` the key.
class ValidationError : public Error {
public:
  ValidationError(std::string subject, std::string field, const std::string& message)
      : Error("validation", message), subject_(std::move(subject)), field_(std::move(field)) {}

  const std::string& subject() const noexcept { return subject_; }
  const std::string& field() const noexcept { return field_; }

private:
  std::string subject_;
  std::string field_;
};

class NotFoundError : public Error {
public:
  enum class What { application, version };

  NotFoundError(What what, std::string name, std::string version_key = {});

  What missing() const noexcept { return what_; }
  const std::string& name() const noexcept { return name_; }
  const std::string& version_key() const noexcept { return version_key_; }

private:
  What what_;
  std::string name_;
  std::string version_key_;
};

/// Dependency cycle. `path` is closed: first and last element are equal.
class CycleError : public Error {
public:
  explicit CycleError(std::vector<std::string> path);

  const std::vector<std::string>& path() const noexcept { return path_; }

private:
  std::vector<std::string> path_;
};

class DanglingDependencyError : public Error {
public:
  DanglingDependencyError(std::string application, std::string dependency);

  const std::string& application() const noexcept { return application_; }
  const std::string& dependency() const noexcept { return dependency_; }

private:
  std::string application_;
  std::string dependency_;
};

class FetchError : public Error {
public:
  explicit FetchError(const std::string& message) : Error("fetch", message) {}
};

class FormatError : public Error {
public:
  explicit FormatError(const std::string& message) : Error("format", message) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

/// Invalid arguments to an operation (e.g. zero workers). The CLI maps it
/// to the usage exit code.
class UsageError : public Error {
public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

class ScanError : public Error {
public:
  ScanError(const std::string& message, std::vector<int> failed_workers)
      : Error("scan", message), failed_workers_(std::move(failed_workers)) {}

  const std::vector<int>& failed_workers() const noexcept { return failed_workers_; }

private:
  std::vector<int> failed_workers_;
};

} // namespace pheno
