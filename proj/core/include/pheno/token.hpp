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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pheno/identity.hpp"

// Scoped bearer tokens.
//
// Wire form: "pt1." + hex(body) + "." + hex(HMAC-SHA256(key, body)), lower
// case hex only. The body is the canonical serialization:
//
//   u32 len | subject | u32 len | tenant | i64 issued_at | i64 expires_at
//
// with all integers big-endian.

namespace pheno::identity {

using Bytes = std::vector<std::uint8_t>;

struct Token {
  std::string subject;
  std::string tenant;
  Timestamp issued_at = 0;
  Timestamp expires_at = 0;
  Bytes signature;

  bool operator==(const Token&) const = default;
};

/// Throws UsageError when `lifetime_s` is not positive or the key is empty.
Token issue_token(std::span<const std::uint8_t> key, const std::string& subject,
                  const std::string& tenant, std::int64_t lifetime_s, Timestamp now);

enum class Verdict { valid, malformed, signature, expired };

std::string to_string(Verdict v);

struct Verification {
  Verdict verdict = Verdict::malformed;
  std::optional<Token> token;  // decoded token when well formed

  bool valid() const noexcept { return verdict == Verdict::valid; }
};

/// Pure function of its arguments.
Verification verify_token(std::span<const std::uint8_t> key, std::string_view encoded,
                          Timestamp now);

Bytes canonical_body(const Token& token);
std::string encode_token(const Token& token);
/// Returns nullopt on any encoding defect.
std::optional<Token> decode_token(std::string_view encoded);

Bytes key_from_string(std::string_view secret);
/// Reads a key file; surrounding whitespace is stripped.
Bytes load_key(const std::string& path);

} // namespace pheno::identity
