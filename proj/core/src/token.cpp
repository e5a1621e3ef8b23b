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

#include "pheno/token.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <fstream>
#include <limits>
#include <sstream>

#include "pheno/error.hpp"

namespace pheno::identity {

namespace {

constexpr std::string_view kPrefix = "pt1.";
constexpr std::size_t kMacSize = 32;

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_i64(Bytes& out, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(u >> shift));
}

void put_string(Bytes& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::optional<std::uint64_t> uint(int bytes) {
    if (data_.size() - pos_ < static_cast<std::size_t>(bytes))
      return std::nullopt;
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v = (v << 8) | data_[pos_++];
    return v;
  }

  std::optional<std::string> string() {
    auto len = uint(4);
    if (!len || data_.size() - pos_ < *len)
      return std::nullopt;
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), *len);
    pos_ += *len;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

// Strict lower-case hex; anything else is malformed.
std::optional<Bytes> from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0)
    return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9')
      return c - '0';
    if (c >= 'a' && c <= 'f')
      return c - 'a' + 10;
    return -1;
  };
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0)
      return std::nullopt;
    out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return out;
}

Bytes mac(std::span<const std::uint8_t> key, std::span<const std::uint8_t> body) {
  Bytes out(EVP_MAX_MD_SIZE);
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), body.data(), body.size(),
           out.data(), &len) == nullptr)
    throw Error("crypto", "HMAC computation failed");
  out.resize(len);
  return out;
}

} // namespace

Bytes canonical_body(const Token& token) {
  Bytes out;
  put_string(out, token.subject);
  put_string(out, token.tenant);
  put_i64(out, token.issued_at);
  put_i64(out, token.expires_at);
  return out;
}

std::string encode_token(const Token& token) {
  std::string out(kPrefix);
  out += to_hex(canonical_body(token));
  out += '.';
  out += to_hex(token.signature);
  return out;
}

std::optional<Token> decode_token(std::string_view encoded) {
  if (!encoded.starts_with(kPrefix))
    return std::nullopt;
  encoded.remove_prefix(kPrefix.size());
  auto dot = encoded.find('.');
  if (dot == std::string_view::npos)
    return std::nullopt;
  auto body = from_hex(encoded.substr(0, dot));
  auto sig = from_hex(encoded.substr(dot + 1));
  if (!body || !sig || sig->size() != kMacSize)
    return std::nullopt;
  Reader r(*body);
  Token t;
  auto subject = r.string();
  auto tenant = r.string();
  auto iat = r.uint(8);
  auto exp = r.uint(8);
  if (!subject || !tenant || !iat || !exp || !r.done())
    return std::nullopt;
  t.subject = std::move(*subject);
  t.tenant = std::move(*tenant);
  t.issued_at = static_cast<std::int64_t>(*iat);
  t.expires_at = static_cast<std::int64_t>(*exp);
  t.signature = std::move(*sig);
  return t;
}

Token issue_token(std::span<const std::uint8_t> key, const std::string& subject,
                  const std::string& tenant, std::int64_t lifetime_s, Timestamp now) {
  if (key.empty())
    throw UsageError("token signing key must not be empty");
  if (lifetime_s <= 0)
    throw UsageError("token lifetime must be positive");
  if (now > std::numeric_limits<Timestamp>::max() - lifetime_s)
    throw UsageError("token lifetime overflows the timestamp range");
  Token t;
  t.subject = subject;
  t.tenant = tenant;
  t.issued_at = now;
  t.expires_at = now + lifetime_s;
  t.signature = mac(key, canonical_body(t));
  return t;
}

Verification verify_token(std::span<const std::uint8_t> key, std::string_view encoded,
                          Timestamp now) {
  Verification v;
  auto token = decode_token(encoded);
  if (!token) {
    v.verdict = Verdict::malformed;
    return v;
  }
  const Bytes expected = mac(key, canonical_body(*token));
  v.token = std::move(token);
  if (expected.size() != v.token->signature.size() ||
      CRYPTO_memcmp(expected.data(), v.token->signature.data(), expected.size()) != 0) {
    v.verdict = Verdict::signature;
    return v;
  }
  if (v.token->expires_at <= v.token->issued_at) {
    v.verdict = Verdict::malformed;
    return v;
  }
  v.verdict = now >= v.token->expires_at ? Verdict::expired : Verdict::valid;
  return v;
}

std::string to_string(Verdict v) {
  switch (v) {
  case Verdict::valid:
    return "valid";
  case Verdict::malformed:
    return "malformed";
  case Verdict::signature:
    return "signature";
  case Verdict::expired:
    return "expired";
  }
  return "unknown";
}

Bytes key_from_string(std::string_view secret) { return Bytes(secret.begin(), secret.end()); }

Bytes load_key(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read signing key '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  auto first = s.find_first_not_of(" \t\r\n");
  auto last = s.find_last_not_of(" \t\r\n");
  if (first == std::string::npos)
    throw UsageError("signing key '" + path + "' is empty");
  return key_from_string(std::string_view(s).substr(first, last - first + 1));
}

} // namespace pheno::identity
