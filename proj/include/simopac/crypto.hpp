#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "simopac/bytes.hpp"

namespace simopac {

constexpr std::size_t kMacLen = 32;
using MacTag = std::array<std::uint8_t, kMacLen>;

/// HMAC-SHA256 over `data`, keyed with `key`. Backed by OpenSSL libcrypto.
MacTag hmac_sha256(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> data);

/// Timing-independent equality for MAC and password-hash comparisons.
bool constant_time_equal(std::span<const std::uint8_t> a,
                         std::span<const std::uint8_t> b);

Bytes random_bytes(std::size_t n);

/// Salted scrypt password record (N=16384, r=8, p=1, 32-byte output).
struct PasswordRecord {
  std::string scheme = "scrypt";
  Bytes salt;
  Bytes hash;
};

PasswordRecord hash_password(const std::string& password);
bool verify_password(const std::string& password, const PasswordRecord& record);

}  // namespace simopac
