#include "simopac/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/rand.h>

#include <memory>
#include <stdexcept>

namespace simopac {

namespace {
constexpr std::uint64_t kScryptN = 16384;
constexpr std::uint32_t kScryptR = 8;
constexpr std::uint32_t kScryptP = 1;
constexpr std::size_t kSaltLen = 16;
constexpr std::size_t kHashLen = 32;
}  // namespace

MacTag hmac_sha256(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> data) {
  struct MacDeleter {
    void operator()(EVP_MAC* m) const { EVP_MAC_free(m); }
    void operator()(EVP_MAC_CTX* c) const { EVP_MAC_CTX_free(c); }
  };
  std::unique_ptr<EVP_MAC, MacDeleter> mac(
      EVP_MAC_fetch(nullptr, "HMAC", nullptr));
  if (!mac) throw std::runtime_error("EVP_MAC_fetch(HMAC) failed");
  std::unique_ptr<EVP_MAC_CTX, MacDeleter> ctx(EVP_MAC_CTX_new(mac.get()));
  if (!ctx) throw std::runtime_error("EVP_MAC_CTX_new failed");

  char digest[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest, 0),
      OSSL_PARAM_construct_end()};

  MacTag out{};
  std::size_t out_len = 0;
  if (EVP_MAC_init(ctx.get(), key.data(), key.size(), params) != 1 ||
      EVP_MAC_update(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_MAC_final(ctx.get(), out.data(), &out_len, out.size()) != 1 ||
      out_len != kMacLen) {
    throw std::runtime_error("HMAC-SHA256 computation failed");
  }
  return out;
}

bool constant_time_equal(std::span<const std::uint8_t> a,
                         std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) return false;
  unsigned diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= a[i] ^ b[i];
  return diff == 0;
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
  return out;
}

namespace {
Bytes scrypt_derive(const std::string& password, std::span<const std::uint8_t> salt) {
  Bytes out(kHashLen);
  if (EVP_PBE_scrypt(password.data(), password.size(), salt.data(), salt.size(),
                     kScryptN, kScryptR, kScryptP, 0 /* default maxmem */,
                     out.data(), out.size()) != 1) {
    throw std::runtime_error("scrypt derivation failed");
  }
  return out;
}
}  // namespace

PasswordRecord hash_password(const std::string& password) {
  PasswordRecord record;
  record.salt = random_bytes(kSaltLen);
  record.hash = scrypt_derive(password, record.salt);
  return record;
}

bool verify_password(const std::string& password, const PasswordRecord& record) {
  if (record.scheme != "scrypt" || record.salt.empty() || record.hash.empty()) {
    return false;
  }
  Bytes derived = scrypt_derive(password, record.salt);
  return constant_time_equal(derived, record.hash);
}

}  // namespace simopac
