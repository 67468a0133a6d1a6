#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "simopac/result.hpp"

namespace simopac::identity {

using Serial = std::array<std::uint8_t, 8>;

/// The all-zero serial is reserved as "no tag"; it never identifies a patient.
inline bool is_zero(const Serial& sn) {
  for (std::uint8_t b : sn)
    if (b != 0) return false;
  return true;
}

enum class IdentityErrorCode {
  kMissingSeparator,
  kBadSerialHex,
  kBadScheme,
  kBadHostOrPort,
  kEmptyRealm,
};

struct IdentityError {
  IdentityErrorCode code;
  std::string detail;
};

template <typename T>
using IdentityResult = Result<T, IdentityError>;

/// Parsed form of "simopac://host[:port]/realm". Formatting reproduces the
/// source text exactly: the port is emitted only if it was present.
struct EmrUri {
  std::string host;
  std::optional<std::uint16_t> port;
  std::string realm;

  bool operator==(const EmrUri&) const = default;
};

/// Card identifier SN@URI: 16 uppercase hex digits, '@', then the EMR URI.
struct SnUri {
  Serial sn{};
  EmrUri uri;

  bool operator==(const SnUri&) const = default;
};

struct Demographics {
  std::string family;
  std::string given;
  std::int32_t dob_days = 0;  // days since 1970-01-01
  char sex = 'U';             // M, F or U

  bool operator==(const Demographics&) const = default;
};

enum class MatchVerdict { kMatchedExact, kMatchedProbable, kNoMatch, kAmbiguous };

struct MatchResult {
  MatchVerdict verdict = MatchVerdict::kNoMatch;
  std::optional<Serial> matched_sn;
};

IdentityResult<EmrUri> parse_emr_uri(const std::string& text);
std::string format_emr_uri(const EmrUri& uri);

IdentityResult<SnUri> parse_sn_uri(const std::string& text);
std::string format_sn_uri(const SnUri& id);

IdentityResult<Serial> parse_serial_hex(const std::string& text);
std::string format_serial_hex(const Serial& sn);

/// Case-folds, strips diacritics (Latin-1 supplement and Latin Extended-A
/// coverage) and removes whitespace and hyphens. Idempotent.
std::string normalize_name(const std::string& text);

using MatchProbe = std::variant<Serial, Demographics>;

/// Positive patient identification: a serial probe matches exactly or not
/// at all; a demographics probe matches when the normalized
/// family+given+dob triple equals exactly one candidate.
MatchResult match_patient(const MatchProbe& probe,
                          const std::vector<std::pair<Serial, Demographics>>& candidates);

/// Realm registry: TSV lines of `realm<TAB>host:port`.
struct RealmRegistry {
  std::map<std::string, std::string> addresses;

  std::optional<std::string> lookup(const std::string& realm) const;
};

Result<RealmRegistry, std::string> load_realm_registry(const std::string& path);

}  // namespace simopac::identity
