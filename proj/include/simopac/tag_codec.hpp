#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simopac/crypto.hpp"
#include "simopac/fields.hpp"
#include "simopac/identity.hpp"
#include "simopac/result.hpp"
#include "simopac/templates.hpp"

namespace simopac::codec {

/// CIP-1 tag image layout (all integers big-endian):
///
///   offset  size  content
///   0       3     magic "CIP" (0x43 0x49 0x50)
///   3       1     version, 0x01
///   4       1     flags: bit0 = MAC present, bits 1..7 reserved (zero)
///   5       8     serial number
///   13      1     uri_len
///   14      n     EMR URI, UTF-8
///   ..      2     template_id
///   ..      1     template_version
///   ..      4     updated_at, unsigned epoch seconds (wraps in 2106)
///   ..      1     field_count
///   ..      *     field entries: field_id u16, kind u8, value_len u16, value
///   ..      2     CRC-16/CCITT-FALSE over all preceding bytes
///   ..      32    keyed MAC over everything before it (only if flags bit0)
///
/// Value encodings per kind:
///   text/identifier  UTF-8 bytes
///   code             code_system u8 + code UTF-8
///   date             i32 days since 1970-01-01 (signed for pre-1970 births)
///   quantity         IEEE-754 binary64 + unit_len u8 + unit UTF-8
///   boolean          one byte, 0x00 or 0x01

constexpr std::size_t kFixedHeaderLen = 22;  // everything except URI, fields, CRC, MAC
constexpr std::size_t kCrcLen = 2;
constexpr std::size_t kMaxUriLen = 120;
constexpr std::size_t kMaxFieldCount = 255;

struct TagProfile {
  std::string name;
  std::size_t capacity_bytes = 0;  // usable tag memory

  bool operator==(const TagProfile&) const = default;
};

/// Built-in capacity profiles. TAG-2K models a 2-kbit tag, TAG-32K the
/// 32-kbit upper end of common passive tags.
TagProfile tag_profile_2k();
TagProfile tag_profile_32k();
std::optional<TagProfile> tag_profile_by_name(const std::string& name);

struct CipPayload {
  identity::Serial sn{};
  std::string emr_uri;
  std::uint16_t template_id = 0;
  std::uint8_t template_version = 0;
  std::uint32_t updated_at = 0;
  bool mac_present = false;
  std::vector<FieldValue> fields;

  bool operator==(const CipPayload&) const = default;
};

enum class CodecErrorCode {
  // encode
  kUriTooLong,
  kTooManyFields,
  kValueTooLong,
  kInvalidPayload,
  kMacKeyMissing,
  // decode
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kCrcMismatch,
  kUnknownFieldKind,
  kLengthOverrun,
  kMalformedValue,
  // budget
  kRequiredFieldsExceedBudget,
  // seal
  kAlreadySealed,
  kNotSealed,
};

const char* codec_error_name(CodecErrorCode code);

struct CodecError {
  CodecErrorCode code;
  std::string detail;
};

template <typename T>
using CodecResult = Result<T, CodecError>;

/// Exact encoded size of a payload, including CRC and, when the MAC flag is
/// set, the 32-byte MAC. Pure arithmetic; does not validate.
std::size_t encoded_size(const CipPayload& payload);

/// Serializes a payload to CIP-1 bytes. Deterministic: equal payloads yield
/// identical images. `mac_key` is required iff payload.mac_present; the
/// result then carries the keyed MAC and verifies against the same key.
CodecResult<Bytes> encode(const CipPayload& payload,
                          std::span<const std::uint8_t> mac_key = {});

/// Total on arbitrary bytes; never touches the network or any store.
CodecResult<CipPayload> decode(std::span<const std::uint8_t> image);

struct FitResult {
  CipPayload payload;
  std::vector<std::uint16_t> dropped;  // in drop order
};

/// Drops optional fields until the payload fits the profile, lowest
/// clinical priority first (highest priority number). Ties drop the larger
/// encoded entry first, then the higher field_id. Required fields are never
/// dropped; if they alone exceed capacity the declared error is returned.
CodecResult<FitResult> fit_to_budget(const CipPayload& payload,
                                     const templates::Template& t,
                                     const TagProfile& profile);

/// Appends a keyed MAC to an unsealed image (sets the flag bit and reseats
/// the CRC). The image must decode cleanly first.
CodecResult<Bytes> seal(std::span<const std::uint8_t> image,
                        std::span<const std::uint8_t> key);

/// True iff the trailing MAC matches the key. Error if the image does not
/// decode or carries no MAC.
CodecResult<bool> verify_seal(std::span<const std::uint8_t> image,
                              std::span<const std::uint8_t> key);

}  // namespace simopac::codec
