#include "simopac/tag_codec.hpp"

#include <algorithm>
#include <numeric>

#include "simopac/crc16.hpp"

namespace simopac::codec {

namespace {

constexpr std::uint8_t kMagic[3] = {0x43, 0x49, 0x50};  // "CIP"
constexpr std::uint8_t kVersion = 0x01;
constexpr std::uint8_t kFlagMac = 0x01;

CodecError cerr(CodecErrorCode code, std::string detail) {
  return CodecError{code, std::move(detail)};
}

bool serial_is_zero(const identity::Serial& sn) {
  return std::all_of(sn.begin(), sn.end(), [](std::uint8_t b) { return b == 0; });
}

std::optional<CodecError> check_payload(const CipPayload& payload) {
  if (serial_is_zero(payload.sn)) {
    return cerr(CodecErrorCode::kInvalidPayload, "serial number is all-zero");
  }
  if (payload.emr_uri.empty()) {
    return cerr(CodecErrorCode::kInvalidPayload, "EMR URI is empty");
  }
  if (auto uri = identity::parse_emr_uri(payload.emr_uri); !uri) {
    return cerr(CodecErrorCode::kInvalidPayload,
                "EMR URI invalid: " + uri.error().detail);
  }
  return std::nullopt;
}

}  // namespace

const char* codec_error_name(CodecErrorCode code) {
  switch (code) {
    case CodecErrorCode::kUriTooLong: return "UriTooLong";
    case CodecErrorCode::kTooManyFields: return "TooManyFields";
    case CodecErrorCode::kValueTooLong: return "ValueTooLong";
    case CodecErrorCode::kInvalidPayload: return "InvalidPayload";
    case CodecErrorCode::kMacKeyMissing: return "MacKeyMissing";
    case CodecErrorCode::kBadMagic: return "BadMagic";
    case CodecErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case CodecErrorCode::kTruncated: return "Truncated";
    case CodecErrorCode::kCrcMismatch: return "CrcMismatch";
    case CodecErrorCode::kUnknownFieldKind: return "UnknownFieldKind";
    case CodecErrorCode::kLengthOverrun: return "LengthOverrun";
    case CodecErrorCode::kMalformedValue: return "MalformedValue";
    case CodecErrorCode::kRequiredFieldsExceedBudget: return "RequiredFieldsExceedBudget";
    case CodecErrorCode::kAlreadySealed: return "AlreadySealed";
    case CodecErrorCode::kNotSealed: return "NotSealed";
  }
  return "?";
}

TagProfile tag_profile_2k() { return {"TAG-2K", 256}; }
TagProfile tag_profile_32k() { return {"TAG-32K", 4096}; }

std::optional<TagProfile> tag_profile_by_name(const std::string& name) {
  if (name == "TAG-2K") return tag_profile_2k();
  if (name == "TAG-32K") return tag_profile_32k();
  return std::nullopt;
}

std::size_t encoded_size(const CipPayload& payload) {
  std::size_t size = kFixedHeaderLen + payload.emr_uri.size() + kCrcLen;
  for (const auto& f : payload.fields) size += encoded_entry_length(f);
  if (payload.mac_present) size += kMacLen;
  return size;
}

CodecResult<Bytes> encode(const CipPayload& payload,
                          std::span<const std::uint8_t> mac_key) {
  if (auto problem = check_payload(payload)) return *problem;
  if (payload.emr_uri.size() > kMaxUriLen) {
    return cerr(CodecErrorCode::kUriTooLong,
                "URI is " + std::to_string(payload.emr_uri.size()) +
                    " bytes, limit " + std::to_string(kMaxUriLen));
  }
  if (payload.fields.size() > kMaxFieldCount) {
    return cerr(CodecErrorCode::kTooManyFields,
                std::to_string(payload.fields.size()) + " fields, limit 255");
  }
  if (payload.mac_present && mac_key.empty()) {
    return cerr(CodecErrorCode::kMacKeyMissing,
                "payload flags a MAC but no key was supplied");
  }

  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(kMagic, 3));
  w.u8(kVersion);
  w.u8(payload.mac_present ? kFlagMac : 0x00);
  w.raw(std::span<const std::uint8_t>(payload.sn.data(), payload.sn.size()));
  w.u8(static_cast<std::uint8_t>(payload.emr_uri.size()));
  w.raw(payload.emr_uri);
  w.u16be(payload.template_id);
  w.u8(payload.template_version);
  w.u32be(payload.updated_at);
  w.u8(static_cast<std::uint8_t>(payload.fields.size()));
  for (const auto& f : payload.fields) {
    std::size_t value_len = encoded_value_length(f);
    if (value_len > 65535) {
      return cerr(CodecErrorCode::kValueTooLong,
                  "field " + std::to_string(f.field_id) + " encodes to " +
                      std::to_string(value_len) + " bytes");
    }
    w.u16be(f.field_id);
    w.u8(static_cast<std::uint8_t>(f.kind));
    w.u16be(static_cast<std::uint16_t>(value_len));
    write_value(w, f);
  }
  w.u16be(crc16_ccitt_false(w.bytes()));
  if (payload.mac_present) {
    MacTag tag = hmac_sha256(mac_key, w.bytes());
    w.raw(std::span<const std::uint8_t>(tag.data(), tag.size()));
  }
  return w.take();
}

CodecResult<CipPayload> decode(std::span<const std::uint8_t> image) {
  if (image.size() < 5) {
    return cerr(CodecErrorCode::kTruncated,
                "image is " + std::to_string(image.size()) + " bytes");
  }
  if (!std::equal(kMagic, kMagic + 3, image.begin())) {
    return cerr(CodecErrorCode::kBadMagic, "magic bytes are not 'CIP'");
  }
  if (image[3] != kVersion) {
    return cerr(CodecErrorCode::kUnsupportedVersion,
                "version byte 0x" + hex_encode(image.subspan(3, 1)));
  }
  std::uint8_t flags = image[4];
  if ((flags & ~kFlagMac) != 0) {
    // Reserved flag bits mark layouts this decoder does not know.
    return cerr(CodecErrorCode::kUnsupportedVersion,
                "reserved flag bits set: 0x" + hex_encode(image.subspan(4, 1)));
  }
  bool mac_present = (flags & kFlagMac) != 0;

  std::size_t trailer = kCrcLen + (mac_present ? kMacLen : 0);
  if (image.size() < kFixedHeaderLen + trailer) {
    return cerr(CodecErrorCode::kTruncated,
                "image shorter than fixed header plus trailer");
  }
  std::size_t crc_offset = image.size() - trailer;
  std::span<const std::uint8_t> body = image.first(crc_offset);
  std::uint16_t stated_crc =
      static_cast<std::uint16_t>(image[crc_offset] << 8 | image[crc_offset + 1]);
  if (crc16_ccitt_false(body) != stated_crc) {
    return cerr(CodecErrorCode::kCrcMismatch, "CRC check failed");
  }

  ByteReader r(body);
  r.take(5);  // magic, version, flags already inspected
  CipPayload payload;
  payload.mac_present = mac_present;
  auto sn = r.take(8);
  auto uri_len = r.u8();
  if (!sn || !uri_len) return cerr(CodecErrorCode::kTruncated, "header cut short");
  std::copy(sn->begin(), sn->end(), payload.sn.begin());
  auto uri = r.text(*uri_len);
  if (!uri) return cerr(CodecErrorCode::kTruncated, "URI cut short");
  payload.emr_uri = std::move(*uri);

  auto template_id = r.u16be();
  auto template_version = r.u8();
  auto updated_at = r.u32be();
  auto field_count = r.u8();
  if (!template_id || !template_version || !updated_at || !field_count) {
    return cerr(CodecErrorCode::kTruncated, "template header cut short");
  }
  payload.template_id = *template_id;
  payload.template_version = *template_version;
  payload.updated_at = *updated_at;

  for (int i = 0; i < *field_count; ++i) {
    auto field_id = r.u16be();
    auto kind_byte = r.u8();
    auto value_len = r.u16be();
    if (!field_id || !kind_byte || !value_len) {
      return cerr(CodecErrorCode::kTruncated,
                  "field entry " + std::to_string(i) + " cut short");
    }
    auto kind = field_kind_from_wire(*kind_byte);
    if (!kind) {
      return cerr(CodecErrorCode::kUnknownFieldKind,
                  "kind byte 0x" + hex_encode(std::span(&*kind_byte, 1)));
    }
    auto value_bytes = r.take(*value_len);
    if (!value_bytes) {
      return cerr(CodecErrorCode::kLengthOverrun,
                  "field entry " + std::to_string(i) + " value_len " +
                      std::to_string(*value_len) + " overruns the image");
    }
    auto value = read_value(*field_id, *kind, *value_bytes);
    if (!value) {
      return cerr(CodecErrorCode::kMalformedValue,
                  "field entry " + std::to_string(i) + " value bytes malformed");
    }
    payload.fields.push_back(std::move(*value));
  }
  if (r.remaining() != 0) {
    return cerr(CodecErrorCode::kLengthOverrun,
                std::to_string(r.remaining()) + " unexpected bytes before CRC");
  }
  if (serial_is_zero(payload.sn)) {
    return cerr(CodecErrorCode::kMalformedValue, "serial number is all-zero");
  }
  if (payload.emr_uri.empty()) {
    return cerr(CodecErrorCode::kMalformedValue, "EMR URI is empty");
  }
  return payload;
}

CodecResult<FitResult> fit_to_budget(const CipPayload& payload,
                                     const templates::Template& t,
                                     const TagProfile& profile) {
  FitResult result;
  result.payload = payload;
  std::size_t size = encoded_size(result.payload);
  if (size <= profile.capacity_bytes) return result;

  // Index payload fields by drop preference: highest priority number first,
  // then larger entries, then higher field_id.
  struct Droppable {
    std::size_t index;
    std::uint8_t priority;
    std::size_t entry_len;
    std::uint16_t field_id;
  };
  std::vector<Droppable> droppable;
  for (std::size_t i = 0; i < payload.fields.size(); ++i) {
    const auto& v = payload.fields[i];
    const templates::TemplateField* field = t.find_field(v.field_id);
    if (field == nullptr || field->required) continue;
    droppable.push_back({i, field->priority, encoded_entry_length(v), v.field_id});
  }
  std::sort(droppable.begin(), droppable.end(), [](const Droppable& a, const Droppable& b) {
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.entry_len != b.entry_len) return a.entry_len > b.entry_len;
    if (a.field_id != b.field_id) return a.field_id > b.field_id;
    return a.index > b.index;
  });

  std::vector<bool> dropped_index(payload.fields.size(), false);
  for (const auto& d : droppable) {
    if (size <= profile.capacity_bytes) break;
    dropped_index[d.index] = true;
    size -= d.entry_len;
    result.dropped.push_back(d.field_id);
  }
  if (size > profile.capacity_bytes) {
    return cerr(CodecErrorCode::kRequiredFieldsExceedBudget,
                "required fields need " + std::to_string(size) + " bytes, " +
                    profile.name + " holds " + std::to_string(profile.capacity_bytes));
  }
  std::vector<FieldValue> kept;
  for (std::size_t i = 0; i < payload.fields.size(); ++i) {
    if (!dropped_index[i]) kept.push_back(payload.fields[i]);
  }
  result.payload.fields = std::move(kept);
  return result;
}

CodecResult<Bytes> seal(std::span<const std::uint8_t> image,
                        std::span<const std::uint8_t> key) {
  auto payload = decode(image);
  if (!payload) return payload.error();
  if (payload.value().mac_present) {
    return cerr(CodecErrorCode::kAlreadySealed, "image already carries a MAC");
  }
  if (key.empty()) {
    return cerr(CodecErrorCode::kMacKeyMissing, "empty MAC key");
  }
  Bytes sealed(image.begin(), image.end());
  sealed[4] |= 0x01;
  std::span<const std::uint8_t> body(sealed.data(), sealed.size() - kCrcLen);
  std::uint16_t crc = crc16_ccitt_false(body);
  sealed[sealed.size() - 2] = static_cast<std::uint8_t>(crc >> 8);
  sealed[sealed.size() - 1] = static_cast<std::uint8_t>(crc);
  MacTag tag = hmac_sha256(key, sealed);
  sealed.insert(sealed.end(), tag.begin(), tag.end());
  return sealed;
}

CodecResult<bool> verify_seal(std::span<const std::uint8_t> image,
                              std::span<const std::uint8_t> key) {
  auto payload = decode(image);
  if (!payload) return payload.error();
  if (!payload.value().mac_present) {
    return cerr(CodecErrorCode::kNotSealed, "image carries no MAC");
  }
  std::span<const std::uint8_t> covered = image.first(image.size() - kMacLen);
  std::span<const std::uint8_t> stated = image.last(kMacLen);
  MacTag expected = hmac_sha256(key, covered);
  return constant_time_equal(expected, stated);
}

}  // namespace simopac::codec
