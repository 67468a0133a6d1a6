#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "simopac/bytes.hpp"

namespace simopac {

/// Value kinds a template field can hold. The numeric values are the wire
/// identifiers used in field entries of a tag image.
enum class FieldKind : std::uint8_t {
  kText = 0x01,
  kCode = 0x02,
  kDate = 0x03,
  kQuantity = 0x04,
  kBoolean = 0x05,
  kIdentifier = 0x06,
};

std::optional<FieldKind> field_kind_from_wire(std::uint8_t v);
const char* field_kind_name(FieldKind kind);
std::optional<FieldKind> field_kind_from_name(const std::string& name);

/// A code in a specific coding system (system ids as registered by the
/// terminology module: LOCAL=0x01, ICD9=0x02, ICD10=0x03, NDL=0x04).
struct CodedValue {
  std::uint8_t system = 0;
  std::string code;

  bool operator==(const CodedValue&) const = default;
};

struct QuantityValue {
  double magnitude = 0.0;
  std::string unit;

  // Bitwise comparison keeps codec round trips honest for every float.
  bool operator==(const QuantityValue& other) const;
};

/// One value slot of a template field, as packed onto the card.
/// `text` backs both kText and kIdentifier; `days` is a date as signed days
/// since 1970-01-01.
struct FieldValue {
  std::uint16_t field_id = 0;
  FieldKind kind = FieldKind::kText;
  std::variant<std::string, CodedValue, std::int32_t, QuantityValue, bool> value;

  bool operator==(const FieldValue&) const = default;

  static FieldValue text(std::uint16_t id, std::string v);
  static FieldValue identifier(std::uint16_t id, std::string v);
  static FieldValue code(std::uint16_t id, std::uint8_t system, std::string code);
  static FieldValue date(std::uint16_t id, std::int32_t days);
  static FieldValue quantity(std::uint16_t id, double magnitude, std::string unit);
  static FieldValue boolean(std::uint16_t id, bool v);
};

/// Encoded length of just the value bytes (without the 5-byte entry header).
std::size_t encoded_value_length(const FieldValue& v);

/// Full on-wire size of a field entry: header (field_id u16, kind u8,
/// value_len u16) plus value bytes.
std::size_t encoded_entry_length(const FieldValue& v);

void write_value(ByteWriter& w, const FieldValue& v);

/// Reads `len` value bytes of the given kind. Returns nullopt when the
/// bytes do not form a well-formed value of that kind.
std::optional<FieldValue> read_value(std::uint16_t field_id, FieldKind kind,
                                     std::span<const std::uint8_t> bytes);

}  // namespace simopac
