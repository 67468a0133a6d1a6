#include "simopac/fields.hpp"

#include <bit>

namespace simopac {

std::optional<FieldKind> field_kind_from_wire(std::uint8_t v) {
  if (v >= 0x01 && v <= 0x06) return static_cast<FieldKind>(v);
  return std::nullopt;
}

const char* field_kind_name(FieldKind kind) {
  switch (kind) {
    case FieldKind::kText: return "text";
    case FieldKind::kCode: return "code";
    case FieldKind::kDate: return "date";
    case FieldKind::kQuantity: return "quantity";
    case FieldKind::kBoolean: return "boolean";
    case FieldKind::kIdentifier: return "identifier";
  }
  return "unknown";
}

std::optional<FieldKind> field_kind_from_name(const std::string& name) {
  if (name == "text") return FieldKind::kText;
  if (name == "code") return FieldKind::kCode;
  if (name == "date") return FieldKind::kDate;
  if (name == "quantity") return FieldKind::kQuantity;
  if (name == "boolean") return FieldKind::kBoolean;
  if (name == "identifier") return FieldKind::kIdentifier;
  return std::nullopt;
}

bool QuantityValue::operator==(const QuantityValue& other) const {
  return std::bit_cast<std::uint64_t>(magnitude) ==
             std::bit_cast<std::uint64_t>(other.magnitude) &&
         unit == other.unit;
}

FieldValue FieldValue::text(std::uint16_t id, std::string v) {
  return {id, FieldKind::kText, std::move(v)};
}

FieldValue FieldValue::identifier(std::uint16_t id, std::string v) {
  return {id, FieldKind::kIdentifier, std::move(v)};
}

FieldValue FieldValue::code(std::uint16_t id, std::uint8_t system, std::string code) {
  return {id, FieldKind::kCode, CodedValue{system, std::move(code)}};
}

FieldValue FieldValue::date(std::uint16_t id, std::int32_t days) {
  return {id, FieldKind::kDate, days};
}

FieldValue FieldValue::quantity(std::uint16_t id, double magnitude, std::string unit) {
  return {id, FieldKind::kQuantity, QuantityValue{magnitude, std::move(unit)}};
}

FieldValue FieldValue::boolean(std::uint16_t id, bool v) {
  return {id, FieldKind::kBoolean, v};
}

std::size_t encoded_value_length(const FieldValue& v) {
  switch (v.kind) {
    case FieldKind::kText:
    case FieldKind::kIdentifier:
      return std::get<std::string>(v.value).size();
    case FieldKind::kCode:
      return 1 + std::get<CodedValue>(v.value).code.size();
    case FieldKind::kDate:
      return 4;
    case FieldKind::kQuantity:
      return 8 + 1 + std::get<QuantityValue>(v.value).unit.size();
    case FieldKind::kBoolean:
      return 1;
  }
  return 0;
}

std::size_t encoded_entry_length(const FieldValue& v) {
  return 2 + 1 + 2 + encoded_value_length(v);
}

void write_value(ByteWriter& w, const FieldValue& v) {
  switch (v.kind) {
    case FieldKind::kText:
    case FieldKind::kIdentifier:
      w.raw(std::get<std::string>(v.value));
      break;
    case FieldKind::kCode: {
      const auto& coded = std::get<CodedValue>(v.value);
      w.u8(coded.system);
      w.raw(coded.code);
      break;
    }
    case FieldKind::kDate:
      w.i32be(std::get<std::int32_t>(v.value));
      break;
    case FieldKind::kQuantity: {
      const auto& q = std::get<QuantityValue>(v.value);
      w.f64be(q.magnitude);
      w.u8(static_cast<std::uint8_t>(q.unit.size()));
      w.raw(q.unit);
      break;
    }
    case FieldKind::kBoolean:
      w.u8(std::get<bool>(v.value) ? 0x01 : 0x00);
      break;
  }
}

std::optional<FieldValue> read_value(std::uint16_t field_id, FieldKind kind,
                                     std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  FieldValue out;
  out.field_id = field_id;
  out.kind = kind;
  switch (kind) {
    case FieldKind::kText:
    case FieldKind::kIdentifier: {
      out.value = std::string(bytes.begin(), bytes.end());
      return out;
    }
    case FieldKind::kCode: {
      auto system = r.u8();
      if (!system) return std::nullopt;
      out.value = CodedValue{*system, *r.text(r.remaining())};
      return out;
    }
    case FieldKind::kDate: {
      if (bytes.size() != 4) return std::nullopt;
      out.value = static_cast<std::int32_t>(*r.u32be());
      return out;
    }
    case FieldKind::kQuantity: {
      auto magnitude = r.f64be();
      auto unit_len = r.u8();
      if (!magnitude || !unit_len || r.remaining() != *unit_len) return std::nullopt;
      out.value = QuantityValue{*magnitude, *r.text(*unit_len)};
      return out;
    }
    case FieldKind::kBoolean: {
      if (bytes.size() != 1 || bytes[0] > 0x01) return std::nullopt;
      out.value = bytes[0] == 0x01;
      return out;
    }
  }
  return std::nullopt;
}

}  // namespace simopac
