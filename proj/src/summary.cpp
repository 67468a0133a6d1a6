#include "simopac/summary.hpp"

#include <bit>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "simopac/terminology.hpp"
#include "simopac/timeutil.hpp"

namespace simopac::summary {
namespace {

using nlohmann::json;

json value_to_json_obj(const FieldValue& v, const templates::Template* t) {
  json obj;
  obj["field_id"] = v.field_id;
  obj["kind"] = field_kind_name(v.kind);
  if (t != nullptr) {
    if (auto f = t->find_field(v.field_id); f != nullptr) obj["name"] = f->name;
  }
  switch (v.kind) {
    case FieldKind::kText:
    case FieldKind::kIdentifier:
      obj["value"] = std::get<std::string>(v.value);
      break;
    case FieldKind::kCode: {
      const auto& c = std::get<CodedValue>(v.value);
      json cv;
      if (auto sys = term::system_from_wire(c.system); sys.has_value())
        cv["system"] = term::system_name(*sys);
      else
        cv["system"] = c.system;  // numeric for systems this build cannot name
      cv["code"] = c.code;
      obj["value"] = std::move(cv);
      break;
    }
    case FieldKind::kDate:
      obj["value"] = format_date_days(std::get<std::int32_t>(v.value));
      break;
    case FieldKind::kQuantity: {
      const auto& q = std::get<QuantityValue>(v.value);
      json qv;
      if (std::isfinite(q.magnitude)) {
        qv["magnitude"] = q.magnitude;
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llX",
                      static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(q.magnitude)));
        qv["magnitude_bits"] = buf;
      }
      qv["unit"] = q.unit;
      obj["value"] = std::move(qv);
      break;
    }
    case FieldKind::kBoolean:
      obj["value"] = std::get<bool>(v.value);
      break;
  }
  return obj;
}

Result<FieldValue, std::string> value_from_json_obj(const json& obj) {
  if (!obj.is_object() || !obj.contains("field_id") || !obj.contains("kind") ||
      !obj.contains("value"))
    return std::string("field value needs field_id, kind and value");
  if (!obj["field_id"].is_number_unsigned() || obj["field_id"].get<std::uint64_t>() > 0xFFFF)
    return std::string("field_id out of range");
  auto id = static_cast<std::uint16_t>(obj["field_id"].get<std::uint64_t>());
  auto kind = field_kind_from_name(obj["kind"].get<std::string>());
  if (!kind.has_value()) return std::string("unknown field kind " + obj["kind"].dump());
  const json& val = obj["value"];

  switch (*kind) {
    case FieldKind::kText:
    case FieldKind::kIdentifier:
      if (!val.is_string()) return std::string("text value must be a JSON string");
      return *kind == FieldKind::kText ? FieldValue::text(id, val.get<std::string>())
                                       : FieldValue::identifier(id, val.get<std::string>());
    case FieldKind::kCode: {
      if (!val.is_object() || !val.contains("system") || !val.contains("code"))
        return std::string("code value needs system and code");
      std::uint8_t system = 0;
      if (val["system"].is_string()) {
        auto sys = term::system_from_name(val["system"].get<std::string>());
        if (!sys.has_value())
          return std::string("unknown code system " + val["system"].dump());
        system = static_cast<std::uint8_t>(*sys);
      } else if (val["system"].is_number_unsigned() &&
                 val["system"].get<std::uint64_t>() <= 0xFF) {
        system = static_cast<std::uint8_t>(val["system"].get<std::uint64_t>());
      } else {
        return std::string("code system must be a name or a byte");
      }
      return FieldValue::code(id, system, val["code"].get<std::string>());
    }
    case FieldKind::kDate: {
      if (!val.is_string()) return std::string("date value must be YYYY-MM-DD");
      auto days = parse_date_days(val.get<std::string>());
      if (!days.has_value()) return std::string("bad date " + val.dump());
      return FieldValue::date(id, *days);
    }
    case FieldKind::kQuantity: {
      if (!val.is_object() || !val.contains("unit") ||
          !(val.contains("magnitude") || val.contains("magnitude_bits")))
        return std::string("quantity value needs magnitude and unit");
      double magnitude = 0.0;
      if (val.contains("magnitude_bits")) {
        const std::string bits = val["magnitude_bits"].get<std::string>();
        if (bits.size() != 16) return std::string("magnitude_bits must be 16 hex digits");
        std::uint64_t raw = 0;
        for (char c : bits) {
          int d;
          if (c >= '0' && c <= '9') d = c - '0';
          else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
          else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
          else return std::string("magnitude_bits must be hex");
          raw = (raw << 4) | static_cast<std::uint64_t>(d);
        }
        magnitude = std::bit_cast<double>(raw);
      } else {
        if (!val["magnitude"].is_number()) return std::string("magnitude must be a number");
        magnitude = val["magnitude"].get<double>();
      }
      return FieldValue::quantity(id, magnitude, val["unit"].get<std::string>());
    }
    case FieldKind::kBoolean:
      if (!val.is_boolean()) return std::string("boolean value must be true or false");
      return FieldValue::boolean(id, val.get<bool>());
  }
  return std::string("unhandled field kind");
}

}  // namespace

std::string field_value_to_json(const FieldValue& v, const templates::Template* t) {
  return value_to_json_obj(v, t).dump();
}

Result<FieldValue, std::string> field_value_from_json(const std::string& object_text) {
  json obj = json::parse(object_text, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded()) return std::string("malformed field value JSON");
  return value_from_json_obj(obj);
}

std::string summary_to_json(const SummaryDoc& doc, const templates::Template* t) {
  json out;
  out["patient_sn"] = identity::format_serial_hex(doc.patient_sn);
  if (!doc.emr_uri.empty()) out["emr_uri"] = doc.emr_uri;
  out["template_id"] = doc.template_id;
  out["version"] = doc.version;
  if (t != nullptr) out["template_name"] = t->name;
  if (doc.generated_at.has_value()) out["generated_at"] = iso8601_utc(*doc.generated_at);
  json values = json::array();
  for (const FieldValue& v : doc.values) values.push_back(value_to_json_obj(v, t));
  out["values"] = std::move(values);
  return out.dump(2);
}

Result<SummaryDoc, std::string> summary_from_json(const std::string& text) {
  json obj = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (!obj.is_object()) return std::string("malformed summary JSON");
  SummaryDoc doc;
  if (obj.contains("patient_sn")) {
    auto sn = identity::parse_serial_hex(obj["patient_sn"].get<std::string>());
    if (!sn.ok()) return std::string("bad patient_sn in summary");
    doc.patient_sn = sn.value();
  }
  doc.emr_uri = obj.value("emr_uri", std::string{});
  if (!obj.contains("template_id") || !obj["template_id"].is_number_unsigned() ||
      obj["template_id"].get<std::uint64_t>() > 0xFFFF)
    return std::string("summary needs a template_id");
  doc.template_id = static_cast<std::uint16_t>(obj["template_id"].get<std::uint64_t>());
  if (!obj.contains("version") || !obj["version"].is_number_unsigned() ||
      obj["version"].get<std::uint64_t>() > 0xFF)
    return std::string("summary needs a template version");
  doc.version = static_cast<std::uint8_t>(obj["version"].get<std::uint64_t>());
  if (obj.contains("generated_at")) {
    auto at = parse_iso8601_utc(obj["generated_at"].get<std::string>());
    if (!at.has_value()) return std::string("bad generated_at");
    doc.generated_at = *at;
  }
  if (!obj.contains("values") || !obj["values"].is_array())
    return std::string("summary needs a values array");
  for (const json& jv : obj["values"]) {
    auto v = value_from_json_obj(jv);
    if (!v.ok()) return v.error();
    doc.values.push_back(std::move(v).value());
  }
  return doc;
}

}  // namespace simopac::summary
