#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "simopac/fields.hpp"
#include "simopac/identity.hpp"
#include "simopac/result.hpp"
#include "simopac/templates.hpp"

namespace simopac::summary {

/// The JSON document shape shared by the service's summary endpoint, `tag
/// write --from`, and `tag read --format json`. Field values survive the
/// JSON round trip bit-exactly (non-finite quantity magnitudes travel as raw
/// bit patterns).
struct SummaryDoc {
  identity::Serial patient_sn{};
  std::string emr_uri;  // optional
  std::uint16_t template_id = 0;
  std::uint8_t version = 0;
  std::optional<std::int64_t> generated_at;
  std::vector<FieldValue> values;
};

/// One field value as a JSON object text: {"field_id", "kind", "value"} plus
/// "name" when the template knows the field.
std::string field_value_to_json(const FieldValue& v, const templates::Template* t = nullptr);
Result<FieldValue, std::string> field_value_from_json(const std::string& object_text);

std::string summary_to_json(const SummaryDoc& doc, const templates::Template* t = nullptr);
Result<SummaryDoc, std::string> summary_from_json(const std::string& text);

}  // namespace simopac::summary
