#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace simopac {

// Timestamps cross three representations: epoch seconds inside the process
// and on tag images, ISO-8601 UTC in JSON bodies and logs, and
// YYYYMMDDHHMMSS in HL7-lite fields.

std::string iso8601_utc(std::int64_t epoch_seconds);
std::optional<std::int64_t> parse_iso8601_utc(const std::string& text);

/// "20240105101500" -> epoch seconds; rejects anything but 14 digits
/// encoding a real calendar instant.
std::optional<std::int64_t> parse_hl7_timestamp(const std::string& text);
std::string format_hl7_timestamp(std::int64_t epoch_seconds);

/// "19800501" -> days since 1970-01-01 (negative before 1970).
std::optional<std::int32_t> parse_hl7_date(const std::string& text);
std::string format_date_days(std::int32_t days_since_epoch);

/// "1980-05-01" (the format_date_days shape) -> days since 1970-01-01.
std::optional<std::int32_t> parse_date_days(const std::string& text);

}  // namespace simopac
