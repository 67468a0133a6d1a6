#include "simopac/timeutil.hpp"

#include <cctype>
#include <cstdio>
#include <ctime>

namespace simopac {

namespace {

bool all_digits(const std::string& s) {
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return !s.empty();
}

int digits(const std::string& s, std::size_t pos, std::size_t len) {
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (s[i] - '0');
  return v;
}

// timegm normalizes out-of-range components, so convert back and compare
// to reject dates like Feb 30.
std::optional<std::int64_t> civil_to_epoch(int year, int month, int day,
                                           int hour, int minute, int second) {
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  std::time_t t = timegm(&tm);
  std::tm back{};
  std::time_t tt = t;
  if (gmtime_r(&tt, &back) == nullptr) return std::nullopt;
  if (back.tm_year != year - 1900 || back.tm_mon != month - 1 ||
      back.tm_mday != day || back.tm_hour != hour || back.tm_min != minute ||
      back.tm_sec != second) {
    return std::nullopt;
  }
  return static_cast<std::int64_t>(t);
}

}  // namespace

std::string iso8601_utc(std::int64_t epoch_seconds) {
  std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

std::optional<std::int64_t> parse_iso8601_utc(const std::string& text) {
  // Accepted shape: YYYY-MM-DDTHH:MM:SSZ
  if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
      text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
    return std::nullopt;
  }
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u, 11u, 12u, 14u, 15u, 17u, 18u}) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
  }
  return civil_to_epoch(digits(text, 0, 4), digits(text, 5, 2), digits(text, 8, 2),
                        digits(text, 11, 2), digits(text, 14, 2),
                        digits(text, 17, 2));
}

std::optional<std::int64_t> parse_hl7_timestamp(const std::string& text) {
  if (text.size() != 14 || !all_digits(text)) return std::nullopt;
  return civil_to_epoch(digits(text, 0, 4), digits(text, 4, 2), digits(text, 6, 2),
                        digits(text, 8, 2), digits(text, 10, 2),
                        digits(text, 12, 2));
}

std::string format_hl7_timestamp(std::int64_t epoch_seconds) {
  std::time_t t = static_cast<std::time_t>(epoch_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02d%02d%02d%02d", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::optional<std::int32_t> parse_hl7_date(const std::string& text) {
  if (text.size() != 8 || !all_digits(text)) return std::nullopt;
  auto epoch = civil_to_epoch(digits(text, 0, 4), digits(text, 4, 2),
                              digits(text, 6, 2), 0, 0, 0);
  if (!epoch) return std::nullopt;
  std::int64_t days = *epoch / 86400;
  if (*epoch % 86400 != 0 && *epoch < 0) days -= 1;  // floor for pre-1970
  return static_cast<std::int32_t>(days);
}

std::optional<std::int32_t> parse_date_days(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  std::string compact = text.substr(0, 4) + text.substr(5, 2) + text.substr(8, 2);
  return parse_hl7_date(compact);
}

std::string format_date_days(std::int32_t days_since_epoch) {
  std::time_t t = static_cast<std::time_t>(days_since_epoch) * 86400;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday);
  return buf;
}

}  // namespace simopac
