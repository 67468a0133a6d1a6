#include "simopac/identity.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "simopac/bytes.hpp"

namespace simopac::identity {

namespace {

constexpr std::string_view kScheme = "simopac://";

bool is_host_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
}

bool is_realm_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
         c == '_' || c == '~';
}

IdentityError err(IdentityErrorCode code, std::string detail) {
  return IdentityError{code, std::move(detail)};
}

// Maps the UTF-8 code points we expect in European names onto ASCII base
// letters. Unmapped multi-byte sequences pass through unchanged.
const std::unordered_map<std::uint32_t, const char*>& diacritic_table() {
  static const std::unordered_map<std::uint32_t, const char*> table = {
      {0x00C0, "a"}, {0x00C1, "a"}, {0x00C2, "a"}, {0x00C3, "a"}, {0x00C4, "a"},
      {0x00C5, "a"}, {0x00C6, "ae"}, {0x00C7, "c"}, {0x00C8, "e"}, {0x00C9, "e"},
      {0x00CA, "e"}, {0x00CB, "e"}, {0x00CC, "i"}, {0x00CD, "i"}, {0x00CE, "i"},
      {0x00CF, "i"}, {0x00D1, "n"}, {0x00D2, "o"}, {0x00D3, "o"}, {0x00D4, "o"},
      {0x00D5, "o"}, {0x00D6, "o"}, {0x00D8, "o"}, {0x00D9, "u"}, {0x00DA, "u"},
      {0x00DB, "u"}, {0x00DC, "u"}, {0x00DD, "y"}, {0x00DF, "ss"},
      {0x00E0, "a"}, {0x00E1, "a"}, {0x00E2, "a"}, {0x00E3, "a"}, {0x00E4, "a"},
      {0x00E5, "a"}, {0x00E6, "ae"}, {0x00E7, "c"}, {0x00E8, "e"}, {0x00E9, "e"},
      {0x00EA, "e"}, {0x00EB, "e"}, {0x00EC, "i"}, {0x00ED, "i"}, {0x00EE, "i"},
      {0x00EF, "i"}, {0x00F1, "n"}, {0x00F2, "o"}, {0x00F3, "o"}, {0x00F4, "o"},
      {0x00F5, "o"}, {0x00F6, "o"}, {0x00F8, "o"}, {0x00F9, "u"}, {0x00FA, "u"},
      {0x00FB, "u"}, {0x00FC, "u"}, {0x00FD, "y"}, {0x00FF, "y"},
      // Latin Extended-A, notably Romanian and Central European letters.
      {0x0100, "a"}, {0x0101, "a"}, {0x0102, "a"}, {0x0103, "a"}, {0x0104, "a"},
      {0x0105, "a"}, {0x0106, "c"}, {0x0107, "c"}, {0x010C, "c"}, {0x010D, "c"},
      {0x010E, "d"}, {0x010F, "d"}, {0x0110, "d"}, {0x0111, "d"}, {0x0112, "e"},
      {0x0113, "e"}, {0x0118, "e"}, {0x0119, "e"}, {0x011A, "e"}, {0x011B, "e"},
      {0x011E, "g"}, {0x011F, "g"}, {0x0130, "i"}, {0x0131, "i"}, {0x0141, "l"},
      {0x0142, "l"}, {0x0143, "n"}, {0x0144, "n"}, {0x0147, "n"}, {0x0148, "n"},
      {0x0150, "o"}, {0x0151, "o"}, {0x0152, "oe"}, {0x0153, "oe"},
      {0x0154, "r"}, {0x0155, "r"}, {0x0158, "r"}, {0x0159, "r"}, {0x015A, "s"},
      {0x015B, "s"}, {0x015E, "s"}, {0x015F, "s"}, {0x0160, "s"}, {0x0161, "s"},
      {0x0162, "t"}, {0x0163, "t"}, {0x0164, "t"}, {0x0165, "t"}, {0x016E, "u"},
      {0x016F, "u"}, {0x0170, "u"}, {0x0171, "u"}, {0x0179, "z"}, {0x017A, "z"},
      {0x017B, "z"}, {0x017C, "z"}, {0x017D, "z"}, {0x017E, "z"},
      // Romanian comma-below forms.
      {0x0218, "s"}, {0x0219, "s"}, {0x021A, "t"}, {0x021B, "t"},
  };
  return table;
}

// Decodes one UTF-8 code point; on malformed input consumes a single byte
// and reports it verbatim.
std::pair<std::uint32_t, std::size_t> decode_utf8(const std::string& s, std::size_t i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) return {c, 1};
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if ((c & 0xE0) == 0xC0 && cont(1)) {
    return {static_cast<std::uint32_t>((c & 0x1F) << 6 |
                                       (static_cast<unsigned char>(s[i + 1]) & 0x3F)),
            2};
  }
  if ((c & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    std::uint32_t cp = (c & 0x0F) << 12 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3F);
    return {cp, 3};
  }
  if ((c & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    std::uint32_t cp = (c & 0x07) << 18 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6 |
                       (static_cast<unsigned char>(s[i + 3]) & 0x3F);
    return {cp, 4};
  }
  return {c, 1};
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

IdentityResult<Serial> parse_serial_hex(const std::string& text) {
  if (text.size() != 16) {
    return err(IdentityErrorCode::kBadSerialHex,
               "serial must be 16 hex digits, got " + std::to_string(text.size()));
  }
  auto bytes = hex_decode(text);
  if (!bytes) {
    return err(IdentityErrorCode::kBadSerialHex, "non-hex character in serial");
  }
  Serial sn{};
  std::copy(bytes->begin(), bytes->end(), sn.begin());
  return sn;
}

std::string format_serial_hex(const Serial& sn) {
  return hex_encode(std::span<const std::uint8_t>(sn.data(), sn.size()));
}

IdentityResult<EmrUri> parse_emr_uri(const std::string& text) {
  if (text.substr(0, kScheme.size()) != kScheme) {
    return err(IdentityErrorCode::kBadScheme, "expected simopac:// scheme");
  }
  std::size_t pos = kScheme.size();
  std::size_t slash = text.find('/', pos);
  if (slash == std::string::npos) {
    return err(IdentityErrorCode::kEmptyRealm, "missing /realm");
  }
  std::string authority = text.substr(pos, slash - pos);
  std::string realm = text.substr(slash + 1);

  EmrUri uri;
  std::size_t colon = authority.find(':');
  std::string host = colon == std::string::npos ? authority : authority.substr(0, colon);
  if (host.empty() || !std::all_of(host.begin(), host.end(), is_host_char)) {
    return err(IdentityErrorCode::kBadHostOrPort, "bad host '" + host + "'");
  }
  uri.host = host;
  if (colon != std::string::npos) {
    std::string port_text = authority.substr(colon + 1);
    if (port_text.empty() ||
        !std::all_of(port_text.begin(), port_text.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        port_text.size() > 5) {
      return err(IdentityErrorCode::kBadHostOrPort, "bad port '" + port_text + "'");
    }
    long port = std::stol(port_text);
    if (port < 1 || port > 65535) {
      return err(IdentityErrorCode::kBadHostOrPort, "port out of range");
    }
    uri.port = static_cast<std::uint16_t>(port);
  }
  if (realm.empty()) {
    return err(IdentityErrorCode::kEmptyRealm, "realm is empty");
  }
  if (!std::all_of(realm.begin(), realm.end(), is_realm_char)) {
    return err(IdentityErrorCode::kEmptyRealm, "bad realm '" + realm + "'");
  }
  uri.realm = realm;
  return uri;
}

std::string format_emr_uri(const EmrUri& uri) {
  std::string out(kScheme);
  out += uri.host;
  if (uri.port) {
    out += ':';
    out += std::to_string(*uri.port);
  }
  out += '/';
  out += uri.realm;
  return out;
}

IdentityResult<SnUri> parse_sn_uri(const std::string& text) {
  std::size_t at = text.find('@');
  if (at == std::string::npos) {
    return err(IdentityErrorCode::kMissingSeparator, "missing '@' separator");
  }
  std::string sn_text = text.substr(0, at);
  // Lowercase hex is accepted and canonicalized on formatting.
  std::transform(sn_text.begin(), sn_text.end(), sn_text.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  auto sn = parse_serial_hex(sn_text);
  if (!sn) return sn.error();
  auto uri = parse_emr_uri(text.substr(at + 1));
  if (!uri) return uri.error();
  return SnUri{sn.value(), uri.value()};
}

std::string format_sn_uri(const SnUri& id) {
  return format_serial_hex(id.sn) + "@" + format_emr_uri(id.uri);
}

std::string normalize_name(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto [cp, len] = decode_utf8(text, i);
    i += len;
    if (cp == ' ' || cp == '\t' || cp == '-' || cp == 0x00A0) continue;
    auto it = diacritic_table().find(cp);
    if (it != diacritic_table().end()) {
      out += it->second;
    } else if (cp < 0x80) {
      out.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else {
      append_utf8(out, cp);
    }
  }
  return out;
}

MatchResult match_patient(
    const MatchProbe& probe,
    const std::vector<std::pair<Serial, Demographics>>& candidates) {
  if (const Serial* sn = std::get_if<Serial>(&probe)) {
    for (const auto& [candidate_sn, demo] : candidates) {
      if (candidate_sn == *sn) {
        return {MatchVerdict::kMatchedExact, candidate_sn};
      }
    }
    return {MatchVerdict::kNoMatch, std::nullopt};
  }

  const auto& demo = std::get<Demographics>(probe);
  auto key = [](const Demographics& d) {
    return std::make_tuple(normalize_name(d.family), normalize_name(d.given), d.dob_days);
  };
  auto probe_key = key(demo);
  std::vector<Serial> hits;
  for (const auto& [candidate_sn, candidate] : candidates) {
    if (key(candidate) == probe_key) hits.push_back(candidate_sn);
  }
  if (hits.empty()) return {MatchVerdict::kNoMatch, std::nullopt};
  if (hits.size() > 1) return {MatchVerdict::kAmbiguous, std::nullopt};
  return {MatchVerdict::kMatchedProbable, hits.front()};
}

std::optional<std::string> RealmRegistry::lookup(const std::string& realm) const {
  auto it = addresses.find(realm);
  if (it == addresses.end()) return std::nullopt;
  return it->second;
}

Result<RealmRegistry, std::string> load_realm_registry(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::string("cannot open realm registry: " + path);
  RealmRegistry registry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      return std::string("realm registry line " + std::to_string(line_no) +
                         ": expected realm<TAB>host:port");
    }
    registry.addresses[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return registry;
}

}  // namespace simopac::identity
