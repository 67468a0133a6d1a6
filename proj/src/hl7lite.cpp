#include "simopac/hl7lite.hpp"

#include <algorithm>
#include <array>

#include "simopac/timeutil.hpp"

namespace simopac::hl7 {

namespace {

constexpr std::array<std::string_view, 7> kKnownTags = {
    "MSH", "PID", "AL1", "RXE", "DG1", "OBX", "TXT"};

constexpr std::string_view kEncodingChars = "^~\\&";

Hl7Error herr(Hl7ErrorCode code, std::size_t segment_index, std::string detail) {
  return Hl7Error{code, segment_index, std::move(detail)};
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

// Splits raw message text into segment lines, tolerating CR, LF and CRLF.
std::vector<std::string> segment_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  // Blank lines between segments are not part of the grammar, but a final
  // terminator leaves one empty tail entry; drop empties uniformly.
  lines.erase(std::remove_if(lines.begin(), lines.end(),
                             [](const std::string& l) { return l.empty(); }),
              lines.end());
  return lines;
}

std::string segment_text(const Segment& seg) {
  std::string out = seg.tag;
  for (const auto& field : seg.fields) {
    out.push_back('|');
    out += join(field, '^');
  }
  return out;
}

}  // namespace

const char* hl7_error_name(Hl7ErrorCode code) {
  switch (code) {
    case Hl7ErrorCode::kEmptyInput: return "EmptyInput";
    case Hl7ErrorCode::kFirstSegmentNotMsh: return "FirstSegmentNotMsh";
    case Hl7ErrorCode::kUnknownSegment: return "UnknownSegment";
    case Hl7ErrorCode::kBadTimestamp: return "BadTimestamp";
    case Hl7ErrorCode::kMissingControlId: return "MissingControlId";
    case Hl7ErrorCode::kMissingPid: return "MissingPid";
    case Hl7ErrorCode::kDuplicatePid: return "DuplicatePid";
    case Hl7ErrorCode::kBadEncodingChars: return "BadEncodingChars";
    case Hl7ErrorCode::kBadPatientId: return "BadPatientId";
    case Hl7ErrorCode::kEncodingNotSupported: return "EncodingNotSupported";
    case Hl7ErrorCode::kUnsupportedMessageType: return "UnsupportedMessageType";
  }
  return "?";
}

std::string Segment::field(int n) const {
  int index = tag == "MSH" ? n - 2 : n - 1;
  if (index < 0 || index >= static_cast<int>(fields.size())) return "";
  return join(fields[static_cast<std::size_t>(index)], '^');
}

std::string Segment::component(int n, int c) const {
  int index = tag == "MSH" ? n - 2 : n - 1;
  if (index < 0 || index >= static_cast<int>(fields.size())) return "";
  const auto& comps = fields[static_cast<std::size_t>(index)];
  if (c < 1 || c > static_cast<int>(comps.size())) return "";
  return comps[static_cast<std::size_t>(c - 1)];
}

const Segment* Hl7LiteMessage::find(const std::string& tag) const {
  for (const auto& seg : segments) {
    if (seg.tag == tag) return &seg;
  }
  return nullptr;
}

std::string Hl7LiteMessage::message_type() const {
  return segments.empty() ? "" : segments.front().field(9);
}

std::string Hl7LiteMessage::control_id() const {
  return segments.empty() ? "" : segments.front().field(10);
}

std::string Hl7LiteMessage::sending_facility() const {
  return segments.empty() ? "" : segments.front().field(4);
}

std::string Hl7LiteMessage::timestamp_text() const {
  return segments.empty() ? "" : segments.front().field(7);
}

std::int64_t Hl7LiteMessage::effective_at() const {
  auto parsed = parse_hl7_timestamp(timestamp_text());
  return parsed ? *parsed : 0;
}

Hl7Result<Hl7LiteMessage> parse_message(const std::string& text) {
  auto lines = segment_lines(text);
  if (lines.empty()) {
    return herr(Hl7ErrorCode::kEmptyInput, 0, "no segments");
  }

  Hl7LiteMessage message;
  std::size_t pid_count = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    std::string tag = line.substr(0, 3);
    bool known = std::find(kKnownTags.begin(), kKnownTags.end(), tag) != kKnownTags.end();
    bool shape_ok = line.size() == 3 || (line.size() > 3 && line[3] == '|');
    if (!known || !shape_ok) {
      if (i == 0) {
        return herr(Hl7ErrorCode::kFirstSegmentNotMsh, 0,
                    "message starts with '" + line.substr(0, 3) + "'");
      }
      return herr(Hl7ErrorCode::kUnknownSegment, i,
                  "segment tag '" + tag + "' is not in the lite dialect");
    }
    if (i == 0 && tag != "MSH") {
      return herr(Hl7ErrorCode::kFirstSegmentNotMsh, 0,
                  "first segment is " + tag);
    }
    if (i > 0 && tag == "MSH") {
      return herr(Hl7ErrorCode::kUnknownSegment, i, "MSH after the header");
    }

    Segment seg;
    seg.tag = tag;
    if (line.size() > 3) {
      for (const std::string& raw_field : split(line.substr(4), '|')) {
        seg.fields.push_back(split(raw_field, '^'));
      }
    }
    if (tag == "PID") ++pid_count;
    message.segments.push_back(std::move(seg));
  }

  const Segment& msh = message.segments.front();
  if (msh.field(2) != kEncodingChars) {
    return herr(Hl7ErrorCode::kBadEncodingChars, 0,
                "MSH-2 is '" + msh.field(2) + "', expected '^~\\&'");
  }
  if (!parse_hl7_timestamp(msh.field(7))) {
    return herr(Hl7ErrorCode::kBadTimestamp, 0,
                "MSH-7 '" + msh.field(7) + "' is not YYYYMMDDHHMMSS");
  }
  if (msh.field(10).empty()) {
    return herr(Hl7ErrorCode::kMissingControlId, 0, "MSH-10 is empty");
  }
  if (pid_count == 0) {
    return herr(Hl7ErrorCode::kMissingPid, 0, "no PID segment");
  }
  if (pid_count > 1) {
    return herr(Hl7ErrorCode::kDuplicatePid, 0,
                std::to_string(pid_count) + " PID segments");
  }

  for (std::size_t i = 0; i < message.segments.size(); ++i) {
    const Segment& seg = message.segments[i];
    if (seg.tag == "PID") {
      std::string sn_text = seg.field(2);
      auto sn = identity::parse_serial_hex(sn_text);
      if (!sn) {
        return herr(Hl7ErrorCode::kBadPatientId, i,
                    "PID-2 '" + sn_text + "': " + sn.error().detail);
      }
      if (std::all_of(sn.value().begin(), sn.value().end(),
                      [](std::uint8_t b) { return b == 0; })) {
        return herr(Hl7ErrorCode::kBadPatientId, i, "PID-2 serial is all-zero");
      }
      if (!seg.field(4).empty() && !parse_hl7_date(seg.field(4))) {
        return herr(Hl7ErrorCode::kBadTimestamp, i,
                    "PID-4 '" + seg.field(4) + "' is not YYYYMMDD");
      }
    }
    if (seg.tag == "OBX" && !seg.field(6).empty() &&
        !parse_hl7_timestamp(seg.field(6))) {
      return herr(Hl7ErrorCode::kBadTimestamp, i,
                  "OBX-6 '" + seg.field(6) + "' is not YYYYMMDDHHMMSS");
    }
  }
  return message;
}

Hl7Result<std::string> serialize_message(const Hl7LiteMessage& m) {
  std::string out;
  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const Segment& seg = m.segments[i];
    for (const auto& field : seg.fields) {
      for (const auto& comp : field) {
        if (comp.find_first_of("|^\r\n") != std::string::npos) {
          return herr(Hl7ErrorCode::kEncodingNotSupported, i,
                      "separator character inside a component of " + seg.tag);
        }
      }
    }
    out += segment_text(seg);
    out.push_back('\r');
  }
  if (out.empty()) {
    return herr(Hl7ErrorCode::kEmptyInput, 0, "message has no segments");
  }
  return out;
}

Hl7Result<std::vector<ClinicalEvent>> to_events(const Hl7LiteMessage& m,
                                                const std::string& source_id) {
  std::string type = m.message_type();
  if (type != "ADT^A01" && type != "ADT^A03" && type != "ORU^R01") {
    return herr(Hl7ErrorCode::kUnsupportedMessageType, 0,
                "message type '" + type + "'");
  }
  const Segment* pid = m.find("PID");
  auto sn = identity::parse_serial_hex(pid ? pid->field(2) : "");
  if (!sn) {
    return herr(Hl7ErrorCode::kBadPatientId, 0, "PID-2 unusable");
  }

  ClinicalEvent base;
  base.patient_sn = sn.value();
  base.source_id = source_id;
  base.effective_at = m.effective_at();
  std::string control_id = m.control_id();
  auto event_id = [&control_id](std::size_t index) {
    return control_id + "/" + std::to_string(index);
  };

  std::vector<ClinicalEvent> events;
  std::string discharge_narrative;

  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const Segment& seg = m.segments[i];
    ClinicalEvent e = base;
    e.event_id = event_id(i);
    if (seg.tag == "AL1") {
      e.kind = EventKind::kAllergy;
      e.code = EventCode{seg.component(3, 3), seg.component(3, 1), seg.component(3, 2)};
      e.text = seg.field(4);
      events.push_back(std::move(e));
    } else if (seg.tag == "RXE") {
      e.kind = EventKind::kMedication;
      e.code = EventCode{seg.component(2, 3), seg.component(2, 1), seg.component(2, 2)};
      std::string dose = seg.field(3);
      std::string unit = seg.field(4);
      e.text = dose + (dose.empty() || unit.empty() ? "" : " ") + unit;
      events.push_back(std::move(e));
    } else if (seg.tag == "DG1") {
      e.kind = EventKind::kDiagnosis;
      e.code = EventCode{seg.field(2), seg.component(3, 1), seg.component(3, 2)};
      events.push_back(std::move(e));
    } else if (seg.tag == "OBX") {
      e.kind = EventKind::kObservation;
      e.code = EventCode{seg.component(3, 3), seg.component(3, 1), seg.component(3, 2)};
      std::string value = seg.field(4);
      std::string units = seg.field(5);
      e.text = value + (value.empty() || units.empty() ? "" : " ") + units;
      events.push_back(std::move(e));
    } else if (seg.tag == "TXT") {
      if (!discharge_narrative.empty()) discharge_narrative.push_back('\n');
      discharge_narrative += seg.field(1);
    }
  }

  if (type == "ADT^A01") {
    ClinicalEvent e = base;
    e.event_id = event_id(0);
    e.kind = EventKind::kAdmit;
    events.insert(events.begin(), std::move(e));
  } else if (type == "ADT^A03") {
    ClinicalEvent e = base;
    e.event_id = event_id(0);
    e.kind = EventKind::kDischarge;
    e.text = discharge_narrative;
    events.insert(events.begin(), std::move(e));
  }
  return events;
}

}  // namespace simopac::hl7
