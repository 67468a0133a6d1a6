#include "simopac/clinical_event.hpp"

#include <algorithm>

#include <json.hpp>

#include "simopac/timeutil.hpp"

namespace simopac {

using nlohmann::json;

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::kAllergy: return "allergy";
    case EventKind::kMedication: return "medication";
    case EventKind::kDiagnosis: return "diagnosis";
    case EventKind::kObservation: return "observation";
    case EventKind::kAdmit: return "admit";
    case EventKind::kDischarge: return "discharge";
  }
  return "?";
}

std::optional<EventKind> event_kind_from_name(const std::string& name) {
  for (EventKind kind : {EventKind::kAllergy, EventKind::kMedication,
                         EventKind::kDiagnosis, EventKind::kObservation,
                         EventKind::kAdmit, EventKind::kDischarge}) {
    if (name == event_kind_name(kind)) return kind;
  }
  return std::nullopt;
}

std::optional<std::string> validate_event(const ClinicalEvent& e) {
  if (e.event_id.empty()) return "event_id is empty";
  if (std::all_of(e.patient_sn.begin(), e.patient_sn.end(),
                  [](std::uint8_t b) { return b == 0; })) {
    return "patient serial is all-zero";
  }
  if (e.source_id.empty()) return "source_id is empty";
  if (e.effective_at > e.received_at + kMaxClockSkewSeconds) {
    return "effective_at leads received_at by more than 24h";
  }
  return std::nullopt;
}

std::string event_to_json(const ClinicalEvent& e) {
  json doc = {
      {"event_id", e.event_id},
      {"patient_sn", identity::format_serial_hex(e.patient_sn)},
      {"source_id", e.source_id},
      {"kind", event_kind_name(e.kind)},
      {"text", e.text},
      {"effective_at", iso8601_utc(e.effective_at)},
      {"received_at", iso8601_utc(e.received_at)},
  };
  if (e.code) {
    doc["code"] = {{"system", e.code->system},
                   {"code", e.code->code},
                   {"display", e.code->display}};
  }
  return doc.dump();
}

Result<ClinicalEvent, std::string> event_from_json(const std::string& line) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded()) return std::string("malformed event JSON");
  try {
    ClinicalEvent e;
    e.event_id = doc.at("event_id").get<std::string>();
    auto sn = identity::parse_serial_hex(doc.at("patient_sn").get<std::string>());
    if (!sn) return std::string("bad patient_sn: " + sn.error().detail);
    e.patient_sn = sn.value();
    e.source_id = doc.at("source_id").get<std::string>();
    auto kind = event_kind_from_name(doc.at("kind").get<std::string>());
    if (!kind) return std::string("unknown event kind");
    e.kind = *kind;
    e.text = doc.at("text").get<std::string>();
    auto effective = parse_iso8601_utc(doc.at("effective_at").get<std::string>());
    auto received = parse_iso8601_utc(doc.at("received_at").get<std::string>());
    if (!effective || !received) return std::string("bad event timestamp");
    e.effective_at = *effective;
    e.received_at = *received;
    if (doc.contains("code")) {
      const auto& cj = doc.at("code");
      e.code = EventCode{cj.at("system").get<std::string>(),
                         cj.at("code").get<std::string>(),
                         cj.value("display", std::string{})};
    }
    return e;
  } catch (const json::exception& ex) {
    return std::string("event JSON: ") + ex.what();
  }
}

}  // namespace simopac
