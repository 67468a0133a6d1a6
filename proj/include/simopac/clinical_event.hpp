#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "simopac/identity.hpp"
#include "simopac/result.hpp"

namespace simopac {

enum class EventKind {
  kAllergy,
  kMedication,
  kDiagnosis,
  kObservation,
  kAdmit,
  kDischarge,
};

const char* event_kind_name(EventKind kind);
std::optional<EventKind> event_kind_from_name(const std::string& name);

/// A code as carried in messages and stored events. `system` is the coding
/// system name (LOCAL, ICD9, ICD10, NDL); the terminology module maps names
/// to wire ids when values are packed onto a card.
struct EventCode {
  std::string system;
  std::string code;
  std::string display;

  bool operator==(const EventCode&) const = default;
};

/// One clinical fact as stored: the unit of the append-only event log.
struct ClinicalEvent {
  std::string event_id;  // unique store-wide: "<control_id>/<segment index>"
  identity::Serial patient_sn{};
  std::string source_id;
  EventKind kind = EventKind::kObservation;
  std::optional<EventCode> code;
  std::string text;
  std::int64_t effective_at = 0;  // UTC seconds
  std::int64_t received_at = 0;   // UTC seconds, stamped at ingest

  bool operator==(const ClinicalEvent&) const = default;
};

/// Events may lead their reception timestamp by at most this much
/// (declared clock skew between facilities).
constexpr std::int64_t kMaxClockSkewSeconds = 24 * 3600;

/// Checks the invariants appends rely on; returns a description of the
/// first violation.
std::optional<std::string> validate_event(const ClinicalEvent& e);

std::string event_to_json(const ClinicalEvent& e);
Result<ClinicalEvent, std::string> event_from_json(const std::string& line);

}  // namespace simopac
