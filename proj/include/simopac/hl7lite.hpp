#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simopac/clinical_event.hpp"
#include "simopac/result.hpp"

namespace simopac::hl7 {

/// HL7-lite: the pipe-delimited dialect agents exchange. One message per
/// file or request body.
///
///   message := MSH-segment (segment CR)+
///   segment := TAG ('|' field)*
///   field   := component ('^' component)*
///
/// Segment shapes:
///   MSH: MSH|^~\&|sending_app|sending_facility|receiving_app|
///        receiving_facility|YYYYMMDDHHMMSS||TYPE^EVENT|control_id
///   PID: PID|1|patient_sn_hex16|family^given|YYYYMMDD|sex
///   AL1: AL1|set_id|allergy_type|code^text^code_system|severity
///   RXE: RXE|set_id|code^text^code_system|dose|unit
///   DG1: DG1|set_id|code_system|code^text
///   OBX: OBX|set_id|value_kind|code^text^code_system|value|units|
///        YYYYMMDDHHMMSS
///   TXT: TXT|free text (discharge narrative)
///
/// There are no escape sequences: '|' and '^' cannot appear inside values,
/// and the serializer rejects them rather than guessing. Input accepts CR,
/// LF or CRLF segment terminators; output always emits CR.

struct Segment {
  std::string tag;  // three uppercase characters
  std::vector<std::vector<std::string>> fields;  // per field: '^'-components

  bool operator==(const Segment&) const = default;

  /// HL7-numbered field as raw text (components rejoined with '^').
  /// For MSH, n counts the field separator as MSH-1, so MSH-2 is the
  /// encoding characters and MSH-10 the control id. Absent fields are "".
  std::string field(int n) const;

  /// Component c (1-based) of HL7-numbered field n; "" when absent.
  std::string component(int n, int c) const;
};

struct Hl7LiteMessage {
  std::vector<Segment> segments;

  bool operator==(const Hl7LiteMessage&) const = default;

  const Segment* find(const std::string& tag) const;
  std::string message_type() const;      // MSH-9, e.g. "ORU^R01"
  std::string control_id() const;        // MSH-10
  std::string sending_facility() const;  // MSH-4
  std::string timestamp_text() const;    // MSH-7
  std::int64_t effective_at() const;     // MSH-7 as epoch seconds
};

enum class Hl7ErrorCode {
  kEmptyInput,
  kFirstSegmentNotMsh,
  kUnknownSegment,
  kBadTimestamp,
  kMissingControlId,
  kMissingPid,
  kDuplicatePid,
  kBadEncodingChars,
  kBadPatientId,
  kEncodingNotSupported,
  kUnsupportedMessageType,
};

const char* hl7_error_name(Hl7ErrorCode code);

struct Hl7Error {
  Hl7ErrorCode code;
  std::size_t segment_index = 0;  // 0-based position of the offending segment
  std::string detail;
};

template <typename T>
using Hl7Result = Result<T, Hl7Error>;

/// Total on arbitrary text. Accepts CR/LF/CRLF terminators and an optional
/// trailing terminator; everything else is validated strictly.
Hl7Result<Hl7LiteMessage> parse_message(const std::string& text);

/// CR-terminated canonical form; parse(serialize(m)) == m.
Hl7Result<std::string> serialize_message(const Hl7LiteMessage& m);

/// Maps a message onto clinical events: AL1 -> allergy, RXE -> medication,
/// DG1 -> diagnosis, OBX -> observation; ADT^A01 adds an admit event and
/// ADT^A03 a discharge event carrying the concatenated TXT narrative.
/// Every event gets the PID-2 serial, MSH-7 effective time and an event id
/// of the form "<control_id>/<segment index>". received_at is left for the
/// ingest path to stamp.
Hl7Result<std::vector<ClinicalEvent>> to_events(const Hl7LiteMessage& m,
                                                const std::string& source_id);

}  // namespace simopac::hl7
