#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simopac/bytes.hpp"
#include "simopac/identity.hpp"
#include "simopac/record_store.hpp"
#include "simopac/result.hpp"
#include "simopac/tag_codec.hpp"
#include "simopac/templates.hpp"
#include "simopac/terminology.hpp"

namespace simopac::agg {

/// One feed from a hospital system: messages land in spool_dir, ingested
/// files move to archive_dir. The two directories must be distinct.
struct SourceAgent {
  std::string source_id;
  std::string spool_dir;
  std::string archive_dir;
  int poll_interval_seconds = 5;
};

struct SpoolItem {
  std::string file_name;  // empty for messages that did not come from a file
  std::string text;
};

struct IngestError {
  std::string file_name;
  std::string detail;
};

/// Per-run counters. Every message lands in exactly one of parsed_ok or
/// errors, so messages_seen == parsed_ok + errors.size().
struct IngestReport {
  std::size_t messages_seen = 0;
  std::size_t parsed_ok = 0;
  std::size_t events_appended = 0;
  std::size_t duplicates = 0;
  std::size_t translation_misses = 0;
  std::vector<IngestError> errors;
};

enum class AggErrorCode {
  kSpoolUnreadable,
  kTemplateNotFound,
  kMissingRequired,
  kBudgetExceeded,
  kEncodeFailed,
  kStorageFailure,
  kConfigInvalid,
};

const char* agg_error_name(AggErrorCode code);

struct AggError {
  AggErrorCode code;
  std::string detail;
};

template <typename T>
using AggResult = Result<T, AggError>;

/// Lists the spool in lexicographic file-name order without consuming it;
/// ingest is what archives files.
AggResult<std::vector<SpoolItem>> poll_source(const SourceAgent& agent);

/// Parses each message, maps it to events under agent.source_id,
/// canonicalizes codes (diagnoses to ICD10, medications to NDL; a missed
/// translation keeps the original code and notes it in the event text),
/// appends to the store and archives the source file. Message-level
/// failures are collected in the report; only storage failures abort.
/// Idempotent per message control id: re-running over archived copies
/// appends nothing.
AggResult<IngestReport> ingest(store::RecordStore& store,
                               const term::TerminologyTable& table,
                               const SourceAgent& agent,
                               const std::vector<SpoolItem>& messages,
                               std::int64_t now);

/// Push-style ingest of one message body (the service's /ingest endpoint);
/// source_id comes from the message's sending facility.
AggResult<IngestReport> ingest_text(store::RecordStore& store,
                                    const term::TerminologyTable& table,
                                    const std::string& text, std::int64_t now);

/// Full tag refresh pipeline: synopsis fields -> template validation ->
/// budget fit -> encode, sealed when a key is given. updated_at = now.
/// The returned image is decodable with no store or network access.
AggResult<Bytes> refresh_tag_payload(const store::RecordStore& store,
                                     const templates::TemplateRegistry& registry,
                                     const identity::Serial& patient_sn,
                                     std::uint16_t template_id, std::uint8_t version,
                                     const codec::TagProfile& profile,
                                     std::span<const std::uint8_t> mac_key,
                                     const std::string& emr_uri, std::int64_t now);

/// Reads an agent config: either a bare JSON array of source records or an
/// object {"sources": [...]} (extra keys ignored so one file can also hold
/// connection settings for `agent run`).
AggResult<std::vector<SourceAgent>> load_agent_config(const std::string& path);

}  // namespace simopac::agg
