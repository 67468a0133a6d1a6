#include "simopac/aggregation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "simopac/hl7lite.hpp"

namespace simopac::agg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

AggError err(AggErrorCode code, std::string detail) {
  return AggError{code, std::move(detail)};
}

/// Rewrites a coded event onto its canonical system: diagnoses to ICD10,
/// medications to NDL; other kinds keep their source system. A miss leaves
/// the original code in place and notes it in the text so nothing is lost.
void canonicalize(ClinicalEvent& e, const term::TerminologyTable& table,
                  std::size_t& misses) {
  if (!e.code.has_value()) return;
  term::SystemId target;
  switch (e.kind) {
    case EventKind::kDiagnosis: target = term::SystemId::kIcd10; break;
    case EventKind::kMedication: target = term::SystemId::kNdl; break;
    default: return;
  }

  auto note_miss = [&] {
    ++misses;
    std::string note = "[untranslated " + e.code->system + "^" + e.code->code + "]";
    e.text = e.text.empty() ? note : e.text + " " + note;
  };

  auto from = term::system_from_name(e.code->system);
  if (!from.has_value()) {
    note_miss();
    return;
  }
  auto tr = table.translate(*from, e.code->code, target);
  if (!tr.ok() || tr.value().outcome != term::TranslationResult::Outcome::kTranslated) {
    note_miss();
    return;
  }
  const term::Concept& c = tr.value().translated->concept_;
  e.code = EventCode{term::system_name(c.system), c.code,
                     c.display.empty() ? e.code->display : c.display};
}

}  // namespace

const char* agg_error_name(AggErrorCode code) {
  switch (code) {
    case AggErrorCode::kSpoolUnreadable: return "SpoolUnreadable";
    case AggErrorCode::kTemplateNotFound: return "TemplateNotFound";
    case AggErrorCode::kMissingRequired: return "MissingRequired";
    case AggErrorCode::kBudgetExceeded: return "RequiredFieldsExceedBudget";
    case AggErrorCode::kEncodeFailed: return "EncodeFailed";
    case AggErrorCode::kStorageFailure: return "StorageFailure";
    case AggErrorCode::kConfigInvalid: return "ConfigInvalid";
  }
  return "?";
}

AggResult<std::vector<SpoolItem>> poll_source(const SourceAgent& agent) {
  std::error_code ec;
  if (!fs::is_directory(agent.spool_dir, ec) || ec)
    return err(AggErrorCode::kSpoolUnreadable, "spool is not a readable directory: " + agent.spool_dir);

  std::vector<std::string> names;
  for (fs::directory_iterator it(agent.spool_dir, ec), end; it != end && !ec; it.increment(ec)) {
    if (it->is_regular_file()) names.push_back(it->path().filename().string());
  }
  if (ec) return err(AggErrorCode::kSpoolUnreadable, "cannot list " + agent.spool_dir + ": " + ec.message());
  std::sort(names.begin(), names.end());

  std::vector<SpoolItem> items;
  for (const std::string& name : names) {
    std::ifstream in(fs::path(agent.spool_dir) / name, std::ios::binary);
    if (!in) return err(AggErrorCode::kSpoolUnreadable, "cannot read spool file " + name);
    std::stringstream buffer;
    buffer << in.rdbuf();
    items.push_back(SpoolItem{name, buffer.str()});
  }
  return items;
}

AggResult<IngestReport> ingest(store::RecordStore& store,
                               const term::TerminologyTable& table,
                               const SourceAgent& agent,
                               const std::vector<SpoolItem>& messages,
                               std::int64_t now) {
  IngestReport report;
  for (const SpoolItem& item : messages) {
    ++report.messages_seen;
    auto parsed = hl7::parse_message(item.text);
    if (!parsed.ok()) {
      report.errors.push_back({item.file_name, std::string(hl7::hl7_error_name(parsed.error().code)) +
                                                   ": " + parsed.error().detail});
      continue;
    }
    auto events = hl7::to_events(parsed.value(), agent.source_id);
    if (!events.ok()) {
      report.errors.push_back({item.file_name, std::string(hl7::hl7_error_name(events.error().code)) +
                                                   ": " + events.error().detail});
      continue;
    }

    bool failed = false;
    for (ClinicalEvent& e : events.value()) {
      e.received_at = now;
      canonicalize(e, table, report.translation_misses);
      auto appended = store.append_event(e);
      if (!appended.ok()) {
        if (appended.error().code == store::StoreErrorCode::kStorageFailure)
          return err(AggErrorCode::kStorageFailure, appended.error().detail);
        report.errors.push_back({item.file_name, appended.error().detail});
        failed = true;
        break;
      }
      if (appended.value() == store::AppendOutcome::kAppended)
        ++report.events_appended;
      else
        ++report.duplicates;
    }
    if (failed) continue;

    if (!item.file_name.empty() && !agent.archive_dir.empty()) {
      std::error_code ec;
      fs::create_directories(agent.archive_dir, ec);
      if (!ec)
        fs::rename(fs::path(agent.spool_dir) / item.file_name,
                   fs::path(agent.archive_dir) / item.file_name, ec);
      if (ec) {
        // The events are in (idempotently), only the move failed; report it
        // so the operator clears the spool by hand.
        report.errors.push_back({item.file_name, "archive move failed: " + ec.message()});
        continue;
      }
    }
    ++report.parsed_ok;
  }
  return report;
}

AggResult<IngestReport> ingest_text(store::RecordStore& store,
                                    const term::TerminologyTable& table,
                                    const std::string& text, std::int64_t now) {
  auto parsed = hl7::parse_message(text);
  if (!parsed.ok()) {
    IngestReport report;
    report.messages_seen = 1;
    report.errors.push_back({"", std::string(hl7::hl7_error_name(parsed.error().code)) + ": " +
                                     parsed.error().detail});
    return report;
  }
  std::string source = parsed.value().sending_facility();
  if (source.empty()) {
    IngestReport report;
    report.messages_seen = 1;
    report.errors.push_back({"", "message names no sending facility to attribute events to"});
    return report;
  }
  SourceAgent pseudo;
  pseudo.source_id = source;
  return ingest(store, table, pseudo, {SpoolItem{"", text}}, now);
}

AggResult<Bytes> refresh_tag_payload(const store::RecordStore& store,
                                     const templates::TemplateRegistry& registry,
                                     const identity::Serial& patient_sn,
                                     std::uint16_t template_id, std::uint8_t version,
                                     const codec::TagProfile& profile,
                                     std::span<const std::uint8_t> mac_key,
                                     const std::string& emr_uri, std::int64_t now) {
  auto t = registry.get_template(template_id, version);
  if (!t.ok()) return err(AggErrorCode::kTemplateNotFound, t.error().detail);

  std::vector<FieldValue> fields = store.build_cip_fields(patient_sn, t.value(), now);
  templates::ValidationReport report = templates::validate_values(t.value(), fields);
  if (!report.valid()) {
    std::string detail;
    bool missing_required = false;
    for (const auto& issue : report.issues) {
      if (issue.verdict == templates::ValueVerdict::kMissingRequired) missing_required = true;
      if (!detail.empty()) detail += "; ";
      detail += std::string(templates::value_verdict_name(issue.verdict)) + ": " + issue.detail;
    }
    return err(missing_required ? AggErrorCode::kMissingRequired : AggErrorCode::kEncodeFailed,
               detail);
  }

  codec::CipPayload payload;
  payload.sn = patient_sn;
  payload.emr_uri = emr_uri;
  payload.template_id = template_id;
  payload.template_version = version;
  payload.updated_at = now < 0 ? 0u : static_cast<std::uint32_t>(now);
  payload.mac_present = !mac_key.empty();
  payload.fields = std::move(fields);

  auto fitted = codec::fit_to_budget(payload, t.value(), profile);
  if (!fitted.ok()) {
    auto code = fitted.error().code == codec::CodecErrorCode::kRequiredFieldsExceedBudget
                    ? AggErrorCode::kBudgetExceeded
                    : AggErrorCode::kEncodeFailed;
    return err(code, fitted.error().detail);
  }
  auto image = codec::encode(fitted.value().payload, mac_key);
  if (!image.ok()) return err(AggErrorCode::kEncodeFailed, image.error().detail);
  return image.value();
}

AggResult<std::vector<SourceAgent>> load_agent_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return err(AggErrorCode::kConfigInvalid, "cannot open agent config " + path);
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  const json* records = nullptr;
  if (doc.is_array()) {
    records = &doc;
  } else if (doc.is_object() && doc.contains("sources") && doc["sources"].is_array()) {
    records = &doc["sources"];
  } else {
    return err(AggErrorCode::kConfigInvalid,
               path + ": expected a JSON array of source records or {\"sources\": [...]}");
  }

  std::vector<SourceAgent> agents;
  for (const json& r : *records) {
    if (!r.is_object())
      return err(AggErrorCode::kConfigInvalid, path + ": source record is not an object");
    SourceAgent a;
    a.source_id = r.value("source_id", std::string{});
    a.spool_dir = r.value("spool_dir", std::string{});
    a.archive_dir = r.value("archive_dir", std::string{});
    a.poll_interval_seconds = r.value("poll_interval_seconds", 5);
    if (a.source_id.empty() || a.spool_dir.empty() || a.archive_dir.empty())
      return err(AggErrorCode::kConfigInvalid,
                 path + ": source records need source_id, spool_dir and archive_dir");
    if (fs::path(a.spool_dir) == fs::path(a.archive_dir))
      return err(AggErrorCode::kConfigInvalid,
                 path + ": spool and archive directories must differ for " + a.source_id);
    if (a.poll_interval_seconds <= 0)
      return err(AggErrorCode::kConfigInvalid, path + ": poll interval must be positive");
    for (const SourceAgent& other : agents) {
      if (other.source_id == a.source_id)
        return err(AggErrorCode::kConfigInvalid, path + ": duplicate source_id " + a.source_id);
    }
    agents.push_back(std::move(a));
  }
  return agents;
}

}  // namespace simopac::agg
