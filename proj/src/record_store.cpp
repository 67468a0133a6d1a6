#include "simopac/record_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include <json.hpp>

#include "simopac/terminology.hpp"

namespace simopac::store {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kLogName = "events.ndjson";
constexpr const char* kSnapshotName = "snapshot.json";
constexpr const char* kTemplateLogName = "templates.ndjson";

StoreError storage_error(const std::string& what) {
  return StoreError{StoreErrorCode::kStorageFailure, what};
}

std::int64_t floor_div_days(std::int64_t seconds) {
  std::int64_t d = seconds / 86400;
  if (seconds % 86400 != 0 && seconds < 0) --d;
  return d;
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<bool> parse_bool_text(const std::string& raw) {
  std::string s = trimmed(raw);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "1" || s == "true" || s == "y" || s == "yes" || s == "t") return true;
  if (s == "0" || s == "false" || s == "n" || s == "no" || s == "f") return false;
  return std::nullopt;
}

/// Latest wins by effective time; ties resolved toward the later log entry
/// so re-sends of the same instant settle deterministically.
struct LatestPick {
  const ClinicalEvent* event = nullptr;
  std::size_t index = 0;
  void offer(const ClinicalEvent& e, std::size_t idx) {
    if (event == nullptr || e.effective_at > event->effective_at ||
        (e.effective_at == event->effective_at && idx > index)) {
      event = &e;
      index = idx;
    }
  }
};

}  // namespace

std::size_t PatientChart::event_count() const {
  std::size_t n = 0;
  for (const auto& [source, events] : sections) n += events.size();
  return n;
}

RecordStore::~RecordStore() {
  if (log_fd_ >= 0) ::close(log_fd_);
  if (lock_fd_ >= 0) ::close(lock_fd_);  // drops the flock
}

std::string RecordStore::template_log_path() const {
  return (fs::path(dir_) / kTemplateLogName).string();
}

StoreResult<std::unique_ptr<RecordStore>> RecordStore::open(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return storage_error("cannot create data directory " + dir + ": " + ec.message());

  auto store = std::unique_ptr<RecordStore>(new RecordStore());
  store->dir_ = dir;

  // One writer per data directory across processes. flock (not a marker
  // file) so a killed process never leaves the store wedged.
  const std::string lock_path = (fs::path(dir) / ".lock").string();
  store->lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (store->lock_fd_ < 0)
    return storage_error("cannot open lock file " + lock_path + ": " + std::strerror(errno));
  if (::flock(store->lock_fd_, LOCK_EX | LOCK_NB) != 0)
    return storage_error("data directory " + dir + " is in use by another process");

  auto loaded = store->load();
  if (!loaded.ok()) return loaded.error();

  const std::string log_path = (fs::path(dir) / kLogName).string();
  store->log_fd_ = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (store->log_fd_ < 0)
    return storage_error("cannot open event log " + log_path + ": " + std::strerror(errno));

  // Make the log's directory entry durable so a fresh store survives an
  // immediate crash.
  int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
  return store;
}

StoreResult<Unit> RecordStore::load() {
  const fs::path log_path = fs::path(dir_) / kLogName;
  const fs::path snap_path = fs::path(dir_) / kSnapshotName;

  // Read the raw log once; byte offsets drive torn-tail truncation.
  std::string raw;
  if (fs::exists(log_path)) {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) return storage_error("cannot read event log " + log_path.string());
    raw.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  struct Line {
    std::size_t begin;
    std::size_t end;  // exclusive, before the newline
    bool terminated;
  };
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t nl = raw.find('\n', pos);
    if (nl == std::string::npos) {
      lines.push_back({pos, raw.size(), false});
      break;
    }
    lines.push_back({pos, nl, true});
    pos = nl + 1;
  }

  // A write interrupted by a crash leaves an unterminated tail; drop it.
  if (!lines.empty() && !lines.back().terminated) {
    std::error_code ec;
    fs::resize_file(log_path, lines.back().begin, ec);
    if (ec) return storage_error("cannot truncate torn log tail: " + ec.message());
    lines.pop_back();
  }

  std::size_t start_line = 0;
  if (fs::exists(snap_path)) {
    std::ifstream in(snap_path, std::ios::binary);
    json snap = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (snap.is_object() && snap.value("version", 0) == 1 && snap.contains("events") &&
        snap["events"].is_array()) {
      std::size_t applied = snap.value("applied_lines", std::size_t{0});
      if (applied <= lines.size()) {
        bool ok = true;
        std::vector<ClinicalEvent> loaded;
        for (const auto& je : snap["events"]) {
          auto e = event_from_json(je.dump());
          if (!e.ok()) {
            ok = false;
            break;
          }
          loaded.push_back(std::move(e.value()));
        }
        if (ok) {
          for (auto& e : loaded) {
            if (by_event_id_.count(e.event_id) != 0) continue;
            by_event_id_.emplace(e.event_id, events_.size());
            by_patient_[e.patient_sn].push_back(events_.size());
            events_.push_back(std::move(e));
          }
          start_line = applied;
        }
      }
      // A snapshot that does not match the log (or fails to parse) is
      // ignored; the log alone is authoritative.
    }
  }

  for (std::size_t i = start_line; i < lines.size(); ++i) {
    std::string line = raw.substr(lines[i].begin, lines[i].end - lines[i].begin);
    if (trimmed(line).empty()) continue;
    auto e = event_from_json(line);
    if (!e.ok()) {
      if (i + 1 == lines.size()) {
        // Corrupt final line: recover by truncating it, same as a torn tail.
        std::error_code ec;
        fs::resize_file(log_path, lines[i].begin, ec);
        if (ec) return storage_error("cannot truncate corrupt log tail: " + ec.message());
        break;
      }
      return storage_error("corrupt event log at line " + std::to_string(i + 1) + ": " +
                           e.error());
    }
    ClinicalEvent ev = std::move(e.value());
    if (by_event_id_.count(ev.event_id) != 0) continue;
    by_event_id_.emplace(ev.event_id, events_.size());
    by_patient_[ev.patient_sn].push_back(events_.size());
    events_.push_back(std::move(ev));
  }
  log_lines_ = lines.size();
  return Unit{};
}

StoreResult<AppendOutcome> RecordStore::append_event(const ClinicalEvent& e) {
  std::unique_lock lock(mutex_);
  return append_locked(e);
}

StoreResult<AppendOutcome> RecordStore::append_locked(const ClinicalEvent& e) {
  auto problem = validate_event(e);
  if (problem.has_value()) return StoreError{StoreErrorCode::kInvalidEvent, *problem};
  if (by_event_id_.count(e.event_id) != 0) return AppendOutcome::kDuplicateIgnored;

  std::string line = event_to_json(e);
  line.push_back('\n');
  std::size_t written = 0;
  while (written < line.size()) {
    ssize_t n = ::write(log_fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      return storage_error(std::string("event log write failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  // Durability boundary: once fsync returns, the event survives a crash.
  if (::fsync(log_fd_) != 0)
    return storage_error(std::string("event log fsync failed: ") + std::strerror(errno));

  by_event_id_.emplace(e.event_id, events_.size());
  by_patient_[e.patient_sn].push_back(events_.size());
  events_.push_back(e);
  ++log_lines_;
  return AppendOutcome::kAppended;
}

PatientChart RecordStore::get_chart(const identity::Serial& patient_sn) const {
  std::shared_lock lock(mutex_);
  PatientChart chart;
  chart.patient_sn = patient_sn;
  auto it = by_patient_.find(patient_sn);
  if (it == by_patient_.end()) return chart;
  for (std::size_t idx : it->second) {
    const ClinicalEvent& e = events_[idx];
    chart.sections[e.source_id].push_back(e);
  }
  for (auto& [source, events] : chart.sections) {
    std::stable_sort(events.begin(), events.end(),
                     [](const ClinicalEvent& a, const ClinicalEvent& b) {
                       return a.effective_at < b.effective_at;
                     });
  }
  return chart;
}

std::vector<FieldValue> RecordStore::build_cip_fields(const identity::Serial& patient_sn,
                                                      const templates::Template& t,
                                                      std::int64_t now,
                                                      const SynopsisOptions& options) const {
  std::shared_lock lock(mutex_);
  std::vector<const ClinicalEvent*> evs;
  std::vector<std::size_t> idxs;
  if (auto it = by_patient_.find(patient_sn); it != by_patient_.end()) {
    for (std::size_t idx : it->second) {
      evs.push_back(&events_[idx]);
      idxs.push_back(idx);
    }
  }

  // Distinct codes for one event kind, ordered (system, code) ascending.
  auto distinct_codes = [&](EventKind kind, bool windowed) {
    std::set<std::pair<std::uint8_t, std::string>> seen;
    for (const ClinicalEvent* e : evs) {
      if (e->kind != kind || !e->code.has_value()) continue;
      if (windowed) {
        std::int64_t age = now - e->effective_at;
        if (age > options.medication_window_seconds ||
            -age > options.medication_window_seconds)
          continue;
      }
      auto sys = term::system_from_name(e->code->system);
      if (!sys.has_value() || e->code->code.empty()) continue;
      seen.emplace(static_cast<std::uint8_t>(*sys), e->code->code);
    }
    return seen;
  };

  auto latest_local_observation = [&](const std::string& code) -> const ClinicalEvent* {
    LatestPick pick;
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const ClinicalEvent* e = evs[i];
      if (e->kind != EventKind::kObservation || !e->code.has_value()) continue;
      if (e->code->system != "LOCAL" || e->code->code != code) continue;
      pick.offer(*e, idxs[i]);
    }
    return pick.event;
  };

  std::vector<FieldValue> out;
  for (const templates::TemplateField& f : templates::packing_order(t)) {
    if (f.name == "blood_type") {
      const ClinicalEvent* e = latest_local_observation("BT");
      if (e != nullptr && !trimmed(e->text).empty())
        out.push_back(FieldValue::code(
            f.field_id, static_cast<std::uint8_t>(term::SystemId::kLocal), trimmed(e->text)));
    } else if (f.name == "allergy") {
      for (const auto& [sys, code] : distinct_codes(EventKind::kAllergy, false))
        out.push_back(FieldValue::code(f.field_id, sys, code));
    } else if (f.name == "active_medication") {
      for (const auto& [sys, code] : distinct_codes(EventKind::kMedication, true))
        out.push_back(FieldValue::code(f.field_id, sys, code));
    } else if (f.name == "major_diagnosis") {
      for (const auto& [sys, code] : distinct_codes(EventKind::kDiagnosis, false))
        out.push_back(FieldValue::code(f.field_id, sys, code));
    } else if (f.name == "last_encounter_date") {
      LatestPick pick;
      for (std::size_t i = 0; i < evs.size(); ++i) {
        if (evs[i]->kind == EventKind::kAdmit || evs[i]->kind == EventKind::kDischarge)
          pick.offer(*evs[i], idxs[i]);
      }
      if (pick.event != nullptr)
        out.push_back(FieldValue::date(
            f.field_id, static_cast<std::int32_t>(floor_div_days(pick.event->effective_at))));
    } else if (f.name == "organ_donor") {
      const ClinicalEvent* e = latest_local_observation("OD");
      if (e != nullptr) {
        auto b = parse_bool_text(e->text);
        if (b.has_value()) out.push_back(FieldValue::boolean(f.field_id, *b));
      }
    }
    // Fields this synopsis does not know how to fill stay absent.
  }
  return out;
}

StoreResult<AppendOutcome> RecordStore::record_discharge(const DischargeSummary& s,
                                                         std::int64_t now) {
  std::unique_lock lock(mutex_);
  if (s.linked_event_id.empty())
    return StoreError{StoreErrorCode::kInvalidEvent, "discharge summary has no linked event id"};
  if (auto it = by_event_id_.find(s.linked_event_id); it != by_event_id_.end()) {
    if (events_[it->second].kind != EventKind::kDischarge)
      return StoreError{StoreErrorCode::kInvalidEvent,
                        "linked event " + s.linked_event_id + " is not a discharge"};
    return AppendOutcome::kDuplicateIgnored;
  }
  bool has_payload = !identity::is_zero(s.patient_sn) && !s.source_id.empty();
  if (!has_payload)
    return StoreError{StoreErrorCode::kMissingDischargeEvent,
                      "no discharge event " + s.linked_event_id + " and summary lacks the "
                      "patient/source needed to create one"};

  ClinicalEvent e;
  e.event_id = s.linked_event_id;
  e.patient_sn = s.patient_sn;
  e.source_id = s.source_id;
  e.kind = EventKind::kDischarge;
  e.text = s.narrative;
  e.effective_at = s.discharged_at;
  e.received_at = now;
  return append_locked(e);
}

StoreResult<Unit> RecordStore::write_snapshot() const {
  std::shared_lock lock(mutex_);
  json snap;
  snap["version"] = 1;
  snap["applied_lines"] = log_lines_;
  json arr = json::array();
  for (const auto& e : events_) arr.push_back(json::parse(event_to_json(e)));
  snap["events"] = std::move(arr);

  const fs::path final_path = fs::path(dir_) / kSnapshotName;
  const fs::path tmp_path = fs::path(dir_) / (std::string(kSnapshotName) + ".tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) return storage_error("cannot write snapshot " + tmp_path.string());
    out << snap.dump() << '\n';
    if (!out.flush()) return storage_error("snapshot flush failed");
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) return storage_error("snapshot rename failed: " + ec.message());
  return Unit{};
}

std::size_t RecordStore::event_count() const {
  std::shared_lock lock(mutex_);
  return events_.size();
}

}  // namespace simopac::store
