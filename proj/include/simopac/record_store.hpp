#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "simopac/clinical_event.hpp"
#include "simopac/fields.hpp"
#include "simopac/identity.hpp"
#include "simopac/result.hpp"
#include "simopac/templates.hpp"

namespace simopac::store {

/// Per-source view of one patient's record. Events from different
/// facilities are never co-mingled: each section holds only the events of
/// the facility named by its key, sorted by effective time.
struct PatientChart {
  identity::Serial patient_sn{};
  std::map<std::string, std::vector<ClinicalEvent>> sections;

  bool operator==(const PatientChart&) const = default;
  std::size_t event_count() const;
};

struct DischargeSummary {
  identity::Serial patient_sn{};
  std::string source_id;
  std::string narrative;
  std::int64_t discharged_at = 0;
  std::string linked_event_id;
};

enum class AppendOutcome { kAppended, kDuplicateIgnored };

enum class StoreErrorCode {
  kStorageFailure,
  kInvalidEvent,
  kMissingDischargeEvent,
};

struct StoreError {
  StoreErrorCode code;
  std::string detail;
};

template <typename T>
using StoreResult = Result<T, StoreError>;

struct SynopsisOptions {
  std::int64_t medication_window_seconds = 180 * std::int64_t{86400};
};

/// Event-sourced store: an append-only newline-delimited JSON log under
/// `<dir>/events.ndjson`, an optional snapshot for faster startup, and the
/// template metadata log `<dir>/templates.ndjson`. The durability boundary
/// is the fsync before append_event returns; recovery truncates a torn
/// final line and replays the rest.
///
/// Single logical writer: appends are serialized store-wide; readers see a
/// consistent prefix of the log.
class RecordStore {
 public:
  static StoreResult<std::unique_ptr<RecordStore>> open(const std::string& dir);
  ~RecordStore();

  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  StoreResult<AppendOutcome> append_event(const ClinicalEvent& e);
  PatientChart get_chart(const identity::Serial& patient_sn) const;

  /// Deterministic synopsis of the merged chart, one value list per
  /// template in packing order. Pure in (chart, template, now): wall-clock
  /// time never enters. Selection rules are concentrated here:
  ///   blood_type      latest observation coded BT (LOCAL); value from text
  ///   allergy         distinct allergy codes, (system, code) ascending
  ///   active_medication  distinct medication codes within the window
  ///   major_diagnosis distinct diagnosis codes
  ///   last_encounter_date  max effective_at of admit/discharge events
  ///   organ_donor     latest observation coded OD (LOCAL), text as boolean
  /// Fields without data are omitted.
  std::vector<FieldValue> build_cip_fields(const identity::Serial& patient_sn,
                                           const templates::Template& t,
                                           std::int64_t now,
                                           const SynopsisOptions& options = {}) const;

  /// Links a narrative to its discharge event, appending the event when the
  /// summary carries enough to create it.
  StoreResult<AppendOutcome> record_discharge(const DischargeSummary& s,
                                              std::int64_t now);

  /// Writes `<dir>/snapshot.json`; subsequent opens replay only the log
  /// suffix past the snapshot point.
  StoreResult<Unit> write_snapshot() const;

  std::size_t event_count() const;
  std::string directory() const { return dir_; }
  std::string template_log_path() const;

 private:
  RecordStore() = default;

  StoreResult<Unit> load();
  StoreResult<AppendOutcome> append_locked(const ClinicalEvent& e);

  mutable std::shared_mutex mutex_;
  std::string dir_;
  int lock_fd_ = -1;  // flock on <dir>/.lock; released by the OS on death
  int log_fd_ = -1;
  std::size_t log_lines_ = 0;
  std::vector<ClinicalEvent> events_;  // log order
  std::unordered_map<std::string, std::size_t> by_event_id_;
  std::map<identity::Serial, std::vector<std::size_t>> by_patient_;
};

}  // namespace simopac::store
