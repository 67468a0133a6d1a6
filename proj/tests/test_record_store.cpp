#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "simopac/record_store.hpp"
#include "simopac/templates.hpp"
#include "simopac/timeutil.hpp"

using namespace simopac;
using namespace simopac::store;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("simopac-store-" + std::to_string(getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

identity::Serial sn_of(const std::string& hex) {
  auto parsed = identity::parse_serial_hex(hex);
  REQUIRE(parsed.ok());
  return parsed.value();
}

const identity::Serial kSn = sn_of("3FA2C4D1E5B60718");
constexpr std::int64_t kNow = 1767225600;  // 2026-01-01T00:00:00Z

ClinicalEvent make_event(const std::string& id, EventKind kind, const std::string& source,
                         std::int64_t at, std::optional<EventCode> code = std::nullopt,
                         const std::string& text = "") {
  ClinicalEvent e;
  e.event_id = id;
  e.patient_sn = kSn;
  e.source_id = source;
  e.kind = kind;
  e.code = std::move(code);
  e.text = text;
  e.effective_at = at;
  e.received_at = at;
  return e;
}

std::unique_ptr<RecordStore> open_store(const TempDir& dir) {
  auto store = RecordStore::open(dir.path.string());
  REQUIRE(store.ok());
  return std::move(store).value();
}

const FieldValue* find_field(const std::vector<FieldValue>& values, std::uint16_t id) {
  for (const auto& v : values)
    if (v.field_id == id) return &v;
  return nullptr;
}

}  // namespace

TEST_CASE("appends are durable across reopen and duplicates are ignored") {
  TempDir dir;
  {
    auto store = open_store(dir);
    CHECK(store->event_count() == 0);
    auto first = store->append_event(
        make_event("M1/1", EventKind::kDiagnosis, "HOSP-A", kNow,
                   EventCode{"ICD10", "I10", "Hypertension"}));
    REQUIRE(first.ok());
    CHECK(first.value() == AppendOutcome::kAppended);
    auto again = store->append_event(
        make_event("M1/1", EventKind::kDiagnosis, "HOSP-A", kNow,
                   EventCode{"ICD10", "I10", "Hypertension"}));
    REQUIRE(again.ok());
    CHECK(again.value() == AppendOutcome::kDuplicateIgnored);
    CHECK(store->event_count() == 1);
  }
  auto reopened = open_store(dir);
  CHECK(reopened->event_count() == 1);
  auto chart = reopened->get_chart(kSn);
  REQUIRE(chart.sections.count("HOSP-A") == 1);
  CHECK(chart.sections.at("HOSP-A")[0].code->code == "I10");
}

TEST_CASE("invalid events are rejected with the reason") {
  TempDir dir;
  auto store = open_store(dir);

  ClinicalEvent no_id = make_event("", EventKind::kAdmit, "HOSP-A", kNow);
  CHECK(store->append_event(no_id).error().code == StoreErrorCode::kInvalidEvent);

  ClinicalEvent zero_sn = make_event("X/1", EventKind::kAdmit, "HOSP-A", kNow);
  zero_sn.patient_sn = identity::Serial{};
  CHECK(store->append_event(zero_sn).error().code == StoreErrorCode::kInvalidEvent);

  ClinicalEvent no_source = make_event("X/2", EventKind::kAdmit, "", kNow);
  CHECK(store->append_event(no_source).error().code == StoreErrorCode::kInvalidEvent);

  // More than 24h ahead of its own reception is a clock we refuse to trust.
  ClinicalEvent future = make_event("X/3", EventKind::kAdmit, "HOSP-A", kNow);
  future.effective_at = future.received_at + 24 * 3600 + 1;
  CHECK(store->append_event(future).error().code == StoreErrorCode::kInvalidEvent);
  future.effective_at = future.received_at + 24 * 3600;  // exactly at the skew bound
  CHECK(store->append_event(future).ok());

  CHECK(store->event_count() == 1);
}

TEST_CASE("charts keep sources separate and sort each section by time") {
  TempDir dir;
  auto store = open_store(dir);
  REQUIRE(store->append_event(make_event("A/2", EventKind::kDiagnosis, "HOSP-A", kNow + 50,
                                         EventCode{"ICD10", "I10", ""})).ok());
  REQUIRE(store->append_event(make_event("A/1", EventKind::kAdmit, "HOSP-A", kNow)).ok());
  REQUIRE(store->append_event(make_event("B/1", EventKind::kAllergy, "HOSP-B", kNow + 10,
                                         EventCode{"ICD10", "Z88.0", ""})).ok());

  auto chart = store->get_chart(kSn);
  CHECK(chart.patient_sn == kSn);
  REQUIRE(chart.sections.size() == 2);
  REQUIRE(chart.sections.count("HOSP-A") == 1);
  REQUIRE(chart.sections.count("HOSP-B") == 1);
  // Sorted by effective time within the section.
  CHECK(chart.sections.at("HOSP-A")[0].event_id == "A/1");
  CHECK(chart.sections.at("HOSP-A")[1].event_id == "A/2");
  // No event leaks into the other facility's section.
  for (const auto& e : chart.sections.at("HOSP-A")) CHECK(e.source_id == "HOSP-A");
  for (const auto& e : chart.sections.at("HOSP-B")) CHECK(e.source_id == "HOSP-B");
  CHECK(chart.event_count() == 3);

  auto empty = store->get_chart(sn_of("00000000000000FF"));
  CHECK(empty.sections.empty());
  CHECK(empty.event_count() == 0);
}

TEST_CASE("a snapshot shortens replay without changing the result") {
  TempDir dir;
  PatientChart before;
  {
    auto store = open_store(dir);
    for (int i = 0; i < 5; ++i) {
      REQUIRE(store->append_event(make_event("S/" + std::to_string(i), EventKind::kObservation,
                                             "HOSP-A", kNow + i,
                                             EventCode{"LOCAL", "BT", ""}, "O+")).ok());
    }
    REQUIRE(store->write_snapshot().ok());
    // Log keeps growing past the snapshot point.
    REQUIRE(store->append_event(make_event("S/9", EventKind::kAdmit, "HOSP-B", kNow)).ok());
    before = store->get_chart(kSn);
  }
  REQUIRE(fs::exists(dir.path / "snapshot.json"));
  auto reopened = open_store(dir);
  CHECK(reopened->event_count() == 6);
  CHECK(reopened->get_chart(kSn) == before);
}

TEST_CASE("a torn final line is truncated away on open") {
  TempDir dir;
  {
    auto store = open_store(dir);
    REQUIRE(store->append_event(make_event("T/1", EventKind::kAdmit, "HOSP-A", kNow)).ok());
    REQUIRE(store->append_event(make_event("T/2", EventKind::kDischarge, "HOSP-A", kNow)).ok());
  }
  auto log = dir.path / "events.ndjson";
  auto intact_size = fs::file_size(log);
  {
    std::ofstream out(log, std::ios::binary | std::ios::app);
    out << "{\"event_id\":\"T/3\",\"patient";  // crash mid-write: no newline
  }
  auto reopened = open_store(dir);
  CHECK(reopened->event_count() == 2);
  CHECK(fs::file_size(log) == intact_size);  // the torn tail is gone from disk
}

TEST_CASE("a corrupt terminated final line is also recovered by truncation") {
  TempDir dir;
  {
    auto store = open_store(dir);
    REQUIRE(store->append_event(make_event("C/1", EventKind::kAdmit, "HOSP-A", kNow)).ok());
  }
  auto log = dir.path / "events.ndjson";
  auto intact_size = fs::file_size(log);
  {
    std::ofstream out(log, std::ios::binary | std::ios::app);
    out << "this is not json\n";
  }
  auto reopened = open_store(dir);
  CHECK(reopened->event_count() == 1);
  CHECK(fs::file_size(log) == intact_size);
}

TEST_CASE("corruption before the tail refuses to open rather than drop data") {
  TempDir dir;
  {
    auto store = open_store(dir);
    REQUIRE(store->append_event(make_event("C/1", EventKind::kAdmit, "HOSP-A", kNow)).ok());
    REQUIRE(store->append_event(make_event("C/2", EventKind::kDischarge, "HOSP-A", kNow)).ok());
  }
  auto log = dir.path / "events.ndjson";
  std::ifstream in(log, std::ios::binary);
  std::string first_line, second_line;
  std::getline(in, first_line);
  std::getline(in, second_line);
  in.close();
  {
    std::ofstream out(log, std::ios::binary | std::ios::trunc);
    out << first_line << "\n" << "garbage in the middle\n" << second_line << "\n";
  }
  auto failed = RecordStore::open(dir.path.string());
  REQUIRE_FALSE(failed.ok());
  CHECK(failed.error().code == StoreErrorCode::kStorageFailure);
  CHECK(failed.error().detail.find("line 2") != std::string::npos);
}

TEST_CASE("a second opener of the same directory is turned away") {
  TempDir dir;
  auto store = open_store(dir);
  auto second = RecordStore::open(dir.path.string());
  REQUIRE_FALSE(second.ok());
  CHECK(second.error().code == StoreErrorCode::kStorageFailure);
  CHECK(second.error().detail.find("is in use by another process") != std::string::npos);
  store.reset();  // releasing the first lock frees the directory
  CHECK(RecordStore::open(dir.path.string()).ok());
}

TEST_CASE("the synopsis fills every emergency field from the right events") {
  TempDir dir;
  auto store = open_store(dir);
  const templates::Template t = templates::emergency1();

  // Blood type: latest BT observation wins, value taken from trimmed text.
  REQUIRE(store->append_event(make_event("bt/1", EventKind::kObservation, "HOSP-A", kNow - 5000,
                                         EventCode{"LOCAL", "BT", ""}, "A+")).ok());
  REQUIRE(store->append_event(make_event("bt/2", EventKind::kObservation, "HOSP-B", kNow - 100,
                                         EventCode{"LOCAL", "BT", ""}, "  O+ ")).ok());
  // Allergies: duplicates collapse, output ordered by (system, code).
  REQUIRE(store->append_event(make_event("al/1", EventKind::kAllergy, "HOSP-A", kNow - 90,
                                         EventCode{"ICD10", "Z91.010", ""})).ok());
  REQUIRE(store->append_event(make_event("al/2", EventKind::kAllergy, "HOSP-B", kNow - 80,
                                         EventCode{"ICD10", "Z88.0", ""})).ok());
  REQUIRE(store->append_event(make_event("al/3", EventKind::kAllergy, "CLINIC-C", kNow - 70,
                                         EventCode{"ICD10", "Z88.0", ""})).ok());
  // Medications: only those inside the 180-day window count as active.
  REQUIRE(store->append_event(make_event("rx/old", EventKind::kMedication, "HOSP-A",
                                         kNow - 200 * 86400,
                                         EventCode{"NDL", "N99999", ""})).ok());
  REQUIRE(store->append_event(make_event("rx/new", EventKind::kMedication, "HOSP-A",
                                         kNow - 10 * 86400,
                                         EventCode{"NDL", "N02541", ""})).ok());
  // Diagnoses: distinct codes regardless of age.
  REQUIRE(store->append_event(make_event("dg/1", EventKind::kDiagnosis, "HOSP-A",
                                         kNow - 400 * 86400,
                                         EventCode{"ICD10", "E11.9", ""})).ok());
  // Encounters: the latest admit/discharge drives the date, floored to days.
  REQUIRE(store->append_event(make_event("ad/1", EventKind::kAdmit, "HOSP-A",
                                         kNow - 3 * 86400)).ok());
  REQUIRE(store->append_event(make_event("di/1", EventKind::kDischarge, "HOSP-A",
                                         kNow - 86400 + 3600)).ok());
  // Organ donor: latest OD observation parsed as a boolean.
  REQUIRE(store->append_event(make_event("od/1", EventKind::kObservation, "HOSP-A", kNow - 50,
                                         EventCode{"LOCAL", "OD", ""}, "Yes")).ok());

  auto values = store->build_cip_fields(kSn, t, kNow);

  const FieldValue* blood = find_field(values, 1);
  REQUIRE(blood != nullptr);
  CHECK(*blood == FieldValue::code(1, 0x01, "O+"));

  std::vector<std::string> allergy_codes;
  for (const auto& v : values)
    if (v.field_id == 2) allergy_codes.push_back(std::get<CodedValue>(v.value).code);
  CHECK(allergy_codes == std::vector<std::string>{"Z88.0", "Z91.010"});

  std::vector<std::string> med_codes;
  for (const auto& v : values)
    if (v.field_id == 3) med_codes.push_back(std::get<CodedValue>(v.value).code);
  CHECK(med_codes == std::vector<std::string>{"N02541"});  // the stale one is out

  const FieldValue* dx = find_field(values, 4);
  REQUIRE(dx != nullptr);
  CHECK(std::get<CodedValue>(dx->value).code == "E11.9");

  const FieldValue* date = find_field(values, 5);
  REQUIRE(date != nullptr);
  CHECK(std::get<std::int32_t>(date->value) ==
        static_cast<std::int32_t>((kNow - 86400 + 3600) / 86400));

  const FieldValue* donor = find_field(values, 6);
  REQUIRE(donor != nullptr);
  CHECK(std::get<bool>(donor->value) == true);

  // Nothing fills free_text_note; it is simply absent.
  CHECK(find_field(values, 7) == nullptr);

  // The output follows the template packing order.
  auto order = templates::packing_order(t);
  std::vector<std::uint16_t> positions;
  for (const auto& f : order) {
    for (const auto& v : values)
      if (v.field_id == f.field_id) positions.push_back(v.field_id);
  }
  std::vector<std::uint16_t> actual;
  for (const auto& v : values) actual.push_back(v.field_id);
  CHECK(actual == positions);
}

TEST_CASE("the synopsis is pure in its now argument") {
  TempDir dir;
  auto store = open_store(dir);
  REQUIRE(store->append_event(make_event("rx/1", EventKind::kMedication, "HOSP-A",
                                         kNow - 10 * 86400,
                                         EventCode{"NDL", "N02541", ""})).ok());
  const templates::Template t = templates::emergency1();
  CHECK(store->build_cip_fields(kSn, t, kNow).size() == 1);
  // Pushing `now` far past the window empties the medication list.
  CHECK(store->build_cip_fields(kSn, t, kNow + 400 * 86400).empty());
}

TEST_CASE("boolean and blood values that cannot be parsed are omitted") {
  TempDir dir;
  auto store = open_store(dir);
  REQUIRE(store->append_event(make_event("od/1", EventKind::kObservation, "HOSP-A", kNow,
                                         EventCode{"LOCAL", "OD", ""}, "maybe")).ok());
  REQUIRE(store->append_event(make_event("bt/1", EventKind::kObservation, "HOSP-A", kNow,
                                         EventCode{"LOCAL", "BT", ""}, "   ")).ok());
  CHECK(store->build_cip_fields(kSn, templates::emergency1(), kNow).empty());

  // A later, parseable reading replaces the unparseable one.
  REQUIRE(store->append_event(make_event("od/2", EventKind::kObservation, "HOSP-A", kNow + 1,
                                         EventCode{"LOCAL", "OD", ""}, "no")).ok());
  auto values = store->build_cip_fields(kSn, templates::emergency1(), kNow + 1);
  REQUIRE(values.size() == 1);
  CHECK(std::get<bool>(values[0].value) == false);
}

TEST_CASE("same-instant observations settle on the later log entry") {
  TempDir dir;
  auto store = open_store(dir);
  REQUIRE(store->append_event(make_event("bt/1", EventKind::kObservation, "HOSP-A", kNow,
                                         EventCode{"LOCAL", "BT", ""}, "A-")).ok());
  REQUIRE(store->append_event(make_event("bt/2", EventKind::kObservation, "HOSP-B", kNow,
                                         EventCode{"LOCAL", "BT", ""}, "B+")).ok());
  auto values = store->build_cip_fields(kSn, templates::emergency1(), kNow);
  REQUIRE(values.size() == 1);
  CHECK(std::get<CodedValue>(values[0].value).code == "B+");
}

TEST_CASE("dates before the epoch floor toward minus infinity") {
  TempDir dir;
  auto store = open_store(dir);
  ClinicalEvent e = make_event("ad/1", EventKind::kAdmit, "HOSP-A", -1);
  e.received_at = 0;
  REQUIRE(store->append_event(e).ok());
  auto values = store->build_cip_fields(kSn, templates::emergency1(), 0);
  REQUIRE(values.size() == 1);
  CHECK(std::get<std::int32_t>(values[0].value) == -1);
}

TEST_CASE("record_discharge covers its four outcomes") {
  TempDir dir;
  auto store = open_store(dir);

  DischargeSummary s;
  s.patient_sn = kSn;
  s.source_id = "HOSP-A";
  s.narrative = "Discharged stable.";
  s.discharged_at = kNow - 3600;
  s.linked_event_id = "";
  CHECK(store->record_discharge(s, kNow).error().code == StoreErrorCode::kInvalidEvent);

  // No such event yet, but the summary carries enough to create it.
  s.linked_event_id = "DIS/0";
  auto created = store->record_discharge(s, kNow);
  REQUIRE(created.ok());
  CHECK(created.value() == AppendOutcome::kAppended);
  auto chart = store->get_chart(kSn);
  REQUIRE(chart.sections.at("HOSP-A").size() == 1);
  CHECK(chart.sections.at("HOSP-A")[0].kind == EventKind::kDischarge);
  CHECK(chart.sections.at("HOSP-A")[0].text == "Discharged stable.");
  CHECK(chart.sections.at("HOSP-A")[0].received_at == kNow);

  // Linking the same summary again is idempotent.
  auto relinked = store->record_discharge(s, kNow + 10);
  REQUIRE(relinked.ok());
  CHECK(relinked.value() == AppendOutcome::kDuplicateIgnored);
  CHECK(store->event_count() == 1);

  // Linking to a non-discharge event is a caller error.
  REQUIRE(store->append_event(make_event("ADM/1", EventKind::kAdmit, "HOSP-A", kNow)).ok());
  s.linked_event_id = "ADM/1";
  CHECK(store->record_discharge(s, kNow).error().code == StoreErrorCode::kInvalidEvent);

  // Unknown event and a summary too bare to create one.
  DischargeSummary bare;
  bare.linked_event_id = "DIS/404";
  bare.narrative = "text only";
  CHECK(store->record_discharge(bare, kNow).error().code ==
        StoreErrorCode::kMissingDischargeEvent);
}
