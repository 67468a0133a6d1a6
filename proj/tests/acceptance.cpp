// Acceptance gate for the toolkit: twelve scripted criteria, one PASS/FAIL
// line each, nonzero exit when any of them fails.
//
//   usage: acceptance <simopac-cli> <fixtures-dir>
//
// Everything runs against throwaway directories under the system temp root;
// the only inputs taken from the repository are the CLI binary and the
// fixture corpus (HL7-lite messages, terminology tables).

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "simopac/access_control.hpp"
#include "simopac/aggregation.hpp"
#include "simopac/bytes.hpp"
#include "simopac/clinical_event.hpp"
#include "simopac/fields.hpp"
#include "simopac/hl7lite.hpp"
#include "simopac/identity.hpp"
#include "simopac/record_store.hpp"
#include "simopac/service.hpp"
#include "simopac/tag_codec.hpp"
#include "simopac/templates.hpp"
#include "simopac/terminology.hpp"

namespace fs = std::filesystem;
using namespace simopac;
using nlohmann::json;

namespace {

std::string g_cli;       // path to the simopac binary
std::string g_fixtures;  // path to the fixture corpus

// Deterministic randomness: the gate checks properties, not luck.
std::mt19937_64 g_rng(0x51304f50414331ULL);

std::uint64_t rand_below(std::uint64_t n) { return g_rng() % n; }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("simopac-acc-" + tag + "-" + std::to_string(getpid()) + "-" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return result;
  char buffer[4096];
  std::size_t n;
  while ((n = fread(buffer, 1, sizeof buffer, pipe)) > 0) result.output.append(buffer, n);
  int status = pclose(pipe);
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  return result;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

identity::Serial random_serial() {
  identity::Serial sn{};
  do {
    for (auto& b : sn) b = static_cast<std::uint8_t>(g_rng());
  } while (identity::is_zero(sn));
  return sn;
}

std::string random_text(std::size_t max_len) {
  static const char alphabet[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .-";
  std::string s;
  std::size_t len = rand_below(max_len + 1);
  s.reserve(len);
  for (std::size_t i = 0; i < len; ++i)
    s.push_back(alphabet[rand_below(sizeof alphabet - 1)]);
  return s;
}

// HL7 corpus files use any of CR / LF / CRLF; the canonical serialized form
// is CR-terminated with a trailing terminator.
std::string canonical_hl7(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out.push_back('\r');
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else if (text[i] == '\n') {
      out.push_back('\r');
    } else {
      out.push_back(text[i]);
    }
  }
  if (!out.empty() && out.back() != '\r') out.push_back('\r');
  return out;
}

std::vector<fs::path> hl7_corpus() {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(g_fixtures + "/hl7"))
    if (entry.is_regular_file() && entry.path().extension() == ".hl7")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

term::TerminologyTable fixture_table() {
  auto loaded = term::TerminologyTable::load(g_fixtures + "/terminology/concepts.tsv",
                                             g_fixtures + "/terminology/mappings.tsv");
  if (!loaded.ok()) throw std::runtime_error("fixture terminology: " + loaded.error().detail);
  return std::move(loaded).value();
}

// The sealed emergency-card fixture used by criteria 2 and 4. Field bytes:
//   blood type       entry 5 + (1+2)  =  8
//   5 allergies      entry 5 + (1+3)  =  9 each, 45
//   8 medications    entry 5 + (1+4)  = 10 each, 80
//   4 diagnoses      entry 5 + (1+3)  =  9 each, 36
//   encounter date   entry 5 + 4      =  9
//   donor flag       entry 5 + 1      =  6
// total field bytes 184; header 22 + uri 13 + CRC 2 + MAC 32 = 253 bytes.
codec::CipPayload emergency_card_payload() {
  codec::CipPayload p;
  auto sn = identity::parse_serial_hex("3FA2C4D1E5B60718");
  p.sn = sn.value();
  p.emr_uri = "simopac://h/e";
  p.template_id = 1;
  p.template_version = 1;
  p.updated_at = 1767225600;  // 2026-01-01T00:00:00Z
  p.mac_present = true;
  const std::uint8_t icd10 = 0x03, ndl = 0x04, local = 0x01;
  p.fields.push_back(FieldValue::code(1, local, "O+"));
  for (const char* a : {"Z88", "Z91", "T78", "L50", "J30"})
    p.fields.push_back(FieldValue::code(2, icd10, a));
  for (const char* m : {"N001", "N002", "N003", "N004", "N005", "N006", "N007", "N008"})
    p.fields.push_back(FieldValue::code(3, ndl, m));
  for (const char* d : {"E11", "I10", "J45", "N18"})
    p.fields.push_back(FieldValue::code(4, icd10, d));
  p.fields.push_back(FieldValue::date(5, 20454));  // 2026-01-01
  p.fields.push_back(FieldValue::boolean(6, true));
  return p;
}

Bytes fixture_mac_key() {
  Bytes key(32);
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<std::uint8_t>(0xA5 ^ i);
  return key;
}

// ---------------------------------------------------------------------------
// criterion implementations; each returns an empty string on success or a
// failure description.

std::string criterion_1_codec_roundtrip(std::string& note) {
  for (int trial = 0; trial < 1000; ++trial) {
    codec::CipPayload p;
    p.sn = random_serial();
    p.emr_uri = "simopac://node" + std::to_string(rand_below(100)) + ".example:" +
                std::to_string(1024 + rand_below(60000)) + "/realm" +
                std::to_string(rand_below(10));
    p.template_id = static_cast<std::uint16_t>(g_rng());
    p.template_version = static_cast<std::uint8_t>(g_rng());
    p.updated_at = static_cast<std::uint32_t>(g_rng());
    p.mac_present = false;
    std::size_t field_count = rand_below(13);
    for (std::size_t i = 0; i < field_count; ++i) {
      auto id = static_cast<std::uint16_t>(g_rng());
      switch (rand_below(6)) {
        case 0: p.fields.push_back(FieldValue::text(id, random_text(40))); break;
        case 1: p.fields.push_back(FieldValue::identifier(id, random_text(24))); break;
        case 2:
          p.fields.push_back(FieldValue::code(id, static_cast<std::uint8_t>(g_rng()),
                                              "C" + random_text(11)));
          break;
        case 3: p.fields.push_back(FieldValue::date(id, static_cast<std::int32_t>(g_rng()))); break;
        case 4: {
          // Bit-pattern magnitudes cover subnormals, infinities and NaNs;
          // quantity equality is bitwise, so they must all survive.
          double magnitude;
          std::uint64_t bits = g_rng();
          std::memcpy(&magnitude, &bits, sizeof magnitude);
          p.fields.push_back(FieldValue::quantity(id, magnitude, random_text(8)));
          break;
        }
        default: p.fields.push_back(FieldValue::boolean(id, rand_below(2) == 1)); break;
      }
    }

    auto image = codec::encode(p);
    if (!image.ok())
      return "trial " + std::to_string(trial) +
             ": encode failed: " + codec::codec_error_name(image.error().code);
    if (image.value().size() != codec::encoded_size(p))
      return "trial " + std::to_string(trial) + ": encoded_size disagrees with encode";
    auto back = codec::decode(image.value());
    if (!back.ok())
      return "trial " + std::to_string(trial) +
             ": decode failed: " + codec::codec_error_name(back.error().code);
    if (!(back.value() == p))
      return "trial " + std::to_string(trial) + ": decoded payload differs from input";
  }
  note = "1000/1000 randomized payloads decoded back identically";
  return {};
}

std::string criterion_2_corruption(std::string& note) {
  Bytes key = fixture_mac_key();
  auto image = codec::encode(emergency_card_payload(), key);
  if (!image.ok()) return "fixture encode failed";
  const Bytes& original = image.value();

  std::size_t checks = 0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    for (std::uint8_t flip : {std::uint8_t{0x01}, std::uint8_t{0x80}, std::uint8_t{0xFF}}) {
      Bytes mutated = original;
      mutated[i] ^= flip;
      bool detected = false;
      auto decoded = codec::decode(mutated);
      if (!decoded.ok()) {
        detected = true;
      } else {
        auto sealed = codec::verify_seal(mutated, key);
        detected = !sealed.ok() || !sealed.value();
      }
      if (!detected)
        return "byte " + std::to_string(i) + " xor 0x" +
               std::to_string(static_cast<int>(flip)) + " went undetected";
      ++checks;
    }
  }
  note = "all " + std::to_string(checks) + " single-byte corruptions of a " +
         std::to_string(original.size()) + "-byte sealed image detected";
  return {};
}

std::string criterion_3_byte_budget(std::string& note) {
  const codec::TagProfile profiles[] = {codec::tag_profile_2k(), codec::tag_profile_32k()};
  std::size_t fitted = 0, overflowed = 0;

  for (int trial = 0; trial < 500; ++trial) {
    // A randomized template...
    templates::Template t;
    t.template_id = static_cast<std::uint16_t>(2 + rand_below(60000));
    t.version = 1;
    t.name = "random-" + std::to_string(trial);
    std::size_t n_fields = 1 + rand_below(8);
    for (std::size_t i = 0; i < n_fields; ++i) {
      templates::TemplateField f;
      f.field_id = static_cast<std::uint16_t>(i + 1);
      f.name = "f" + std::to_string(i + 1);
      f.required = rand_below(10) < 4;
      f.priority = static_cast<std::uint8_t>(1 + rand_below(9));
      f.repeatable = rand_below(10) < 3;
      switch (rand_below(6)) {
        case 0: f.kind = FieldKind::kText; f.max_len = static_cast<std::uint16_t>(1 + rand_below(120)); break;
        case 1: f.kind = FieldKind::kIdentifier; f.max_len = static_cast<std::uint16_t>(1 + rand_below(40)); break;
        case 2: f.kind = FieldKind::kCode; f.max_len = static_cast<std::uint16_t>(2 + rand_below(15)); f.code_system = 0x03; break;
        case 3: f.kind = FieldKind::kDate; f.max_len = 4; break;
        case 4: f.kind = FieldKind::kQuantity; f.max_len = static_cast<std::uint16_t>(9 + rand_below(17)); break;
        default: f.kind = FieldKind::kBoolean; f.max_len = 1; break;
      }
      t.fields.push_back(f);
    }

    // ...and a value set drawn from it.
    codec::CipPayload p;
    p.sn = random_serial();
    p.emr_uri = "simopac://" + random_text(20) + "h/realm";
    p.template_id = t.template_id;
    p.template_version = t.version;
    p.updated_at = static_cast<std::uint32_t>(g_rng());
    for (const auto& f : t.fields) {
      if (!f.required && rand_below(10) >= 7) continue;
      std::size_t copies = f.repeatable ? 1 + rand_below(4) : 1;
      for (std::size_t c = 0; c < copies; ++c) {
        switch (f.kind) {
          case FieldKind::kText: p.fields.push_back(FieldValue::text(f.field_id, random_text(f.max_len))); break;
          case FieldKind::kIdentifier: p.fields.push_back(FieldValue::identifier(f.field_id, random_text(f.max_len))); break;
          case FieldKind::kCode: {
            std::string code = "K" + random_text(f.max_len - 2);
            p.fields.push_back(FieldValue::code(f.field_id, 0x03, code));
            break;
          }
          case FieldKind::kDate: p.fields.push_back(FieldValue::date(f.field_id, static_cast<std::int32_t>(g_rng()))); break;
          case FieldKind::kQuantity: p.fields.push_back(FieldValue::quantity(f.field_id, static_cast<double>(g_rng()) / 7.0, random_text(f.max_len - 9))); break;
          case FieldKind::kBoolean: p.fields.push_back(FieldValue::boolean(f.field_id, rand_below(2) == 1)); break;
        }
      }
    }

    for (const auto& profile : profiles) {
      auto fit = codec::fit_to_budget(p, t, profile);
      if (fit.ok()) {
        ++fitted;
        auto image = codec::encode(fit.value().payload);
        if (!image.ok())
          return "trial " + std::to_string(trial) + " " + profile.name +
                 ": fitted payload does not encode";
        if (image.value().size() > profile.capacity_bytes)
          return "trial " + std::to_string(trial) + " " + profile.name + ": fitted image is " +
                 std::to_string(image.value().size()) + " bytes, over " +
                 std::to_string(profile.capacity_bytes);
        // No silent truncation: every input value is either kept or named
        // in the drop list.
        std::map<std::uint16_t, long> balance;
        for (const auto& v : p.fields) ++balance[v.field_id];
        for (const auto& v : fit.value().payload.fields) --balance[v.field_id];
        for (std::uint16_t id : fit.value().dropped) --balance[id];
        for (const auto& [id, count] : balance)
          if (count != 0)
            return "trial " + std::to_string(trial) + " " + profile.name + ": field " +
                   std::to_string(id) + " neither kept nor reported dropped";
      } else {
        ++overflowed;
        if (fit.error().code != codec::CodecErrorCode::kRequiredFieldsExceedBudget)
          return "trial " + std::to_string(trial) + " " + profile.name +
                 ": wrong overflow error " + codec::codec_error_name(fit.error().code);
        // The declared error must be truthful: required values alone
        // really do not fit.
        codec::CipPayload required_only = p;
        required_only.fields.clear();
        for (const auto& v : p.fields) {
          const auto* f = t.find_field(v.field_id);
          if (f != nullptr && f->required) required_only.fields.push_back(v);
        }
        if (codec::encoded_size(required_only) <= profile.capacity_bytes)
          return "trial " + std::to_string(trial) + " " + profile.name +
                 ": overflow reported but required fields fit";
      }
    }
  }
  if (fitted == 0 || overflowed == 0)
    return "coverage hole: " + std::to_string(fitted) + " fits, " +
           std::to_string(overflowed) + " overflows";
  note = std::to_string(fitted) + " fits within budget, " + std::to_string(overflowed) +
         " required-field overflows all raised the declared error";
  return {};
}

std::string criterion_4_emergency_card(std::string& note) {
  auto payload = emergency_card_payload();
  auto report = templates::validate_values(templates::emergency1(), payload.fields);
  if (!report.valid()) return "card payload does not validate against EMERGENCY-1";

  if (codec::encoded_size(payload) != 253)
    return "documented size arithmetic is wrong: encoded_size says " +
           std::to_string(codec::encoded_size(payload));
  Bytes key = fixture_mac_key();
  auto image = codec::encode(payload, key);
  if (!image.ok()) return "encode failed";
  if (image.value().size() != 253)
    return "sealed image is " + std::to_string(image.value().size()) + " bytes, expected 253";
  if (image.value().size() > codec::tag_profile_2k().capacity_bytes)
    return "sealed image exceeds TAG-2K";
  auto fit = codec::fit_to_budget(payload, templates::emergency1(), codec::tag_profile_2k());
  if (!fit.ok() || !fit.value().dropped.empty())
    return "card should fit TAG-2K without dropping fields";
  auto sealed = codec::verify_seal(image.value(), key);
  if (!sealed.ok() || !sealed.value()) return "seal does not verify";
  auto back = codec::decode(image.value());
  if (!back.ok() || back.value().fields.size != payload.fields.size)
    return "decode disagrees with the packed card";
  note = "1 blood type + 5 allergies + 8 medications + 4 diagnoses + date + donor flag, "
         "sealed, = 253 of 256 bytes";
  return {};
}

std::string criterion_5_hl7_corpus(std::string& note) {
  auto files = hl7_corpus();
  if (files.size() < 20)
    return "corpus holds only " + std::to_string(files.size()) + " messages, need 20";
  for (const auto& path : files) {
    std::string raw = read_file(path);
    auto parsed = hl7::parse_message(raw);
    if (!parsed.ok())
      return path.filename().string() + ": " + hl7::hl7_error_name(parsed.error().code);
    auto text = hl7::serialize_message(parsed.value());
    if (!text.ok()) return path.filename().string() + ": serialize failed";
    if (text.value() != canonical_hl7(raw))
      return path.filename().string() + ": round trip is not byte-identical";
  }
  note = "all " + std::to_string(files.size()) + " corpus messages round-trip byte-identically";
  return {};
}

std::string adt_admit(const std::string& facility, const std::string& control,
                      const std::string& patient, const std::string& stamp) {
  return "MSH|^~\\&|ADT|" + facility + "|||" + stamp + "||ADT^A01|" + control +
         "\rPID|1|" + patient + "|Popescu^Ion|19800501|M\rDG1|1|ICD9|250.00^Diabetes mellitus type II\r";
}

std::string oru_labs(const std::string& facility, const std::string& control,
                     const std::string& patient, const std::string& stamp) {
  return "MSH|^~\\&|LAB|" + facility + "|||" + stamp + "||ORU^R01|" + control +
         "\rPID|1|" + patient + "|Popescu^Ion|19800501|M\rOBX|1|ST|BT^Blood type^LOCAL|O+|\r";
}

std::string criterion_6_source_isolation(std::string& note) {
  auto table = fixture_table();
  const std::string facilities[] = {"HOSP-A", "HOSP-B", "CLINIC-C"};
  const std::string patients[] = {"3FA2C4D1E5B60718", "A1B2C3D4E5F60789",
                                  "0123456789ABCDEF", "FEDCBA9876543210"};
  const std::int64_t now = 1767225600;
  std::size_t scenarios_events = 0;

  for (int scenario = 0; scenario < 100; ++scenario) {
    TempDir dir("iso");
    auto opened = store::RecordStore::open(dir.path.string());
    if (!opened.ok()) return "store open failed";
    auto& store = *opened.value();

    // ledger[patient][facility] = number of events attributed there
    std::map<std::string, std::map<std::string, std::size_t>> ledger;
    std::size_t appended = 0;
    for (const auto& facility : facilities) {
      agg::SourceAgent agent{facility, (dir.path / "spool").string(),
                             (dir.path / "archive").string(), 5};
      std::vector<agg::SpoolItem> items;
      std::size_t messages = 1 + rand_below(6);
      std::vector<std::string> item_patients;
      for (std::size_t k = 0; k < messages; ++k) {
        const std::string& patient = patients[rand_below(4)];
        std::string control = "S" + std::to_string(scenario) + "-" + facility + "-" +
                              std::to_string(k);
        std::string stamp = "2025030" + std::to_string(1 + rand_below(9)) + "0" +
                            std::to_string(rand_below(10)) + "0000";
        items.push_back({"", rand_below(2) == 0
                                 ? adt_admit(facility, control, patient, stamp)
                                 : oru_labs(facility, control, patient, stamp)});
        item_patients.push_back(patient);
      }
      auto report = agg::ingest(store, table, agent, items, now);
      if (!report.ok()) return "ingest failed: " + report.error().detail;
      if (!report.value().errors.empty()) return "generated message rejected";
      appended += report.value().events_appended;
      for (std::size_t k = 0; k < items.size(); ++k) {
        // ADT^A01 yields admit+diagnosis, ORU^R01 yields one observation.
        bool is_admit = items[k].text.find("ADT^A01") != std::string::npos;
        ledger[item_patients[k]][facility] += is_admit ? 2 : 1;
      }
    }

    std::size_t seen = 0;
    for (const auto& patient_hex : patients) {
      auto sn = identity::parse_serial_hex(patient_hex);
      auto chart = store.get_chart(sn.value());
      for (const auto& [section, events] : chart.sections) {
        for (const auto& e : events) {
          if (e.source_id != section)
            return "scenario " + std::to_string(scenario) + ": event " + e.event_id +
                   " from " + e.source_id + " filed under " + section;
          if (identity::format_serial_hex(e.patient_sn) != patient_hex)
            return "scenario " + std::to_string(scenario) + ": foreign patient in chart";
        }
        if (events.size() != ledger[patient_hex][section])
          return "scenario " + std::to_string(scenario) + ": " + patient_hex + "/" + section +
                 " holds " + std::to_string(events.size()) + " events, ledger says " +
                 std::to_string(ledger[patient_hex][section]);
        seen += events.size();
      }
    }
    if (seen != appended)
      return "scenario " + std::to_string(scenario) + ": " + std::to_string(appended) +
             " appended but " + std::to_string(seen) + " charted";
    scenarios_events += seen;
  }
  note = "100 scenarios, " + std::to_string(scenarios_events) +
         " events, every one filed only under its own source";
  return {};
}

std::string criterion_7_idempotent_federation(std::string& note) {
  auto table = fixture_table();
  TempDir dir("idem");
  auto opened = store::RecordStore::open((dir.path / "data").string());
  if (!opened.ok()) return "store open failed";
  auto& store = *opened.value();
  const std::int64_t now = 1767225600;

  struct Feed { std::string source_id; std::string fixture_dir; };
  const Feed feeds[] = {{"HOSP-A", "hosp-a"}, {"HOSP-B", "hosp-b"}, {"CLINIC-C", "clinic-c"}};

  std::vector<agg::SourceAgent> agents;
  for (const auto& feed : feeds) {
    agg::SourceAgent agent{feed.source_id, (dir.path / "spool" / feed.fixture_dir).string(),
                           (dir.path / "archive" / feed.fixture_dir).string(), 5};
    fs::create_directories(agent.spool_dir);
    for (const auto& entry : fs::directory_iterator(g_fixtures + "/hl7/" + feed.fixture_dir))
      fs::copy_file(entry.path(), fs::path(agent.spool_dir) / entry.path().filename());
    agents.push_back(agent);
  }

  std::size_t first_appended = 0;
  for (const auto& agent : agents) {
    auto items = agg::poll_source(agent);
    if (!items.ok()) return "poll failed: " + items.error().detail;
    auto report = agg::ingest(store, table, agent, items.value(), now);
    if (!report.ok()) return "first ingest failed: " + report.error().detail;
    if (!report.value().errors.empty())
      return "fixture message rejected: " + report.value().errors.front().detail;
    first_appended += report.value().events_appended;
    if (!fs::is_empty(agent.spool_dir)) return agent.source_id + ": spool not archived";
  }
  if (store.event_count() != first_appended) return "event count disagrees with reports";

  // Re-run every agent over its own archive: nothing may change.
  std::size_t rerun_appended = 0, rerun_duplicates = 0;
  for (const auto& agent : agents) {
    for (const auto& entry : fs::directory_iterator(agent.archive_dir))
      fs::copy_file(entry.path(), fs::path(agent.spool_dir) / entry.path().filename());
    auto items = agg::poll_source(agent);
    if (!items.ok()) return "second poll failed";
    auto report = agg::ingest(store, table, agent, items.value(), now);
    if (!report.ok()) return "second ingest failed";
    rerun_appended += report.value().events_appended;
    rerun_duplicates += report.value().duplicates;
  }
  if (rerun_appended != 0)
    return "re-run appended " + std::to_string(rerun_appended) + " events";
  if (rerun_duplicates != first_appended)
    return "re-run counted " + std::to_string(rerun_duplicates) + " duplicates, expected " +
           std::to_string(first_appended);
  if (store.event_count() != first_appended) return "event count changed on re-run";
  note = "21 archived messages re-ingested: 0 new events, " +
         std::to_string(rerun_duplicates) + " duplicates = prior event count";
  return {};
}

std::string criterion_8_terminology(std::string& note) {
  auto table = fixture_table();
  std::size_t identities = 0, forward = 0, inverses = 0;

  // Identity translation for every dictionary concept.
  std::ifstream concepts(g_fixtures + "/terminology/concepts.tsv");
  std::string line;
  std::getline(concepts, line);  // header
  while (std::getline(concepts, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string system_name, code, display;
    std::getline(row, system_name, '\t');
    std::getline(row, code, '\t');
    std::getline(row, display, '\t');
    auto system = term::system_from_name(system_name);
    if (!system.has_value()) return "unknown system in concepts.tsv: " + system_name;
    auto same = table.translate(*system, code, *system);
    if (!same.ok() || same.value().outcome != term::TranslationResult::Outcome::kTranslated ||
        same.value().translated->concept_.code != code ||
        same.value().translated->relation != term::Relation::kExact)
      return "identity translation failed for " + system_name + " " + code;
    ++identities;
  }

  // Every mapping row resolves exactly as the table states; bidirectional
  // exact rows invert onto their origin.
  struct Row { term::SystemId from, to; std::string from_code, to_code, relation; };
  std::vector<Row> rows;
  std::ifstream mappings(g_fixtures + "/terminology/mappings.tsv");
  std::getline(mappings, line);  // header
  while (std::getline(mappings, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string from_sys, from_code, to_sys, to_code, relation;
    std::getline(row, from_sys, '\t');
    std::getline(row, from_code, '\t');
    std::getline(row, to_sys, '\t');
    std::getline(row, to_code, '\t');
    std::getline(row, relation, '\t');
    rows.push_back({*term::system_from_name(from_sys), *term::system_from_name(to_sys),
                    from_code, to_code, relation});
  }
  for (const auto& r : rows) {
    auto result = table.translate(r.from, r.from_code, r.to);
    if (!result.ok() || result.value().outcome != term::TranslationResult::Outcome::kTranslated)
      return "row " + r.from_code + " did not translate";
    if (result.value().translated->concept_.code != r.to_code)
      return "row " + r.from_code + " translated to " +
             result.value().translated->concept_.code + ", table says " + r.to_code;
    if (term::relation_name(result.value().translated->relation) != r.relation)
      return "row " + r.from_code + " reported the wrong relation";
    ++forward;
    bool bidirectional = false;
    for (const auto& other : rows)
      if (other.from == r.to && other.from_code == r.to_code && other.to == r.from &&
          other.relation == "exact" && r.relation == "exact")
        bidirectional = true;
    if (bidirectional) {
      auto back = table.translate(r.to, r.to_code, r.from);
      if (!back.ok() || back.value().outcome != term::TranslationResult::Outcome::kTranslated ||
          back.value().translated->concept_.code != r.from_code)
        return "bidirectional exact row " + r.from_code + " <-> " + r.to_code +
               " is not inverse-consistent";
      ++inverses;
    }
  }
  if (inverses == 0) return "no bidirectional exact rows exercised";
  note = std::to_string(identities) + " identity translations, " + std::to_string(forward) +
         " table rows, " + std::to_string(inverses) + " inverse-consistent exact rows";
  return {};
}

std::string criterion_9_offline_triage(std::string& note) {
  auto probe = run_command("unshare -rn true");
  if (probe.exit_code != 0)
    return "no-network harness unavailable: unshare -rn failed (" + probe.output + ")";

  // A card carrying every EMERGENCY-1 field, sealed.
  codec::CipPayload p;
  p.sn = identity::parse_serial_hex("3FA2C4D1E5B60718").value();
  p.emr_uri = "simopac://hospital-a.example:7801/main";
  p.template_id = 1;
  p.template_version = 1;
  p.updated_at = static_cast<std::uint32_t>(std::time(nullptr)) - 3600;
  p.mac_present = true;
  p.fields.push_back(FieldValue::code(1, 0x01, "O+"));
  p.fields.push_back(FieldValue::code(2, 0x03, "Z88.0"));
  p.fields.push_back(FieldValue::code(3, 0x04, "N02541"));
  p.fields.push_back(FieldValue::code(4, 0x03, "E11.9"));
  p.fields.push_back(FieldValue::date(5, 20454));
  p.fields.push_back(FieldValue::boolean(6, true));
  p.fields.push_back(FieldValue::text(7, "Carries own insulin pen."));

  Bytes key = fixture_mac_key();
  auto image = codec::encode(p, key);
  if (!image.ok()) return "card encode failed";

  TempDir dir("triage");
  write_file(dir.path / "card.cip",
             std::string(reinterpret_cast<const char*>(image.value().data()),
                         image.value().size()));
  write_file(dir.path / "mac.key", hex_encode(key) + "\n");

  std::string command = "unshare -rn " + g_cli + " triage " + (dir.path / "card.cip").string() +
                        " --dict " + g_fixtures + "/terminology/concepts.tsv --key " +
                        (dir.path / "mac.key").string();
  auto run = run_command(command);
  if (run.exit_code != 0)
    return "triage exited " + std::to_string(run.exit_code) + ": " + run.output;

  for (const char* needle :
       {"CIP TRIAGE", "blood_type", "allergy", "active_medication", "major_diagnosis",
        "last_encounter_date", "organ_donor", "free_text_note",
        "Blood group O positive [LOCAL O+]", "Allergy history: penicillin [ICD10 Z88.0]",
        "seal:      verified", "Carries own insulin pen."}) {
    if (run.output.find(needle) == std::string::npos)
      return std::string("rendered view misses \"") + needle + "\"";
  }
  note = "with networking unshared away, triage rendered all 7 card fields with "
         "dictionary labels and a verified seal";
  return {};
}

std::string criterion_10_audit_completeness(std::string& note) {
  TempDir dir("audit");
  fs::create_directories(dir.path / "data");
  std::vector<access::Principal> users{
      access::make_principal("dr.adams", "physician-pw", access::Role::kPhysician),
      access::make_principal("agent.feed", "agent-pw", access::Role::kAgent),
      access::make_principal("er.oncall", "emergency-pw", access::Role::kEmergency),
      access::make_principal("auditor", "admin-pw", access::Role::kAdmin)};
  auto saved = access::save_principals((dir.path / "principals.json").string(), users);
  if (!saved.ok()) return "save_principals failed";

  svc::ServiceConfig cfg;
  cfg.listen_host = "127.0.0.1";
  cfg.listen_port = 0;
  cfg.realm = "hospital-a";
  cfg.data_dir = (dir.path / "data").string();
  cfg.principals_path = (dir.path / "principals.json").string();
  cfg.concepts_path = g_fixtures + "/terminology/concepts.tsv";
  cfg.mappings_path = g_fixtures + "/terminology/mappings.tsv";
  auto started = svc::Service::start(cfg);
  if (!started.ok()) return "service start failed: " + started.error().detail;
  auto service = std::move(started).value();
  httplib::Client client("127.0.0.1", service->port());
  client.set_connection_timeout(5);
  client.set_read_timeout(5);

  auto login = [&](const char* user, const char* password) -> std::string {
    auto res = client.Post("/auth/login",
                           json{{"username", user}, {"password", password}}.dump(),
                           "application/json");
    if (!res || res->status != 200) return {};
    return json::parse(res->body)["token"].get<std::string>();
  };
  std::string physician = login("dr.adams", "physician-pw");
  std::string agent = login("agent.feed", "agent-pw");
  std::string emergency = login("er.oncall", "emergency-pw");
  std::string admin = login("auditor", "admin-pw");
  if (physician.empty() || agent.empty() || emergency.empty() || admin.empty())
    return "logins failed";
  auto bearer = [](const std::string& token) {
    return httplib::Headers{{"Authorization", "Bearer " + token}};
  };

  const std::string patients[] = {"3FA2C4D1E5B60718", "A1B2C3D4E5F60789", "0123456789ABCDEF"};
  std::size_t scoped_requests = 0, emergency_permits = 0;
  int expect_status[10] = {200, 200, 400, 200, 403, 200, 200, 401, 403, 200};

  for (int i = 0; i < 200; ++i) {
    const std::string& patient = patients[rand_below(3)];
    const std::string chart_path = "/patients/" + patient + "/chart";
    int scenario = i % 10;
    int status = -1;
    switch (scenario) {
      case 0: {
        auto res = client.Get(chart_path, bearer(physician));
        status = res ? res->status : -1;
        ++scoped_requests;
        break;
      }
      case 1: {
        auto res = client.Get("/patients/" + patient + "/summary", bearer(physician));
        status = res ? res->status : -1;
        ++scoped_requests;
        break;
      }
      case 2: {
        // No blood type is ever ingested here, so the refresh names the
        // missing required field; the attempt is still patient-scoped.
        auto res = client.Post("/patients/" + patient + "/tag", bearer(physician), "",
                               "application/json");
        status = res ? res->status : -1;
        ++scoped_requests;
        break;
      }
      case 3: {
        httplib::Headers h = bearer(emergency);
        h.emplace("X-Access-Reason", "unresponsive at scene");
        auto res = client.Get(chart_path, h);
        status = res ? res->status : -1;
        ++scoped_requests;
        ++emergency_permits;
        break;
      }
      case 4: {
        auto res = client.Get(chart_path, bearer(emergency));  // no reason -> denied
        status = res ? res->status : -1;
        ++scoped_requests;
        break;
      }
      case 5: {
        auto res = client.Post("/ingest", bearer(agent),
                               adt_admit("HOSP-A", "AUD-" + std::to_string(i), patient,
                                         "20250301090000"),
                               "text/plain");
        status = res ? res->status : -1;
        break;
      }
      case 6: {
        auto res = client.Post(
            "/resolve", bearer(physician),
            json{{"sn_uri", patient + "@" + service->node_uri()}}.dump(), "application/json");
        status = res ? res->status : -1;
        ++scoped_requests;
        break;
      }
      case 7: {
        auto res = client.Get(chart_path);  // no token
        status = res ? res->status : -1;
        ++scoped_requests;
        break;
      }
      case 8: {
        auto res = client.Get(chart_path, bearer(agent));  // role mismatch
        status = res ? res->status : -1;
        ++scoped_requests;
        break;
      }
      default: {
        auto res = client.Get("/health");
        status = res ? res->status : -1;
        break;
      }
    }
    if (status != expect_status[scenario])
      return "call " + std::to_string(i) + " (scenario " + std::to_string(scenario) +
             ") answered " + std::to_string(status) + ", expected " +
             std::to_string(expect_status[scenario]);
  }

  service.reset();  // stop; the trail is on disk

  std::ifstream trail(dir.path / "data" / "audit.ndjson");
  if (!trail.good()) return "audit trail missing";
  std::string line;
  std::size_t entries = 0, scoped_entries = 0, permits_with_reason = 0;
  while (std::getline(trail, line)) {
    if (line.empty()) continue;
    auto entry = access::audit_entry_from_json(line);
    if (!entry.ok()) return "unparseable audit entry: " + line;
    ++entries;
    if (entry.value().patient_sn.has_value()) ++scoped_entries;
    if (entry.value().principal == "er.oncall" && entry.value().outcome == access::Outcome::kOk) {
      if (entry.value().reason.empty()) return "an emergency permit carries no reason";
      ++permits_with_reason;
    }
  }
  // 4 logins + 9 audited calls per block of 10 (health is unaudited).
  if (entries != 4 + 180)
    return "expected 184 audit entries, found " + std::to_string(entries);
  if (scoped_entries != scoped_requests)
    return std::to_string(scoped_requests) + " patient-scoped requests but " +
           std::to_string(scoped_entries) + " patient-scoped audit entries";
  if (permits_with_reason != emergency_permits)
    return "emergency permits do not line up: " + std::to_string(permits_with_reason) +
           " audited, " + std::to_string(emergency_permits) + " requested";
  note = std::to_string(scoped_entries) + " patient-scoped entries for " +
         std::to_string(scoped_requests) + " patient-scoped requests across 200 calls; all " +
         std::to_string(permits_with_reason) + " emergency permits carry a reason";
  return {};
}

std::string criterion_11_demo(std::string& note) {
  TempDir dir("demo");
  auto t0 = std::chrono::steady_clock::now();
  auto run = run_command(g_cli + " demo run --workdir " + (dir.path / "work").string());
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
  if (run.exit_code != 0)
    return "demo exited " + std::to_string(run.exit_code) + "\n" + run.output;
  if (run.output.find("[FAIL]") != std::string::npos) return "a demo step failed:\n" + run.output;
  if (run.output.find("all steps passed") == std::string::npos)
    return "demo did not report success:\n" + run.output;
  if (elapsed >= 10000) return "demo took " + std::to_string(elapsed) + " ms";
  note = "admit -> labs -> tag -> offline triage -> discharge -> cross-realm resolve in " +
         std::to_string(elapsed) + " ms";
  return {};
}

std::string criterion_12_crash_replay(std::string& note) {
  const std::string sources[] = {"HOSP-A", "HOSP-B", "CLINIC-C"};
  const std::string patients[] = {"3FA2C4D1E5B60718", "A1B2C3D4E5F60789"};
  const std::int64_t base = 1767225600;

  for (int trial = 0; trial < 50; ++trial) {
    TempDir dir("crash");
    std::size_t total = 1 + rand_below(12);
    std::size_t survive = 1 + rand_below(total);  // the append the crash lands after

    std::vector<ClinicalEvent> events;
    for (std::size_t j = 0; j < total; ++j) {
      ClinicalEvent e;
      e.event_id = "T" + std::to_string(trial) + "-E" + std::to_string(j);
      e.patient_sn = identity::parse_serial_hex(patients[rand_below(2)]).value();
      e.source_id = sources[rand_below(3)];
      e.kind = EventKind::kObservation;
      e.code = EventCode{0x01, "BT", "Blood type"};
      e.text = "O+";
      e.effective_at = base - static_cast<std::int64_t>(rand_below(86400 * 30));
      e.received_at = base;
      events.push_back(e);
    }

    pid_t pid = fork();
    if (pid < 0) return "fork failed";
    if (pid == 0) {
      // The "node": append and die without any shutdown path.
      auto opened = store::RecordStore::open(dir.path.string());
      if (!opened.ok()) _exit(17);
      for (std::size_t j = 0; j < survive; ++j)
        if (!opened.value()->append_event(events[j]).ok()) _exit(18);
      _exit(0);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      return "trial " + std::to_string(trial) + ": writer child exited " +
             std::to_string(WEXITSTATUS(status));

    auto expected_chart = [&](const identity::Serial& sn) {
      store::PatientChart chart;
      chart.patient_sn = sn;
      for (std::size_t j = 0; j < survive; ++j)
        if (events[j].patient_sn == sn) chart.sections[events[j].source_id].push_back(events[j]);
      for (auto& [source, list] : chart.sections)
        std::stable_sort(list.begin(), list.end(),
                         [](const ClinicalEvent& a, const ClinicalEvent& b) {
                           return a.effective_at < b.effective_at;
                         });
      return chart;
    };

    auto verify = [&]() -> std::string {
      auto reopened = store::RecordStore::open(dir.path.string());
      if (!reopened.ok())
        return "trial " + std::to_string(trial) + ": reopen failed: " + reopened.error().detail;
      if (reopened.value()->event_count() != survive)
        return "trial " + std::to_string(trial) + ": replay found " +
               std::to_string(reopened.value()->event_count()) + " events, expected " +
               std::to_string(survive);
      for (const auto& patient : patients) {
        auto sn = identity::parse_serial_hex(patient).value();
        if (!(reopened.value()->get_chart(sn) == expected_chart(sn)))
          return "trial " + std::to_string(trial) + ": chart for " + patient +
                 " differs after replay";
      }
      if (trial % 2 == 0) {
        auto snapshot = reopened.value()->write_snapshot();
        if (!snapshot.ok()) return "trial " + std::to_string(trial) + ": snapshot failed";
      }
      return {};
    };
    // Once from the raw log, once more from snapshot + suffix on even trials.
    if (auto problem = verify(); !problem.empty()) return problem;
    if (auto problem = verify(); !problem.empty()) return problem + " (snapshot pass)";
  }
  note = "50 crash-and-restart trials replayed to identical charts (log and snapshot paths)";
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <simopac-cli> <fixtures-dir>\n");
    return 2;
  }
  g_cli = argv[1];
  g_fixtures = argv[2];

  struct Criterion {
    int id;
    const char* name;
    std::function<std::string(std::string&)> run;
  };
  const Criterion criteria[] = {
      {1, "codec round trip", criterion_1_codec_roundtrip},
      {2, "corruption detection", criterion_2_corruption},
      {3, "byte budget", criterion_3_byte_budget},
      {4, "emergency card realism", criterion_4_emergency_card},
      {5, "HL7-lite corpus round trip", criterion_5_hl7_corpus},
      {6, "source isolation", criterion_6_source_isolation},
      {7, "idempotent federation", criterion_7_idempotent_federation},
      {8, "terminology resolution", criterion_8_terminology},
      {9, "offline triage", criterion_9_offline_triage},
      {10, "audit completeness", criterion_10_audit_completeness},
      {11, "end-to-end demo", criterion_11_demo},
      {12, "crash replay", criterion_12_crash_replay},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    std::string note;
    std::string problem;
    try {
      problem = criterion.run(note);
    } catch (const std::exception& e) {
      problem = std::string("exception: ") + e.what();
    }
    if (problem.empty()) {
      std::printf("[PASS] %2d %s: %s\n", criterion.id, criterion.name, note.c_str());
    } else {
      std::printf("[FAIL] %2d %s: %s\n", criterion.id, criterion.name, problem.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures == 0) {
    std::printf("all 12 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d of 12 acceptance criteria failed\n", failures);
  return 1;
}
