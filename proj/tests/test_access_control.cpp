#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "simopac/access_control.hpp"

using namespace simopac;
using namespace simopac::access;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("simopac-access-" + std::to_string(getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

constexpr std::int64_t kNow = 1767225600;  // 2026-01-01T00:00:00Z

std::vector<Principal> stock_principals() {
  return {
      make_principal("dr.adams", "physician-pw", Role::kPhysician),
      make_principal("agent.feed", "agent-pw", Role::kAgent),
      make_principal("er.oncall", "emergency-pw", Role::kEmergency),
      make_principal("auditor", "admin-pw", Role::kAdmin),
  };
}

struct Controller {
  TempDir dir;
  std::unique_ptr<AccessController> access;
  Controller() {
    REQUIRE(save_principals((dir.path / "principals.json").string(), stock_principals()).ok());
    auto opened = AccessController::open((dir.path / "principals.json").string(),
                                         (dir.path / "audit.ndjson").string());
    REQUIRE(opened.ok());
    access = std::move(opened).value();
  }
  std::string login(const std::string& user, const std::string& pw, std::int64_t at = kNow) {
    auto session = access->authenticate(user, pw, at);
    REQUIRE(session.ok());
    return session.value().token;
  }
};

identity::Serial sn_of(const std::string& hex) {
  return identity::parse_serial_hex(hex).value();
}

}  // namespace

TEST_CASE("role names round-trip") {
  for (Role r : {Role::kPhysician, Role::kEmergency, Role::kAgent, Role::kAdmin}) {
    CHECK(role_from_name(role_name(r)) == r);
  }
  CHECK_FALSE(role_from_name("superuser").has_value());
}

TEST_CASE("principals survive the save/load round trip") {
  TempDir dir;
  auto path = (dir.path / "principals.json").string();
  REQUIRE(save_principals(path, stock_principals()).ok());
  auto loaded = load_principals(path);
  REQUIRE(loaded.ok());
  REQUIRE(loaded.value().size() == 4);
  CHECK(loaded.value()[0].username == "dr.adams");
  CHECK(loaded.value()[0].role == Role::kPhysician);
  CHECK(loaded.value()[0].password.scheme == "scrypt");
  // The stored record still verifies the original password and no other.
  CHECK(verify_password("physician-pw", loaded.value()[0].password));
  CHECK_FALSE(verify_password("physician-pW", loaded.value()[0].password));

  CHECK(load_principals((dir.path / "missing.json").string()).error().code ==
        AccessErrorCode::kConfigInvalid);
}

TEST_CASE("malformed principal files are named, not guessed at") {
  TempDir dir;
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir.path / name, std::ios::binary);
    out << body;
    return (dir.path / name).string();
  };
  CHECK(load_principals(write("obj.json", "{}")).error().code ==
        AccessErrorCode::kConfigInvalid);
  CHECK(load_principals(write("bare.json", R"([{"username":"x"}])")).error().code ==
        AccessErrorCode::kConfigInvalid);
  CHECK(load_principals(
            write("role.json",
                  R"([{"username":"x","role":"wizard","password":{"scheme":"scrypt","salt":"00","hash":"00"}}])"))
            .error()
            .code == AccessErrorCode::kConfigInvalid);
  CHECK(load_principals(
            write("scheme.json",
                  R"([{"username":"x","role":"admin","password":{"scheme":"md5","salt":"00","hash":"00"}}])"))
            .error()
            .code == AccessErrorCode::kConfigInvalid);
  std::string dup =
      R"([{"username":"x","role":"admin","password":{"scheme":"scrypt","salt":"00","hash":"00"}},)"
      R"({"username":"x","role":"admin","password":{"scheme":"scrypt","salt":"00","hash":"00"}}])";
  CHECK(load_principals(write("dup.json", dup)).error().code == AccessErrorCode::kConfigInvalid);
}

TEST_CASE("authentication issues expiring bearer tokens") {
  Controller c;
  auto session = c.access->authenticate("dr.adams", "physician-pw", kNow);
  REQUIRE(session.ok());
  CHECK(session.value().token.size() == 64);  // 256 bits, hex
  CHECK(session.value().username == "dr.adams");
  CHECK(session.value().role == Role::kPhysician);
  CHECK(session.value().issued_at == kNow);
  CHECK(session.value().expires_at == kNow + 8 * 3600);

  // Two logins never share a token.
  auto second = c.access->authenticate("dr.adams", "physician-pw", kNow);
  REQUIRE(second.ok());
  CHECK(second.value().token != session.value().token);

  auto found = c.access->session_for(session.value().token, kNow + 8 * 3600 - 1);
  REQUIRE(found.has_value());
  CHECK(found->username == "dr.adams");
  // The token dies exactly at its expiry instant.
  CHECK_FALSE(c.access->session_for(session.value().token, kNow + 8 * 3600).has_value());
  CHECK_FALSE(c.access->session_for("0000", kNow).has_value());
}

TEST_CASE("unknown users and wrong passwords are indistinguishable") {
  Controller c;
  auto wrong_pw = c.access->authenticate("dr.adams", "nope", kNow);
  auto no_user = c.access->authenticate("dr.nobody", "nope", kNow);
  REQUIRE_FALSE(wrong_pw.ok());
  REQUIRE_FALSE(no_user.ok());
  CHECK(wrong_pw.error().code == AccessErrorCode::kInvalidCredentials);
  CHECK(no_user.error().code == AccessErrorCode::kInvalidCredentials);
  CHECK(wrong_pw.error().detail == no_user.error().detail);

  // Both denials land in the audit trail with no principal named.
  auto trail = c.access->audit_query({kNow, kNow, std::nullopt, std::nullopt});
  REQUIRE(trail.size() == 2);
  for (const auto& e : trail) {
    CHECK(e.action == Action::kLogin);
    CHECK(e.outcome == Outcome::kDenied);
    CHECK(e.principal.empty());
  }
}

TEST_CASE("the role matrix permits exactly the documented actions") {
  Controller c;
  const std::string physician = c.login("dr.adams", "physician-pw");
  const std::string agent = c.login("agent.feed", "agent-pw");
  const std::string emergency = c.login("er.oncall", "emergency-pw");
  const std::string admin = c.login("auditor", "admin-pw");

  struct Expectation {
    std::string token;
    std::vector<Action> permitted;
  };
  const std::vector<Action> kAll = {Action::kReadChart, Action::kReadSummary, Action::kIngest,
                                    Action::kRefreshTag, Action::kResolve, Action::kAuditQuery};
  const std::vector<Expectation> table = {
      {physician, {Action::kReadChart, Action::kReadSummary, Action::kRefreshTag}},
      {agent, {Action::kIngest}},
      {emergency, {Action::kReadChart, Action::kReadSummary}},
      {admin, {Action::kAuditQuery}},
  };
  for (const auto& row : table) {
    for (Action a : kAll) {
      bool expected =
          std::find(row.permitted.begin(), row.permitted.end(), a) != row.permitted.end();
      Decision d = c.access->authorize(row.token, a, "pt unresponsive", kNow);
      CHECK_MESSAGE(d.permitted == expected, "action ", action_name(a));
      if (!expected) CHECK(d.deny_reason.find("may not") != std::string::npos);
    }
  }
}

TEST_CASE("emergency access demands a recorded reason") {
  Controller c;
  const std::string token = c.login("er.oncall", "emergency-pw");
  Decision without = c.access->authorize(token, Action::kReadChart, "", kNow);
  CHECK_FALSE(without.permitted);
  CHECK(without.deny_reason == "emergency access requires a recorded reason");
  Decision with = c.access->authorize(token, Action::kReadChart, "pt unresponsive", kNow);
  CHECK(with.permitted);
  // A physician needs no reason.
  const std::string physician = c.login("dr.adams", "physician-pw");
  CHECK(c.access->authorize(physician, Action::kReadChart, "", kNow).permitted);
}

TEST_CASE("expired or unknown tokens are denied with one shared message") {
  Controller c;
  const std::string token = c.login("dr.adams", "physician-pw");
  Decision expired = c.access->authorize(token, Action::kReadChart, "", kNow + 8 * 3600);
  Decision unknown = c.access->authorize("not-a-token", Action::kReadChart, "", kNow);
  CHECK_FALSE(expired.permitted);
  CHECK_FALSE(unknown.permitted);
  CHECK(expired.deny_reason == unknown.deny_reason);
  CHECK(expired.deny_reason == "token expired or unknown");
}

TEST_CASE("audit entries survive their JSON round trip") {
  AuditEntry e;
  e.at = kNow;
  e.principal = "dr.adams";
  e.action = Action::kReadChart;
  e.patient_sn = sn_of("3FA2C4D1E5B60718");
  e.reason = "pt unresponsive";
  e.outcome = Outcome::kOk;
  auto back = audit_entry_from_json(audit_entry_to_json(e));
  REQUIRE(back.ok());
  CHECK(back.value().at == e.at);
  CHECK(back.value().principal == e.principal);
  CHECK(back.value().action == e.action);
  CHECK(back.value().patient_sn == e.patient_sn);
  CHECK(back.value().reason == e.reason);
  CHECK(back.value().outcome == e.outcome);

  AuditEntry bare;
  bare.at = 1;
  bare.action = Action::kDenied;
  bare.outcome = Outcome::kDenied;
  auto bare_back = audit_entry_from_json(audit_entry_to_json(bare));
  REQUIRE(bare_back.ok());
  CHECK_FALSE(bare_back.value().patient_sn.has_value());
  CHECK(bare_back.value().principal.empty());

  CHECK_FALSE(audit_entry_from_json("not json").ok());
}

TEST_CASE("audit timestamps never run backwards") {
  Controller c;
  AuditEntry late;
  late.at = kNow + 1000;
  late.action = Action::kIngest;
  late.principal = "agent.feed";
  REQUIRE(c.access->audit_append(late).ok());

  AuditEntry early;
  early.at = kNow;  // a lagging clock reports an older instant
  early.action = Action::kIngest;
  early.principal = "agent.feed";
  REQUIRE(c.access->audit_append(early).ok());

  auto trail = c.access->audit_query({0, kNow + 9000, std::nullopt, std::nullopt});
  REQUIRE(trail.size() == 2);
  CHECK(trail[0].at == kNow + 1000);
  CHECK(trail[1].at == kNow + 1000);  // clamped up, preserving order
}

TEST_CASE("audit queries filter by time, principal and patient, inclusively") {
  Controller c;
  auto sn_a = sn_of("3FA2C4D1E5B60718");
  auto sn_b = sn_of("7C11AA02BD34EF56");
  auto add = [&](std::int64_t at, const std::string& who,
                 std::optional<identity::Serial> sn) {
    AuditEntry e;
    e.at = at;
    e.principal = who;
    e.action = Action::kReadChart;
    e.patient_sn = sn;
    REQUIRE(c.access->audit_append(e).ok());
  };
  add(kNow + 10, "dr.adams", sn_a);
  add(kNow + 20, "dr.adams", sn_b);
  add(kNow + 30, "er.oncall", sn_a);

  auto all = c.access->audit_query({kNow + 10, kNow + 30, std::nullopt, std::nullopt});
  CHECK(all.size() == 3);  // both bounds inclusive
  CHECK(c.access->audit_query({kNow + 11, kNow + 29, std::nullopt, std::nullopt}).size() == 1);

  auto by_user = c.access->audit_query({0, kNow + 99, "dr.adams", std::nullopt});
  REQUIRE(by_user.size() == 2);
  for (const auto& e : by_user) CHECK(e.principal == "dr.adams");

  auto by_patient = c.access->audit_query({0, kNow + 99, std::nullopt, sn_a});
  REQUIRE(by_patient.size() == 2);
  for (const auto& e : by_patient) CHECK(e.patient_sn == sn_a);

  auto both = c.access->audit_query({0, kNow + 99, "er.oncall", sn_a});
  REQUIRE(both.size() == 1);
  CHECK(both[0].at == kNow + 30);
}

TEST_CASE("the audit trail is replayed from disk on reopen") {
  TempDir dir;
  auto principals_path = (dir.path / "principals.json").string();
  auto audit_path = (dir.path / "audit.ndjson").string();
  REQUIRE(save_principals(principals_path, stock_principals()).ok());
  {
    auto opened = AccessController::open(principals_path, audit_path);
    REQUIRE(opened.ok());
    AuditEntry e;
    e.at = kNow + 500;
    e.principal = "dr.adams";
    e.action = Action::kReadSummary;
    REQUIRE(opened.value()->audit_append(e).ok());
  }
  auto reopened = AccessController::open(principals_path, audit_path);
  REQUIRE(reopened.ok());
  CHECK(reopened.value()->principal_count() == 4);
  auto trail = reopened.value()->audit_query({0, kNow + 9000, std::nullopt, std::nullopt});
  REQUIRE(trail.size() == 1);
  CHECK(trail[0].principal == "dr.adams");
  CHECK(trail[0].action == Action::kReadSummary);

  // The monotone clamp carries across the restart.
  AuditEntry older;
  older.at = kNow;
  older.action = Action::kLogin;
  REQUIRE(reopened.value()->audit_append(older).ok());
  auto after = reopened.value()->audit_query({0, kNow + 9000, std::nullopt, std::nullopt});
  REQUIRE(after.size() == 2);
  CHECK(after[1].at == kNow + 500);
}

TEST_CASE("sessions do not survive a restart") {
  TempDir dir;
  auto principals_path = (dir.path / "principals.json").string();
  auto audit_path = (dir.path / "audit.ndjson").string();
  REQUIRE(save_principals(principals_path, stock_principals()).ok());
  std::string token;
  {
    auto opened = AccessController::open(principals_path, audit_path);
    REQUIRE(opened.ok());
    auto session = opened.value()->authenticate("dr.adams", "physician-pw", kNow);
    REQUIRE(session.ok());
    token = session.value().token;
  }
  auto reopened = AccessController::open(principals_path, audit_path);
  REQUIRE(reopened.ok());
  CHECK_FALSE(reopened.value()->session_for(token, kNow).has_value());
}
