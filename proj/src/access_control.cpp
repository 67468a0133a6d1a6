#include "simopac/access_control.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "simopac/timeutil.hpp"

namespace simopac::access {
namespace {

using nlohmann::json;

AccessError storage_error(std::string detail) {
  return AccessError{AccessErrorCode::kStorageFailure, std::move(detail)};
}

constexpr const char* kBadCredentials = "invalid credentials";

}  // namespace

const char* role_name(Role role) {
  switch (role) {
    case Role::kPhysician: return "physician";
    case Role::kEmergency: return "emergency";
    case Role::kAgent: return "agent";
    case Role::kAdmin: return "admin";
  }
  return "?";
}

std::optional<Role> role_from_name(const std::string& name) {
  for (Role r : {Role::kPhysician, Role::kEmergency, Role::kAgent, Role::kAdmin})
    if (name == role_name(r)) return r;
  return std::nullopt;
}

const char* action_name(Action action) {
  switch (action) {
    case Action::kLogin: return "login";
    case Action::kReadChart: return "read_chart";
    case Action::kReadSummary: return "read_summary";
    case Action::kIngest: return "ingest";
    case Action::kRefreshTag: return "refresh_tag";
    case Action::kResolve: return "resolve";
    case Action::kAuditQuery: return "audit_query";
    case Action::kDenied: return "denied";
  }
  return "?";
}

std::optional<Action> action_from_name(const std::string& name) {
  for (Action a : {Action::kLogin, Action::kReadChart, Action::kReadSummary, Action::kIngest,
                   Action::kRefreshTag, Action::kResolve, Action::kAuditQuery, Action::kDenied})
    if (name == action_name(a)) return a;
  return std::nullopt;
}

const char* outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::kOk: return "ok";
    case Outcome::kDenied: return "denied";
    case Outcome::kError: return "error";
  }
  return "?";
}

std::optional<Outcome> outcome_from_name(const std::string& name) {
  for (Outcome o : {Outcome::kOk, Outcome::kDenied, Outcome::kError})
    if (name == outcome_name(o)) return o;
  return std::nullopt;
}

Principal make_principal(const std::string& username, const std::string& password, Role role) {
  return Principal{username, role, hash_password(password)};
}

AccessResult<std::vector<Principal>> load_principals(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return AccessError{AccessErrorCode::kConfigInvalid, "cannot open principals file " + path};
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (!doc.is_array())
    return AccessError{AccessErrorCode::kConfigInvalid, path + ": expected a JSON array"};

  std::vector<Principal> out;
  for (const json& r : doc) {
    if (!r.is_object() || !r.contains("username") || !r.contains("role") ||
        !r.contains("password"))
      return AccessError{AccessErrorCode::kConfigInvalid,
                         path + ": each principal needs username, role, password"};
    Principal p;
    p.username = r["username"].get<std::string>();
    auto role = role_from_name(r["role"].get<std::string>());
    if (!role.has_value())
      return AccessError{AccessErrorCode::kConfigInvalid,
                         path + ": unknown role for " + p.username};
    p.role = *role;
    const json& pw = r["password"];
    p.password.scheme = pw.value("scheme", std::string{});
    auto salt = hex_decode(pw.value("salt", std::string{}));
    auto hash = hex_decode(pw.value("hash", std::string{}));
    if (p.password.scheme != "scrypt" || !salt.has_value() || !hash.has_value() ||
        salt->empty() || hash->empty())
      return AccessError{AccessErrorCode::kConfigInvalid,
                         path + ": malformed password record for " + p.username};
    p.password.salt = std::move(*salt);
    p.password.hash = std::move(*hash);
    for (const Principal& seen : out)
      if (seen.username == p.username)
        return AccessError{AccessErrorCode::kConfigInvalid,
                           path + ": duplicate username " + p.username};
    out.push_back(std::move(p));
  }
  return out;
}

AccessResult<Unit> save_principals(const std::string& path,
                                   const std::vector<Principal>& principals) {
  json doc = json::array();
  for (const Principal& p : principals) {
    doc.push_back({{"username", p.username},
                   {"role", role_name(p.role)},
                   {"password",
                    {{"scheme", p.password.scheme},
                     {"salt", hex_encode(p.password.salt)},
                     {"hash", hex_encode(p.password.hash)}}}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return storage_error("cannot write principals file " + path);
  out << doc.dump(2) << '\n';
  if (!out.flush()) return storage_error("principals write failed");
  return Unit{};
}

std::string audit_entry_to_json(const AuditEntry& e) {
  json doc = {
      {"at", iso8601_utc(e.at)},
      {"principal", e.principal},
      {"action", action_name(e.action)},
      {"outcome", outcome_name(e.outcome)},
  };
  if (e.patient_sn.has_value()) doc["patient_sn"] = identity::format_serial_hex(*e.patient_sn);
  if (!e.reason.empty()) doc["reason"] = e.reason;
  return doc.dump();
}

Result<AuditEntry, std::string> audit_entry_from_json(const std::string& line) {
  json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!doc.is_object()) return std::string("malformed audit JSON");
  AuditEntry e;
  auto at = parse_iso8601_utc(doc.value("at", std::string{}));
  if (!at.has_value()) return std::string("bad audit timestamp");
  e.at = *at;
  e.principal = doc.value("principal", std::string{});
  auto action = action_from_name(doc.value("action", std::string{}));
  auto outcome = outcome_from_name(doc.value("outcome", std::string{}));
  if (!action.has_value() || !outcome.has_value())
    return std::string("bad audit action or outcome");
  e.action = *action;
  e.outcome = *outcome;
  if (doc.contains("patient_sn")) {
    auto sn = identity::parse_serial_hex(doc["patient_sn"].get<std::string>());
    if (!sn.ok()) return std::string("bad audit patient_sn");
    e.patient_sn = sn.value();
  }
  e.reason = doc.value("reason", std::string{});
  return e;
}

AccessResult<std::unique_ptr<AccessController>> AccessController::open(
    const std::string& principals_path, const std::string& audit_log_path) {
  auto loaded = load_principals(principals_path);
  if (!loaded.ok()) return loaded.error();

  auto controller = std::unique_ptr<AccessController>(new AccessController());
  for (Principal& p : loaded.value())
    controller->principals_.emplace(p.username, std::move(p));
  controller->audit_log_path_ = audit_log_path;
  // Burned once at startup so unknown-user verification costs the same as a
  // real mismatch.
  controller->decoy_ = hash_password(hex_encode(random_bytes(16)));

  std::ifstream in(audit_log_path, std::ios::binary);
  if (in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto parsed = audit_entry_from_json(line);
      if (!parsed.ok()) continue;  // torn or foreign line; the trail keeps going
      controller->last_audit_at_ = std::max(controller->last_audit_at_, parsed.value().at);
      controller->audit_.push_back(std::move(parsed).value());
    }
  }
  return controller;
}

AccessResult<SessionToken> AccessController::authenticate(const std::string& username,
                                                          const std::string& password,
                                                          std::int64_t now) {
  bool ok = false;
  Role role = Role::kPhysician;
  {
    std::lock_guard lock(mutex_);
    auto it = principals_.find(username);
    if (it != principals_.end()) {
      ok = verify_password(password, it->second.password);
      role = it->second.role;
    } else {
      verify_password(password, decoy_);
    }
  }

  AuditEntry entry;
  entry.at = now;
  entry.principal = ok ? username : std::string{};
  entry.action = Action::kLogin;
  entry.outcome = ok ? Outcome::kOk : Outcome::kDenied;
  auto audited = audit_append(std::move(entry));
  if (!audited.ok()) return audited.error();
  if (!ok) return AccessError{AccessErrorCode::kInvalidCredentials, kBadCredentials};

  SessionToken session;
  session.token = hex_encode(random_bytes(32));
  session.username = username;
  session.role = role;
  session.issued_at = now;
  session.expires_at = now + kTokenLifetimeSeconds;
  {
    std::lock_guard lock(mutex_);
    sessions_[session.token] = session;
  }
  return session;
}

std::optional<SessionToken> AccessController::session_for(const std::string& token,
                                                          std::int64_t now) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(token);
  if (it == sessions_.end() || now >= it->second.expires_at) return std::nullopt;
  return it->second;
}

Decision AccessController::authorize(const std::string& token, Action action,
                                     const std::string& reason, std::int64_t now) const {
  auto session = session_for(token, now);
  // One message for expired and unknown alike; listing which would let a
  // caller probe token validity windows.
  if (!session.has_value()) return Decision{false, "token expired or unknown"};

  bool allowed = false;
  switch (session->role) {
    case Role::kPhysician:
      allowed = action == Action::kReadChart || action == Action::kReadSummary ||
                action == Action::kRefreshTag;
      break;
    case Role::kAgent:
      allowed = action == Action::kIngest;
      break;
    case Role::kEmergency:
      allowed = action == Action::kReadChart || action == Action::kReadSummary;
      break;
    case Role::kAdmin:
      allowed = action == Action::kAuditQuery;
      break;
  }
  if (!allowed)
    return Decision{false, std::string("role ") + role_name(session->role) + " may not " +
                               action_name(action)};
  if (session->role == Role::kEmergency && reason.empty())
    return Decision{false, "emergency access requires a recorded reason"};
  return Decision{true, {}};
}

AccessResult<Unit> AccessController::audit_append(AuditEntry entry) {
  std::lock_guard lock(mutex_);
  entry.at = std::max(entry.at, last_audit_at_);
  last_audit_at_ = entry.at;

  std::ofstream out(audit_log_path_, std::ios::binary | std::ios::app);
  if (!out) return storage_error("cannot append to audit log " + audit_log_path_);
  out << audit_entry_to_json(entry) << '\n';
  if (!out.flush()) return storage_error("audit log write failed");
  audit_.push_back(std::move(entry));
  return Unit{};
}

std::vector<AuditEntry> AccessController::audit_query(const AuditFilter& filter) const {
  std::lock_guard lock(mutex_);
  std::vector<AuditEntry> out;
  for (const AuditEntry& e : audit_) {
    if (e.at < filter.from || e.at > filter.to) continue;
    if (filter.principal.has_value() && e.principal != *filter.principal) continue;
    if (filter.patient_sn.has_value() &&
        (!e.patient_sn.has_value() || *e.patient_sn != *filter.patient_sn))
      continue;
    out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const AuditEntry& a, const AuditEntry& b) { return a.at < b.at; });
  return out;
}

std::size_t AccessController::principal_count() const {
  std::lock_guard lock(mutex_);
  return principals_.size();
}

}  // namespace simopac::access
