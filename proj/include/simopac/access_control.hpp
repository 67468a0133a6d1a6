#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "simopac/crypto.hpp"
#include "simopac/identity.hpp"
#include "simopac/result.hpp"

namespace simopac::access {

enum class Role { kPhysician, kEmergency, kAgent, kAdmin };

const char* role_name(Role role);
std::optional<Role> role_from_name(const std::string& name);

struct Principal {
  std::string username;
  Role role = Role::kPhysician;
  PasswordRecord password;
};

/// Bearer token; expires 8 hours after issue. Tokens live in process memory
/// only — a restart invalidates all sessions.
struct SessionToken {
  std::string token;  // 256-bit random value, hex
  std::string username;
  Role role = Role::kPhysician;
  std::int64_t issued_at = 0;
  std::int64_t expires_at = 0;
};

constexpr std::int64_t kTokenLifetimeSeconds = 8 * 3600;

enum class Action {
  kLogin,
  kReadChart,
  kReadSummary,
  kIngest,
  kRefreshTag,
  kResolve,
  kAuditQuery,
  kDenied,  // requests that never resolved to a real action (bad token)
};

const char* action_name(Action action);
std::optional<Action> action_from_name(const std::string& name);

enum class Outcome { kOk, kDenied, kError };

const char* outcome_name(Outcome outcome);
std::optional<Outcome> outcome_from_name(const std::string& name);

struct AuditEntry {
  std::int64_t at = 0;
  std::string principal;  // empty when the caller never authenticated
  Action action = Action::kDenied;
  std::optional<identity::Serial> patient_sn;
  std::string reason;  // break-glass or denial reason
  Outcome outcome = Outcome::kOk;
};

struct AuditFilter {
  std::int64_t from = 0;
  std::int64_t to = 0;  // inclusive
  std::optional<std::string> principal;
  std::optional<identity::Serial> patient_sn;
};

struct Decision {
  bool permitted = false;
  std::string deny_reason;
};

enum class AccessErrorCode { kInvalidCredentials, kStorageFailure, kConfigInvalid };

struct AccessError {
  AccessErrorCode code;
  std::string detail;
};

template <typename T>
using AccessResult = Result<T, AccessError>;

Principal make_principal(const std::string& username, const std::string& password, Role role);

AccessResult<std::vector<Principal>> load_principals(const std::string& path);
AccessResult<Unit> save_principals(const std::string& path,
                                   const std::vector<Principal>& principals);

std::string audit_entry_to_json(const AuditEntry& e);
Result<AuditEntry, std::string> audit_entry_from_json(const std::string& line);

/// Authentication, the role matrix, and the append-only audit trail.
///
/// Role matrix: physician — read_chart, read_summary, refresh_tag;
/// agent — ingest; emergency — read_chart/read_summary on any patient but
/// only with a non-empty recorded reason (break-glass); admin — audit
/// queries. Deny is a value, not an error.
class AccessController {
 public:
  static AccessResult<std::unique_ptr<AccessController>> open(
      const std::string& principals_path, const std::string& audit_log_path);

  /// Unknown user and wrong password are indistinguishable in error shape
  /// and both cost one hash verification. Writes one login audit entry
  /// either way.
  AccessResult<SessionToken> authenticate(const std::string& username,
                                          const std::string& password, std::int64_t now);

  /// Pure decision — no audit side effects; callers record exactly one
  /// entry per request via audit_append.
  Decision authorize(const std::string& token, Action action,
                     const std::string& reason, std::int64_t now) const;

  std::optional<SessionToken> session_for(const std::string& token, std::int64_t now) const;

  /// Timestamps are clamped monotone non-decreasing within this process.
  AccessResult<Unit> audit_append(AuditEntry entry);

  /// Chronological slice of the trail. Admin-only by the role matrix;
  /// callers enforce that via authorize.
  std::vector<AuditEntry> audit_query(const AuditFilter& filter) const;

  std::size_t principal_count() const;

 private:
  AccessController() = default;

  mutable std::mutex mutex_;
  std::unordered_map<std::string, Principal> principals_;
  std::unordered_map<std::string, SessionToken> sessions_;
  std::vector<AuditEntry> audit_;
  std::string audit_log_path_;
  std::int64_t last_audit_at_ = 0;
  PasswordRecord decoy_;  // verified against for unknown users
};

}  // namespace simopac::access
