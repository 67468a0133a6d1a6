#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "simopac/result.hpp"

namespace simopac::svc {

/// Everything one node needs: where to listen, which realm it serves, and
/// the file-backed state it loads at startup.
struct ServiceConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 0;            // 0 picks a free port
  std::string advertised_host;    // host used in issued SN@URIs; defaults to listen_host
  std::string realm;
  std::string registry_path;      // realm -> address TSV
  std::string data_dir;
  std::string principals_path;
  std::string concepts_path;
  std::string mappings_path;
  std::string mac_key_path;       // optional; absent -> tags go out unsealed
  std::string audit_log_path;     // defaults to <data_dir>/audit.ndjson
};

enum class ServiceErrorCode { kConfigInvalid, kPortUnavailable, kStorageFailure };

struct ServiceError {
  ServiceErrorCode code;
  std::string detail;
};

template <typename T>
using ServiceResult = Result<T, ServiceError>;

ServiceResult<ServiceConfig> load_service_config(const std::string& path);

/// A running node. Endpoints (JSON bodies, ISO-8601 timestamps, bearer
/// session tokens):
///
///   POST /auth/login                      {username, password} -> {token, ...}
///   POST /resolve                         {sn_uri} -> chart | 307 referral | 404
///   GET  /patients/{sn}/chart
///   GET  /patients/{sn}/summary?template=ID&version=V
///   POST /ingest                          HL7-lite text/plain -> ingest report
///   POST /patients/{sn}/tag?profile=NAME  -> {image: hex, length}
///   GET  /audit?from=..&to=..             admin only
///   GET  /health                          unauthenticated, unaudited
///
/// Every other endpoint writes exactly one audit entry per request.
/// Emergency-role reads pass their break-glass reason in the
/// X-Access-Reason header (or ?reason=).
class Service {
 public:
  static ServiceResult<std::unique_ptr<Service>> start(const ServiceConfig& config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void stop();
  int port() const;
  std::string node_uri() const;  // simopac://advertised_host:port/realm

 private:
  Service();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace simopac::svc
