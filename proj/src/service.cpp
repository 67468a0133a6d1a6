#include "simopac/service.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "simopac/access_control.hpp"
#include "simopac/aggregation.hpp"
#include "simopac/identity.hpp"
#include "simopac/record_store.hpp"
#include "simopac/summary.hpp"
#include "simopac/tag_codec.hpp"
#include "simopac/templates.hpp"
#include "simopac/terminology.hpp"
#include "simopac/timeutil.hpp"

namespace simopac::svc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceError config_error(std::string detail) {
  return ServiceError{ServiceErrorCode::kConfigInvalid, std::move(detail)};
}

std::int64_t now_seconds() {
  return static_cast<std::int64_t>(std::time(nullptr));
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& error,
                 const std::string& detail) {
  reply(res, status, json{{"error", error}, {"detail", detail}});
}

std::string bearer_token(const httplib::Request& req) {
  std::string header = req.get_header_value("Authorization");
  constexpr const char* kPrefix = "Bearer ";
  if (header.rfind(kPrefix, 0) == 0) return header.substr(7);
  return {};
}

std::string access_reason(const httplib::Request& req) {
  std::string reason = req.get_header_value("X-Access-Reason");
  if (reason.empty() && req.has_param("reason")) reason = req.get_param_value("reason");
  return reason;
}

json chart_to_json(const store::PatientChart& chart) {
  json sections = json::object();
  for (const auto& [source, events] : chart.sections) {
    json list = json::array();
    for (const auto& e : events) list.push_back(json::parse(event_to_json(e)));
    sections[source] = std::move(list);
  }
  return json{{"patient_sn", identity::format_serial_hex(chart.patient_sn)},
              {"sections", std::move(sections)}};
}

json report_to_json(const agg::IngestReport& r) {
  json errors = json::array();
  for (const auto& e : r.errors)
    errors.push_back(json{{"file", e.file_name}, {"detail", e.detail}});
  std::string result = "NoEvents";
  if (r.events_appended > 0)
    result = "Appended";
  else if (r.duplicates > 0)
    result = "DuplicateIgnored";
  return json{{"messages_seen", r.messages_seen},
              {"parsed_ok", r.parsed_ok},
              {"events_appended", r.events_appended},
              {"duplicates", r.duplicates},
              {"translation_misses", r.translation_misses},
              {"errors", std::move(errors)},
              {"result", result}};
}

}  // namespace

struct Service::Impl {
  ServiceConfig cfg;
  std::unique_ptr<store::RecordStore> store;
  std::unique_ptr<templates::TemplateRegistry> registry;
  std::unique_ptr<term::TerminologyTable> terms;
  std::unique_ptr<access::AccessController> access;
  identity::RealmRegistry realms;
  Bytes mac_key;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  std::string node_uri() const {
    const std::string& host = cfg.advertised_host.empty() ? cfg.listen_host : cfg.advertised_host;
    return "simopac://" + host + ":" + std::to_string(port) + "/" + cfg.realm;
  }

  void audit(const std::string& principal, access::Action action,
             std::optional<identity::Serial> sn, const std::string& reason,
             access::Outcome outcome) {
    access::AuditEntry entry;
    entry.at = now_seconds();
    entry.principal = principal;
    entry.action = action;
    entry.patient_sn = sn;
    entry.reason = reason;
    entry.outcome = outcome;
    access->audit_append(std::move(entry));  // best effort; the trail reports its own failures
  }

  /// 401/403 handling shared by every authenticated endpoint. Writes the
  /// request's single audit entry when it denies; on success the caller
  /// writes it instead.
  std::optional<access::SessionToken> gate(const httplib::Request& req, httplib::Response& res,
                                           access::Action action,
                                           std::optional<identity::Serial> sn) {
    const std::string token = bearer_token(req);
    const std::string reason = access_reason(req);
    auto session = access->session_for(token, now_seconds());
    if (!session.has_value()) {
      audit("", access::Action::kDenied, sn, "token expired or unknown", access::Outcome::kDenied);
      reply_error(res, 401, "Unauthorized", "token expired or unknown");
      return std::nullopt;
    }
    access::Decision decision = access->authorize(token, action, reason, now_seconds());
    if (!decision.permitted) {
      audit(session->username, action, sn, decision.deny_reason, access::Outcome::kDenied);
      reply_error(res, 403, "Forbidden", decision.deny_reason);
      return std::nullopt;
    }
    return session;
  }

  void route();
};

void Service::Impl::route() {
  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, json{{"status", "ok"}, {"realm", cfg.realm}});
  });

  server.Post("/auth/login", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    if (!body.is_object() || !body.contains("username") || !body.contains("password")) {
      // No principal is known yet, but the attempt still leaves a trace.
      audit("", access::Action::kLogin, std::nullopt, "malformed login body",
            access::Outcome::kError);
      reply_error(res, 400, "BadRequest", "body must be {username, password}");
      return;
    }
    // authenticate writes the login audit entry itself (ok or denied).
    auto session = access->authenticate(body["username"].get<std::string>(),
                                        body["password"].get<std::string>(), now_seconds());
    if (!session.ok()) {
      reply_error(res, 401, "InvalidCredentials", "invalid credentials");
      return;
    }
    reply(res, 200,
          json{{"token", session.value().token},
               {"username", session.value().username},
               {"role", access::role_name(session.value().role)},
               {"expires_at", iso8601_utc(session.value().expires_at)}});
  });

  server.Post("/resolve", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    std::string sn_uri_text =
        body.is_object() && body.contains("sn_uri") ? body.value("sn_uri", std::string{}) : "";
    auto parsed = identity::parse_sn_uri(sn_uri_text);
    std::optional<identity::Serial> sn;
    if (parsed.ok()) sn = parsed.value().sn;

    auto session = gate(req, res, access::Action::kReadChart, sn);
    if (!session.has_value()) return;
    const std::string reason = access_reason(req);

    if (!parsed.ok()) {
      audit(session->username, access::Action::kResolve, std::nullopt, reason,
            access::Outcome::kError);
      reply_error(res, 400, "BadSnUri", parsed.error().detail);
      return;
    }
    const identity::SnUri& id = parsed.value();
    if (id.uri.realm == cfg.realm) {
      audit(session->username, access::Action::kResolve, sn, reason, access::Outcome::kOk);
      reply(res, 200, chart_to_json(store->get_chart(id.sn)));
      return;
    }
    if (auto address = realms.lookup(id.uri.realm); address.has_value()) {
      // Federation by referral: the caller follows this to the owning node.
      res.set_header("Location", "http://" + *address + "/resolve");
      audit(session->username, access::Action::kResolve, sn, reason, access::Outcome::kOk);
      reply(res, 307, json{{"realm", id.uri.realm}, {"address", *address}});
      return;
    }
    audit(session->username, access::Action::kResolve, sn, reason, access::Outcome::kError);
    reply_error(res, 404, "UnknownRealm", "realm " + id.uri.realm + " is not in the registry");
  });

  server.Get("/patients/:sn/chart", [this](const httplib::Request& req, httplib::Response& res) {
    auto sn = identity::parse_serial_hex(req.path_params.at("sn"));
    auto session = gate(req, res, access::Action::kReadChart,
                        sn.ok() ? std::optional(sn.value()) : std::nullopt);
    if (!session.has_value()) return;
    const std::string reason = access_reason(req);
    if (!sn.ok()) {
      audit(session->username, access::Action::kReadChart, std::nullopt, reason,
            access::Outcome::kError);
      reply_error(res, 400, "BadSerial", sn.error().detail);
      return;
    }
    audit(session->username, access::Action::kReadChart, sn.value(), reason,
          access::Outcome::kOk);
    reply(res, 200, chart_to_json(store->get_chart(sn.value())));
  });

  server.Get("/patients/:sn/summary", [this](const httplib::Request& req, httplib::Response& res) {
    auto sn = identity::parse_serial_hex(req.path_params.at("sn"));
    auto session = gate(req, res, access::Action::kReadSummary,
                        sn.ok() ? std::optional(sn.value()) : std::nullopt);
    if (!session.has_value()) return;
    const std::string reason = access_reason(req);
    if (!sn.ok()) {
      audit(session->username, access::Action::kReadSummary, std::nullopt, reason,
            access::Outcome::kError);
      reply_error(res, 400, "BadSerial", sn.error().detail);
      return;
    }
    std::uint16_t template_id = 1;
    std::uint8_t version = 1;
    if (req.has_param("template"))
      template_id = static_cast<std::uint16_t>(std::stoul(req.get_param_value("template")));
    if (req.has_param("version"))
      version = static_cast<std::uint8_t>(std::stoul(req.get_param_value("version")));
    auto t = registry->get_template(template_id, version);
    if (!t.ok()) {
      audit(session->username, access::Action::kReadSummary, sn.value(), reason,
            access::Outcome::kError);
      reply_error(res, 404, "TemplateNotFound", t.error().detail);
      return;
    }
    std::int64_t now = now_seconds();
    summary::SummaryDoc doc;
    doc.patient_sn = sn.value();
    doc.emr_uri = node_uri();
    doc.template_id = template_id;
    doc.version = version;
    doc.generated_at = now;
    doc.values = store->build_cip_fields(sn.value(), t.value(), now);
    audit(session->username, access::Action::kReadSummary, sn.value(), reason,
          access::Outcome::kOk);
    res.status = 200;
    res.set_content(summary::summary_to_json(doc, &t.value()), "application/json");
  });

  server.Post("/ingest", [this](const httplib::Request& req, httplib::Response& res) {
    auto session = gate(req, res, access::Action::kIngest, std::nullopt);
    if (!session.has_value()) return;
    auto report = agg::ingest_text(*store, *terms, req.body, now_seconds());
    if (!report.ok()) {
      audit(session->username, access::Action::kIngest, std::nullopt, {},
            access::Outcome::kError);
      reply_error(res, 503, agg::agg_error_name(report.error().code), report.error().detail);
      return;
    }
    const agg::IngestReport& r = report.value();
    bool rejected = r.parsed_ok == 0 && !r.errors.empty();
    audit(session->username, access::Action::kIngest, std::nullopt, {},
          rejected ? access::Outcome::kError : access::Outcome::kOk);
    reply(res, rejected ? 400 : 200, report_to_json(r));
  });

  server.Post("/patients/:sn/tag", [this](const httplib::Request& req, httplib::Response& res) {
    auto sn = identity::parse_serial_hex(req.path_params.at("sn"));
    auto session = gate(req, res, access::Action::kRefreshTag,
                        sn.ok() ? std::optional(sn.value()) : std::nullopt);
    if (!session.has_value()) return;
    const std::string reason = access_reason(req);
    auto fail = [&](int status, const std::string& error, const std::string& detail) {
      audit(session->username, access::Action::kRefreshTag,
            sn.ok() ? std::optional(sn.value()) : std::nullopt, reason, access::Outcome::kError);
      reply_error(res, status, error, detail);
    };
    if (!sn.ok()) {
      fail(400, "BadSerial", sn.error().detail);
      return;
    }
    std::string profile_name = req.has_param("profile") ? req.get_param_value("profile") : "TAG-2K";
    auto profile = codec::tag_profile_by_name(profile_name);
    if (!profile.has_value()) {
      fail(400, "UnknownProfile", "no tag profile named " + profile_name);
      return;
    }
    std::uint16_t template_id = 1;
    std::uint8_t version = 1;
    if (req.has_param("template"))
      template_id = static_cast<std::uint16_t>(std::stoul(req.get_param_value("template")));
    if (req.has_param("version"))
      version = static_cast<std::uint8_t>(std::stoul(req.get_param_value("version")));

    auto image = agg::refresh_tag_payload(*store, *registry, sn.value(), template_id, version,
                                          *profile, mac_key, node_uri(), now_seconds());
    if (!image.ok()) {
      int status = 400;
      switch (image.error().code) {
        case agg::AggErrorCode::kTemplateNotFound: status = 404; break;
        case agg::AggErrorCode::kStorageFailure: status = 503; break;
        default: status = 400; break;
      }
      fail(status, agg::agg_error_name(image.error().code), image.error().detail);
      return;
    }
    audit(session->username, access::Action::kRefreshTag, sn.value(), reason,
          access::Outcome::kOk);
    reply(res, 200,
          json{{"profile", profile->name},
               {"length", image.value().size()},
               {"sealed", !mac_key.empty()},
               {"image", hex_encode(image.value())}});
  });

  server.Get("/audit", [this](const httplib::Request& req, httplib::Response& res) {
    auto session = gate(req, res, access::Action::kAuditQuery, std::nullopt);
    if (!session.has_value()) return;
    access::AuditFilter filter;
    filter.from = 0;
    filter.to = now_seconds();
    if (req.has_param("from")) {
      auto from = parse_iso8601_utc(req.get_param_value("from"));
      if (!from.has_value()) {
        audit(session->username, access::Action::kAuditQuery, std::nullopt, {},
              access::Outcome::kError);
        reply_error(res, 400, "BadTimestamp", "from must be ISO-8601 UTC");
        return;
      }
      filter.from = *from;
    }
    if (req.has_param("to")) {
      auto to = parse_iso8601_utc(req.get_param_value("to"));
      if (!to.has_value()) {
        audit(session->username, access::Action::kAuditQuery, std::nullopt, {},
              access::Outcome::kError);
        reply_error(res, 400, "BadTimestamp", "to must be ISO-8601 UTC");
        return;
      }
      filter.to = *to;
    }
    if (req.has_param("principal")) filter.principal = req.get_param_value("principal");
    if (req.has_param("patient_sn")) {
      auto sn = identity::parse_serial_hex(req.get_param_value("patient_sn"));
      if (!sn.ok()) {
        audit(session->username, access::Action::kAuditQuery, std::nullopt, {},
              access::Outcome::kError);
        reply_error(res, 400, "BadSerial", sn.error().detail);
        return;
      }
      filter.patient_sn = sn.value();
    }
    auto entries = access->audit_query(filter);
    json list = json::array();
    for (const auto& e : entries) list.push_back(json::parse(audit_entry_to_json(e)));
    audit(session->username, access::Action::kAuditQuery, std::nullopt, {},
          access::Outcome::kOk);
    reply(res, 200, json{{"entries", std::move(list)}});
  });
}

ServiceResult<ServiceConfig> load_service_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return config_error("cannot open config " + path);
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (!doc.is_object()) return config_error(path + ": config must be a JSON object");

  ServiceConfig cfg;
  cfg.listen_host = doc.value("listen_host", std::string("127.0.0.1"));
  cfg.listen_port = doc.value("listen_port", 0);
  cfg.advertised_host = doc.value("advertised_host", std::string{});
  cfg.realm = doc.value("realm", std::string{});
  cfg.registry_path = doc.value("registry", std::string{});
  cfg.data_dir = doc.value("data_dir", std::string{});
  cfg.principals_path = doc.value("principals", std::string{});
  if (doc.contains("terminology") && doc["terminology"].is_object()) {
    cfg.concepts_path = doc["terminology"].value("concepts", std::string{});
    cfg.mappings_path = doc["terminology"].value("mappings", std::string{});
  }
  cfg.mac_key_path = doc.value("mac_key", std::string{});
  cfg.audit_log_path = doc.value("audit_log", std::string{});

  if (cfg.realm.empty()) return config_error(path + ": realm is required");
  if (cfg.data_dir.empty()) return config_error(path + ": data_dir is required");
  if (cfg.principals_path.empty()) return config_error(path + ": principals is required");
  if (cfg.concepts_path.empty() || cfg.mappings_path.empty())
    return config_error(path + ": terminology.concepts and terminology.mappings are required");
  if (cfg.listen_port < 0 || cfg.listen_port > 65535)
    return config_error(path + ": listen_port out of range");
  return cfg;
}

Service::Service() : impl_(new Impl()) {}

Service::~Service() { stop(); }

void Service::stop() {
  if (!impl_) return;
  if (impl_->server.is_running()) impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Service::port() const { return impl_->port; }

std::string Service::node_uri() const { return impl_->node_uri(); }

ServiceResult<std::unique_ptr<Service>> Service::start(const ServiceConfig& config) {
  auto service = std::unique_ptr<Service>(new Service());
  Impl& impl = *service->impl_;
  impl.cfg = config;

  auto terms = term::TerminologyTable::load(config.concepts_path, config.mappings_path);
  if (!terms.ok())
    return config_error("terminology: " + terms.error().detail);
  impl.terms = std::make_unique<term::TerminologyTable>(std::move(terms).value());

  auto opened = store::RecordStore::open(config.data_dir);
  if (!opened.ok())
    return ServiceError{ServiceErrorCode::kStorageFailure, opened.error().detail};
  impl.store = std::move(opened).value();

  auto registry = templates::TemplateRegistry::open(impl.store->template_log_path());
  if (!registry.ok())
    return ServiceError{ServiceErrorCode::kStorageFailure, registry.error().detail};
  impl.registry = std::move(registry).value();

  std::string audit_path = config.audit_log_path.empty()
                               ? (fs::path(config.data_dir) / "audit.ndjson").string()
                               : config.audit_log_path;
  auto access = access::AccessController::open(config.principals_path, audit_path);
  if (!access.ok()) return config_error(access.error().detail);
  impl.access = std::move(access).value();

  if (!config.registry_path.empty()) {
    auto realms = identity::load_realm_registry(config.registry_path);
    if (!realms.ok()) return config_error(realms.error());
    impl.realms = std::move(realms).value();
  }

  if (!config.mac_key_path.empty()) {
    std::ifstream key_in(config.mac_key_path, std::ios::binary);
    if (!key_in) return config_error("cannot open MAC key file " + config.mac_key_path);
    std::string hex;
    key_in >> hex;
    auto key = hex_decode(hex);
    if (!key.has_value() || key->empty())
      return config_error(config.mac_key_path + ": MAC key must be non-empty hex");
    impl.mac_key = std::move(*key);
  }

  impl.route();

  if (config.listen_port == 0) {
    impl.port = impl.server.bind_to_any_port(config.listen_host);
    if (impl.port <= 0)
      return ServiceError{ServiceErrorCode::kPortUnavailable,
                          "cannot bind a port on " + config.listen_host};
  } else {
    if (!impl.server.bind_to_port(config.listen_host, config.listen_port))
      return ServiceError{ServiceErrorCode::kPortUnavailable,
                          "cannot bind " + config.listen_host + ":" +
                              std::to_string(config.listen_port)};
    impl.port = config.listen_port;
  }

  impl.thread = std::thread([&impl] { impl.server.listen_after_bind(); });
  for (int i = 0; i < 500 && !impl.server.is_running(); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  if (!impl.server.is_running())
    return ServiceError{ServiceErrorCode::kPortUnavailable, "server failed to start"};
  return service;
}

}  // namespace simopac::svc
