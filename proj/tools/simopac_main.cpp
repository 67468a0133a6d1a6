// simopac — the command line front end.
//
// Subcommands: tag write / tag read (card images), triage (offline card
// reading for responders), serve (federation node), agent run (spool
// forwarder), demo run (end-to-end scenario).
//
// Exit codes are stable for scripting:
//   0 success   2 usage or config   3 decode/validation
//   4 network   5 authentication    6 storage

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "demo.hpp"
#include "simopac/aggregation.hpp"
#include "simopac/bytes.hpp"
#include "simopac/fields.hpp"
#include "simopac/identity.hpp"
#include "simopac/service.hpp"
#include "simopac/summary.hpp"
#include "simopac/tag_codec.hpp"
#include "simopac/templates.hpp"
#include "simopac/terminology.hpp"
#include "simopac/timeutil.hpp"
#include "simopac/triage.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace simopac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDecode = 3;
constexpr int kExitNetwork = 4;
constexpr int kExitAuth = 5;
constexpr int kExitStorage = 6;

volatile std::sig_atomic_t g_stop = 0;

void on_stop_signal(int) { g_stop = 1; }

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

std::optional<Bytes> read_image(const std::string& path) {
  auto text = read_file(path);
  if (!text.has_value()) return std::nullopt;
  return Bytes(text->begin(), text->end());
}

// Key files hold the MAC key as a single hex line.
std::optional<Bytes> load_key_file(const std::string& path, std::string* err) {
  auto text = read_file(path);
  if (!text.has_value()) {
    *err = "cannot read key file " + path;
    return std::nullopt;
  }
  std::string hex;
  for (char c : *text)
    if (!std::isspace(static_cast<unsigned char>(c))) hex.push_back(c);
  auto key = hex_decode(hex);
  if (!key.has_value() || key->empty()) {
    *err = "key file " + path + " is not a hex-encoded key";
    return std::nullopt;
  }
  return key;
}

// The built-in template, or one loaded from --template-file. Returns
// nullopt (with *err untouched) when the pair is simply unknown.
std::optional<templates::Template> lookup_template(std::uint16_t template_id,
                                                   std::uint8_t version,
                                                   const std::string& template_file,
                                                   std::string* err) {
  if (!template_file.empty()) {
    auto loaded = templates::load_template_file(template_file);
    if (!loaded.ok()) {
      *err = loaded.error();
      return std::nullopt;
    }
    return loaded.value();
  }
  templates::Template builtin = templates::emergency1();
  if (builtin.template_id == template_id && builtin.version == version) return builtin;
  return std::nullopt;
}

std::string value_display(const FieldValue& v) {
  switch (v.kind) {
    case FieldKind::kText:
    case FieldKind::kIdentifier:
      return std::get<std::string>(v.value);
    case FieldKind::kCode: {
      const auto& c = std::get<CodedValue>(v.value);
      auto sys = term::system_from_wire(c.system);
      std::string name =
          sys.has_value() ? term::system_name(*sys) : "system-" + std::to_string(c.system);
      return name + " " + c.code;
    }
    case FieldKind::kDate:
      return format_date_days(std::get<std::int32_t>(v.value));
    case FieldKind::kQuantity: {
      const auto& q = std::get<QuantityValue>(v.value);
      std::ostringstream os;
      os << q.magnitude;
      if (!q.unit.empty()) os << ' ' << q.unit;
      return os.str();
    }
    case FieldKind::kBoolean:
      return std::get<bool>(v.value) ? "yes" : "no";
  }
  return "?";
}

triage::SealStatus seal_status_of(std::span<const std::uint8_t> image,
                                  const codec::CipPayload& payload,
                                  const Bytes& key) {
  if (!payload.mac_present) return triage::SealStatus::kAbsent;
  if (key.empty()) return triage::SealStatus::kUnverified;
  auto verdict = codec::verify_seal(image, key);
  if (verdict.ok() && verdict.value()) return triage::SealStatus::kVerified;
  return triage::SealStatus::kUnverified;
}

// ---------------------------------------------------------------------------
// HTTP plumbing shared by `tag write --from <server>` and `agent run`.

struct LoginOutcome {
  int exit_code = kExitOk;  // kExitOk means token is usable
  std::string token;
  std::string detail;
};

LoginOutcome http_login(const std::string& base_url, const std::string& user,
                        const std::string& password) {
  httplib::Client cli(base_url);
  cli.set_connection_timeout(5, 0);
  json body{{"username", user}, {"password", password}};
  auto res = cli.Post("/auth/login", body.dump(), "application/json");
  if (!res) return {kExitNetwork, "", "cannot reach " + base_url};
  if (res->status == 401) return {kExitAuth, "", "login rejected for user " + user};
  if (res->status != 200)
    return {kExitNetwork, "", "login failed: HTTP " + std::to_string(res->status)};
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("token"))
    return {kExitNetwork, "", "login response is not the expected JSON"};
  return {kExitOk, parsed["token"].get<std::string>(), ""};
}

httplib::Headers bearer(const std::string& token) {
  return {{"Authorization", "Bearer " + token}};
}

// ---------------------------------------------------------------------------
// tag write

struct TagWriteArgs {
  std::string sn_hex;
  std::string uri;
  std::uint16_t template_id = 1;
  std::uint8_t version = 1;
  std::string profile_name = "TAG-2K";
  std::string key_path;
  std::string from;  // summary JSON file, or http(s) base URL of a node
  std::string user;
  std::string password;
  std::string template_file;
  std::string out_path;
  std::string format = "table";
  bool sn_given = false;
  bool uri_given = false;
};

int run_tag_write(const TagWriteArgs& args) {
  auto profile = codec::tag_profile_by_name(args.profile_name);
  if (!profile.has_value()) {
    std::cerr << "error: unknown tag profile " << args.profile_name
              << " (expected TAG-2K or TAG-32K)\n";
    return kExitUsage;
  }

  // Fetch or read the summary document.
  std::string summary_text;
  bool remote = args.from.rfind("http://", 0) == 0 || args.from.rfind("https://", 0) == 0;
  if (remote) {
    if (!args.sn_given || args.user.empty()) {
      std::cerr << "error: --from <server> needs --sn, --user and --password\n";
      return kExitUsage;
    }
    auto login = http_login(args.from, args.user, args.password);
    if (login.exit_code != kExitOk) {
      std::cerr << "error: " << login.detail << '\n';
      return login.exit_code;
    }
    httplib::Client cli(args.from);
    cli.set_connection_timeout(5, 0);
    std::string path = "/patients/" + args.sn_hex +
                       "/summary?template=" + std::to_string(args.template_id) +
                       "&version=" + std::to_string(int(args.version));
    auto res = cli.Get(path, bearer(login.token));
    if (!res) {
      std::cerr << "error: cannot reach " << args.from << '\n';
      return kExitNetwork;
    }
    if (res->status == 401 || res->status == 403) {
      std::cerr << "error: summary request denied (HTTP " << res->status << ")\n";
      return kExitAuth;
    }
    if (res->status != 200) {
      std::cerr << "error: summary request failed (HTTP " << res->status << "): " << res->body
                << '\n';
      return kExitDecode;
    }
    summary_text = res->body;
  } else {
    auto text = read_file(args.from);
    if (!text.has_value()) {
      std::cerr << "error: cannot read summary file " << args.from << '\n';
      return kExitDecode;
    }
    summary_text = *text;
  }

  auto doc = summary::summary_from_json(summary_text);
  if (!doc.ok()) {
    std::cerr << "error: summary JSON: " << doc.error() << '\n';
    return kExitDecode;
  }

  codec::CipPayload payload;
  payload.sn = doc.value().patient_sn;
  payload.emr_uri = doc.value().emr_uri;
  payload.template_id = doc.value().template_id;
  payload.template_version = doc.value().version;
  payload.fields = doc.value().values;
  if (args.sn_given) {
    auto sn = identity::parse_serial_hex(args.sn_hex);
    if (!sn.ok()) {
      std::cerr << "error: --sn: " << sn.error().detail << '\n';
      return kExitUsage;
    }
    payload.sn = sn.value();
  }
  if (args.uri_given) payload.emr_uri = args.uri;
  payload.template_id = args.template_id;
  payload.template_version = args.version;
  std::int64_t stamp =
      doc.value().generated_at.has_value() ? *doc.value().generated_at : now_seconds();
  payload.updated_at = stamp > 0 ? static_cast<std::uint32_t>(stamp) : 0;

  Bytes key;
  if (!args.key_path.empty()) {
    std::string err;
    auto loaded = load_key_file(args.key_path, &err);
    if (!loaded.has_value()) {
      std::cerr << "error: " << err << '\n';
      return kExitUsage;
    }
    key = *loaded;
  }
  payload.mac_present = !key.empty();

  std::string template_err;
  auto tmpl =
      lookup_template(payload.template_id, payload.template_version, args.template_file, &template_err);
  if (!template_err.empty()) {
    std::cerr << "error: --template-file: " << template_err << '\n';
    return kExitUsage;
  }
  if (!tmpl.has_value()) {
    std::cerr << "error: no definition for template " << payload.template_id << " v"
              << int(payload.template_version) << " (pass --template-file)\n";
    return kExitDecode;
  }

  auto report = templates::validate_values(*tmpl, payload.fields);
  if (!report.valid()) {
    for (const auto& issue : report.issues)
      std::cerr << "error: " << templates::value_verdict_name(issue.verdict) << ": "
                << issue.detail << '\n';
    return kExitDecode;
  }

  auto fitted = codec::fit_to_budget(payload, *tmpl, *profile);
  if (!fitted.ok()) {
    std::cerr << "error: " << codec::codec_error_name(fitted.error().code) << ": "
              << fitted.error().detail << '\n';
    return kExitDecode;
  }
  std::vector<std::string> dropped_names;
  for (std::uint16_t field_id : fitted.value().dropped) {
    const templates::TemplateField* f = tmpl->find_field(field_id);
    dropped_names.push_back(f != nullptr ? f->name : "field-" + std::to_string(field_id));
    std::cerr << "warning: dropped " << dropped_names.back() << " (field " << field_id
              << ") to fit " << profile->name << '\n';
  }

  auto image = codec::encode(fitted.value().payload, key);
  if (!image.ok()) {
    std::cerr << "error: " << codec::codec_error_name(image.error().code) << ": "
              << image.error().detail << '\n';
    return kExitDecode;
  }

  std::ofstream out(args.out_path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(image.value().data()),
            static_cast<std::streamsize>(image.value().size()));
  out.flush();
  if (!out) {
    std::cerr << "error: cannot write " << args.out_path << '\n';
    return kExitStorage;
  }

  std::size_t used = image.value().size();
  if (args.format == "json") {
    json dropped = json::array();
    for (const auto& name : dropped_names) dropped.push_back(name);
    json summary_line{{"out", args.out_path},
                      {"bytes", used},
                      {"budget", profile->capacity_bytes},
                      {"headroom", profile->capacity_bytes - used},
                      {"sealed", payload.mac_present},
                      {"dropped", std::move(dropped)}};
    std::cout << summary_line.dump() << '\n';
  } else {
    std::cout << "wrote " << args.out_path << ": " << used << " bytes of "
              << profile->capacity_bytes << " (" << profile->name << ", headroom "
              << (profile->capacity_bytes - used) << ")"
              << (payload.mac_present ? ", sealed" : "") << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tag read

int run_tag_read(const std::string& path, const std::string& key_path,
                 const std::string& format, const std::string& template_file) {
  auto image = read_image(path);
  if (!image.has_value()) {
    std::cerr << "error: cannot read " << path << '\n';
    return kExitDecode;
  }
  auto decoded = codec::decode(*image);
  if (!decoded.ok()) {
    std::cerr << "error: " << codec::codec_error_name(decoded.error().code) << ": "
              << decoded.error().detail << '\n';
    return kExitDecode;
  }
  const codec::CipPayload& payload = decoded.value();

  Bytes key;
  if (!key_path.empty()) {
    std::string err;
    auto loaded = load_key_file(key_path, &err);
    if (!loaded.has_value()) {
      std::cerr << "error: " << err << '\n';
      return kExitUsage;
    }
    key = *loaded;
  }
  triage::SealStatus seal = seal_status_of(*image, payload, key);

  std::string template_err;
  auto tmpl = lookup_template(payload.template_id, payload.template_version, template_file,
                              &template_err);
  if (!template_err.empty()) {
    std::cerr << "error: --template-file: " << template_err << '\n';
    return kExitUsage;
  }
  const templates::Template* tmpl_ptr = tmpl.has_value() ? &*tmpl : nullptr;

  if (format == "json") {
    summary::SummaryDoc doc;
    doc.patient_sn = payload.sn;
    doc.emr_uri = payload.emr_uri;
    doc.template_id = payload.template_id;
    doc.version = payload.template_version;
    doc.generated_at = payload.updated_at;
    doc.values = payload.fields;
    json out = json::parse(summary::summary_to_json(doc, tmpl_ptr));
    out["seal"] = triage::seal_status_name(seal);
    std::cout << out.dump(2) << '\n';
    return kExitOk;
  }

  std::cout << "sn:        " << identity::format_serial_hex(payload.sn) << '\n';
  std::cout << "uri:       " << payload.emr_uri << '\n';
  std::cout << "template:  " << payload.template_id << " v" << int(payload.template_version)
            << '\n';
  std::cout << "updated:   " << iso8601_utc(payload.updated_at) << '\n';
  std::cout << "seal:      " << triage::seal_status_name(seal) << '\n';
  for (const FieldValue& v : payload.fields) {
    const templates::TemplateField* f =
        tmpl_ptr != nullptr ? tmpl_ptr->find_field(v.field_id) : nullptr;
    std::string label = f != nullptr ? f->name : "field-" + std::to_string(v.field_id);
    std::cout << "  " << label << ": " << value_display(v) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// triage

int run_triage(const std::string& path, const std::string& key_path,
               const std::string& dict_path, const std::string& template_file) {
  auto image = read_image(path);
  if (!image.has_value()) {
    std::cerr << "error: cannot read " << path << '\n';
    return kExitDecode;
  }

  Bytes key;
  if (!key_path.empty()) {
    std::string err;
    auto loaded = load_key_file(key_path, &err);
    if (!loaded.has_value()) {
      std::cerr << "error: " << err << '\n';
      return kExitUsage;
    }
    key = *loaded;
  }

  std::optional<term::TerminologyTable> dictionary;
  if (!dict_path.empty()) {
    auto loaded = term::TerminologyTable::load_concepts(dict_path);
    if (!loaded.ok()) {
      std::cerr << "error: --dict: " << loaded.error().detail << '\n';
      return kExitUsage;
    }
    dictionary.emplace(std::move(loaded.value()));
  }

  // Decode once to learn the template pair, so field labels attach when the
  // card uses a template this binary knows.
  auto decoded = codec::decode(*image);
  if (!decoded.ok()) {
    std::cerr << "error: " << codec::codec_error_name(decoded.error().code) << ": "
              << decoded.error().detail << '\n';
    return kExitDecode;
  }
  std::string template_err;
  auto tmpl = lookup_template(decoded.value().template_id, decoded.value().template_version,
                              template_file, &template_err);
  if (!template_err.empty()) {
    std::cerr << "error: --template-file: " << template_err << '\n';
    return kExitUsage;
  }

  auto view = triage::build_view(*image, tmpl.has_value() ? &*tmpl : nullptr,
                                 dictionary.has_value() ? &*dictionary : nullptr, key,
                                 now_seconds());
  if (!view.ok()) {
    std::cerr << "error: " << codec::codec_error_name(view.error().code) << ": "
              << view.error().detail << '\n';
    return kExitDecode;
  }
  std::cout << triage::render_text(view.value());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// serve

int run_serve(const std::string& config_path) {
  auto config = svc::load_service_config(config_path);
  if (!config.ok()) {
    std::cerr << "error: " << config.error().detail << '\n';
    return config.error().code == svc::ServiceErrorCode::kStorageFailure ? kExitStorage
                                                                         : kExitUsage;
  }
  auto service = svc::Service::start(config.value());
  if (!service.ok()) {
    std::cerr << "error: " << service.error().detail << '\n';
    switch (service.error().code) {
      case svc::ServiceErrorCode::kPortUnavailable:
        return kExitNetwork;
      case svc::ServiceErrorCode::kStorageFailure:
        return kExitStorage;
      case svc::ServiceErrorCode::kConfigInvalid:
        return kExitUsage;
    }
    return kExitUsage;
  }

  std::signal(SIGINT, on_stop_signal);
  std::signal(SIGTERM, on_stop_signal);
  std::cout << "serving realm " << config.value().realm << " on " << config.value().listen_host
            << ":" << service.value()->port() << " (" << service.value()->node_uri() << ")"
            << std::endl;
  while (g_stop == 0) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::cout << "shutting down\n";
  service.value()->stop();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// agent run

int run_agent(const std::string& config_path, bool once, const std::string& server,
              const std::string& user, const std::string& password) {
  auto agents = agg::load_agent_config(config_path);
  if (!agents.ok()) {
    std::cerr << "error: " << agents.error().detail << '\n';
    return kExitUsage;
  }

  auto login = http_login(server, user, password);
  if (login.exit_code != kExitOk) {
    std::cerr << "error: " << login.detail << '\n';
    return login.exit_code;
  }

  std::signal(SIGINT, on_stop_signal);
  std::signal(SIGTERM, on_stop_signal);

  std::int64_t sleep_seconds = 5;
  for (const auto& agent : agents.value())
    sleep_seconds = std::min(sleep_seconds, static_cast<std::int64_t>(agent.poll_interval_seconds));
  if (sleep_seconds < 1) sleep_seconds = 1;

  while (g_stop == 0) {
    for (const auto& agent : agents.value()) {
      auto items = agg::poll_source(agent);
      if (!items.ok()) {
        std::cerr << "error: source " << agent.source_id << ": " << items.error().detail << '\n';
        return kExitStorage;
      }
      for (const agg::SpoolItem& item : items.value()) {
        httplib::Client cli(server);
        cli.set_connection_timeout(5, 0);
        auto res = cli.Post("/ingest", bearer(login.token), item.text, "text/plain");
        if (!res) {
          std::cerr << "error: cannot reach " << server << '\n';
          return kExitNetwork;
        }
        if (res->status == 401 || res->status == 403) {
          std::cerr << "error: ingest denied (HTTP " << res->status << ")\n";
          return kExitAuth;
        }
        if (res->status != 200 && res->status != 400) {
          std::cerr << "error: ingest failed (HTTP " << res->status << "): " << res->body << '\n';
          return kExitStorage;
        }
        json report = json::parse(res->body, nullptr, false);
        std::cout << "source " << agent.source_id << " " << item.file_name << ": ";
        if (report.is_discarded()) {
          std::cout << "HTTP " << res->status << '\n';
        } else {
          std::cout << report.value("events_appended", 0) << " events, "
                    << report.value("duplicates", 0) << " duplicates";
          if (report.contains("errors") && !report["errors"].empty())
            std::cout << ", " << report["errors"].size() << " errors";
          std::cout << '\n';
          for (const auto& e : report.value("errors", json::array()))
            std::cerr << "  rejected: " << e.value("detail", "") << '\n';
        }
        // The server answered definitively (accepted or rejected), so the
        // message leaves the spool either way; retrying a rejected message
        // verbatim can never succeed.
        std::error_code ec;
        fs::create_directories(agent.archive_dir, ec);
        fs::rename(fs::path(agent.spool_dir) / item.file_name,
                   fs::path(agent.archive_dir) / item.file_name, ec);
        if (ec) {
          std::cerr << "error: cannot archive " << item.file_name << ": " << ec.message() << '\n';
          return kExitStorage;
        }
      }
    }
    if (once) break;
    for (std::int64_t i = 0; i < sleep_seconds * 10 && g_stop == 0; ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  return kExitOk;
}

std::string self_executable(const char* argv0) {
  std::error_code ec;
  fs::path exe = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) return exe.string();
  return argv0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simopac — patient cards, chart aggregation, and federation"};
  app.require_subcommand(1);
  int rc = kExitOk;

  // --- tag ---
  auto* tag = app.add_subcommand("tag", "Write and read patient card images");
  tag->require_subcommand(1);

  TagWriteArgs wargs;
  auto* tag_write = tag->add_subcommand("write", "Build a .cip image from a summary document");
  auto* sn_opt = tag_write->add_option("--sn", wargs.sn_hex, "Tag serial (16 hex digits)");
  auto* uri_opt = tag_write->add_option("--uri", wargs.uri, "Owning EMR URI (simopac://host:port/realm)");
  tag_write->add_option("--template", wargs.template_id, "Template id")->default_val(1);
  tag_write->add_option("--version", wargs.version, "Template version")->default_val(1);
  tag_write->add_option("--profile", wargs.profile_name, "Tag profile (TAG-2K or TAG-32K)")
      ->default_val("TAG-2K");
  tag_write->add_option("--key", wargs.key_path, "MAC key file (hex); seals the image");
  tag_write->add_option("--from", wargs.from, "Summary JSON file, or http(s) node base URL")
      ->required();
  tag_write->add_option("--user", wargs.user, "Username for --from <server>");
  tag_write->add_option("--password", wargs.password, "Password for --from <server>");
  tag_write->add_option("--template-file", wargs.template_file, "Template definition JSON");
  tag_write->add_option("--out", wargs.out_path, "Output .cip path")->required();
  tag_write->add_option("--format", wargs.format, "table or json")->default_val("table");
  tag_write->callback([&] {
    wargs.sn_given = sn_opt->count() > 0;
    wargs.uri_given = uri_opt->count() > 0;
    rc = run_tag_write(wargs);
  });

  std::string read_path, read_key, read_format = "table", read_template_file;
  auto* tag_read = tag->add_subcommand("read", "Decode a .cip image");
  tag_read->add_option("file", read_path, "Image path")->required();
  tag_read->add_option("--key", read_key, "MAC key file (hex) for seal verification");
  tag_read->add_option("--format", read_format, "table or json")->default_val("table");
  tag_read->add_option("--template-file", read_template_file, "Template definition JSON");
  tag_read->callback([&] { rc = run_tag_read(read_path, read_key, read_format, read_template_file); });

  // --- triage ---
  std::string triage_path, triage_key, triage_dict, triage_template_file;
  auto* triage_cmd =
      app.add_subcommand("triage", "Offline responder view of a card (no network)");
  triage_cmd->add_option("file", triage_path, "Image path")->required();
  triage_cmd->add_option("--key", triage_key, "MAC key file (hex) for seal verification");
  triage_cmd->add_option("--dict", triage_dict, "Offline concept dictionary (TSV)");
  triage_cmd->add_option("--template-file", triage_template_file, "Template definition JSON");
  triage_cmd->callback(
      [&] { rc = run_triage(triage_path, triage_key, triage_dict, triage_template_file); });

  // --- serve ---
  std::string serve_config;
  auto* serve = app.add_subcommand("serve", "Run a federation node");
  serve->add_option("--config", serve_config, "Node config JSON")
      ->envname("SIMOPAC_CONFIG")
      ->required();
  serve->callback([&] { rc = run_serve(serve_config); });

  // --- agent ---
  auto* agent = app.add_subcommand("agent", "Source agents");
  agent->require_subcommand(1);
  std::string agent_config, agent_server, agent_user, agent_password;
  bool agent_once = false;
  auto* agent_run = agent->add_subcommand("run", "Forward spooled HL7-lite files to a node");
  agent_run->add_option("--config", agent_config, "Agent config JSON")
      ->envname("SIMOPAC_CONFIG")
      ->required();
  agent_run->add_flag("--once", agent_once, "One pass over the spools, then exit");
  agent_run->add_option("--server", agent_server, "Node base URL")->required();
  agent_run->add_option("--user", agent_user, "Agent username")->required();
  agent_run->add_option("--password", agent_password, "Agent password")->required();
  agent_run->callback(
      [&] { rc = run_agent(agent_config, agent_once, agent_server, agent_user, agent_password); });

  // --- demo ---
  auto* demo = app.add_subcommand("demo", "End-to-end scenario");
  std::string demo_workdir;
  bool demo_stop_a = false;
  auto* demo_run = demo->add_subcommand("run", "Two nodes, ingest, tag, triage, referral");
  demo_run->add_option("--workdir", demo_workdir, "Scratch directory")->required();
  demo_run->add_flag("--stop-node-a", demo_stop_a,
                     "Kill node A before triage to show the offline path");
  demo_run->callback(
      [&] { rc = demo::run_demo(self_executable(argv[0]), demo_workdir, demo_stop_a); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int cli_rc = app.exit(e);
    return cli_rc == 0 ? kExitOk : kExitUsage;
  }
  return rc;
}
