#include "demo.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "simopac/access_control.hpp"
#include "simopac/bytes.hpp"
#include "simopac/crypto.hpp"
#include "simopac/identity.hpp"
#include "simopac/templates.hpp"
#include "simopac/terminology.hpp"
#include "simopac/timeutil.hpp"
#include "simopac/triage.hpp"

namespace simopac::demo {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kPatientSn = "3FA2C4D1E5B60718";
constexpr const char* kPhysicianPw = "demo-physician-pw";
constexpr const char* kAgentPw = "demo-agent-pw";

constexpr const char* kConceptsTsv =
    "system\tcode\tdisplay\n"
    "LOCAL\tO+\tBlood group O positive\n"
    "LOCAL\tBT\tBlood type observation\n"
    "LOCAL\tOD\tOrgan donor consent\n"
    "LOCAL\tMET\tMetformin 500 mg tablet\n"
    "ICD10\tZ88.0\tAllergy history: penicillin\n"
    "ICD10\tZ88.6\tAllergy history: analgesic agent\n"
    "ICD10\tE11.9\tType 2 diabetes mellitus\n"
    "ICD10\tI10\tEssential hypertension\n"
    "ICD9\t250.00\tDiabetes mellitus type II\n"
    "ICD9\t401.9\tUnspecified essential hypertension\n"
    "NDL\tN02541\tMetformin hydrochloride 500 mg\n";

constexpr const char* kMappingsTsv =
    "from_system\tfrom_code\tto_system\tto_code\trelation\n"
    "ICD9\t250.00\tICD10\tE11.9\texact\n"
    "ICD10\tE11.9\tICD9\t250.00\texact\n"
    "ICD9\t401.9\tICD10\tI10\texact\n"
    "ICD10\tI10\tICD9\t401.9\texact\n"
    "LOCAL\tMET\tNDL\tN02541\texact\n";

// Messages are stamped relative to the run so the encounter is recent: the
// home medication lands inside the active-medication window and the card
// renders without a staleness warning. Control ids stay fixed, which is what
// makes a rerun in the same workdir idempotent.

// Admission with allergies, home medication and the referring diagnoses.
std::string admit_message(std::int64_t at) {
  return "MSH|^~\\&|ADT|HOSP-A|||" + format_hl7_timestamp(at) +
         "||ADT^A01|DEMO-A01-1\r"
         "PID|1|3FA2C4D1E5B60718|Popescu^Ion|19800501|M\r"
         "AL1|1|DA|Z88.0^Penicillin allergy^ICD10|rash\r"
         "AL1|2|DA|Z88.6^Analgesic allergy^ICD10|urticaria\r"
         "RXE|1|MET^Metformin^LOCAL|500|mg\r"
         "DG1|1|ICD9|250.00^Diabetes mellitus type II\r"
         "DG1|2|ICD9|401.9^Essential hypertension\r";
}

// Lab round: blood type and donor-consent observations.
std::string labs_message(std::int64_t at) {
  return "MSH|^~\\&|LAB|HOSP-A|||" + format_hl7_timestamp(at) +
         "||ORU^R01|DEMO-ORU-1\r"
         "PID|1|3FA2C4D1E5B60718|Popescu^Ion|19800501|M\r"
         "OBX|1|ST|BT^Blood type^LOCAL|O+|\r"
         "OBX|2|ST|OD^Organ donor^LOCAL|Y|\r";
}

std::string discharge_message(std::int64_t at) {
  return "MSH|^~\\&|ADT|HOSP-A|||" + format_hl7_timestamp(at) +
         "||ADT^A03|DEMO-A03-1\r"
         "PID|1|3FA2C4D1E5B60718|Popescu^Ion|19800501|M\r"
         "TXT|Discharged stable after glycemic control adjustment.\r"
         "TXT|Follow-up with diabetes clinic in two weeks.\r";
}

int pick_free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return -1;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    return -1;
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

bool write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << content;
  return static_cast<bool>(out.flush());
}

struct Node {
  std::string realm;
  int port = 0;
  pid_t pid = -1;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

void stop_node(Node& node, int sig = SIGTERM) {
  if (node.pid <= 0) return;
  ::kill(node.pid, sig);
  int status = 0;
  ::waitpid(node.pid, &status, 0);
  node.pid = -1;
}

pid_t spawn_serve(const std::string& argv0, const std::string& config_path,
                  const std::string& log_path) {
  pid_t pid = ::fork();
  if (pid != 0) return pid;
  // Child: node output goes to its own log so the checklist stays readable.
  int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd >= 0) {
    ::dup2(fd, 1);
    ::dup2(fd, 2);
    ::close(fd);
  }
  std::vector<std::string> args = {argv0, "serve", "--config", config_path};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  ::execv(argv0.c_str(), argv.data());
  std::perror("execv");
  ::_exit(127);
}

bool wait_healthy(const Node& node) {
  for (int i = 0; i < 100; ++i) {
    httplib::Client cli(node.base_url());
    cli.set_connection_timeout(1, 0);
    if (auto res = cli.Get("/health"); res && res->status == 200) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  return false;
}

struct Session {
  std::string token;
};

/// Returns an empty token on failure and stores the reason in `error`.
Session login(const Node& node, const std::string& user, const std::string& password,
              std::string& error) {
  httplib::Client cli(node.base_url());
  cli.set_connection_timeout(2, 0);
  json body = {{"username", user}, {"password", password}};
  auto res = cli.Post("/auth/login", body.dump(), "application/json");
  if (!res) {
    error = "cannot reach " + node.base_url();
    return {};
  }
  if (res->status != 200) {
    error = "login rejected (" + std::to_string(res->status) + ")";
    return {};
  }
  json doc = json::parse(res->body, nullptr, false);
  if (!doc.is_object() || !doc.contains("token")) {
    error = "login response malformed";
    return {};
  }
  return Session{doc["token"].get<std::string>()};
}

httplib::Headers bearer(const Session& s) {
  return {{"Authorization", "Bearer " + s.token}};
}

class Checklist {
 public:
  /// Runs one step; `fn` returns an empty string on success or a failure
  /// description. `exit_class` is the process exit code this step would
  /// fail the demo with.
  template <typename Fn>
  void step(const std::string& name, int exit_class, Fn&& fn) {
    std::string problem = fn();
    if (problem.empty()) {
      std::cout << "  [ ok ] " << name << '\n';
    } else {
      std::cout << "  [FAIL] " << name << ": " << problem << '\n';
      if (first_failure_ == 0) first_failure_ = exit_class;
    }
  }

  int exit_code() const { return first_failure_; }

 private:
  int first_failure_ = 0;
};

}  // namespace

int run_demo(const std::string& argv0, const std::string& workdir, bool stop_node_a) {
  auto started = std::chrono::steady_clock::now();
  fs::path wd(workdir);
  std::error_code ec;
  fs::create_directories(wd, ec);
  if (ec) {
    std::cerr << "cannot create workdir " << workdir << ": " << ec.message() << '\n';
    return 6;
  }

  Node a{"hospital-a", pick_free_port(), -1};
  Node b{"hospital-b", pick_free_port(), -1};
  if (a.port <= 0 || b.port <= 0 || a.port == b.port) {
    std::cerr << "cannot allocate two free ports\n";
    return 4;
  }

  // --- fixture files ------------------------------------------------------
  if (!write_file(wd / "concepts.tsv", kConceptsTsv) ||
      !write_file(wd / "mappings.tsv", kMappingsTsv)) {
    std::cerr << "cannot write terminology fixtures\n";
    return 6;
  }
  std::string registry_tsv = "hospital-a\t127.0.0.1:" + std::to_string(a.port) +
                             "\nhospital-b\t127.0.0.1:" + std::to_string(b.port) + "\n";
  write_file(wd / "realms.tsv", registry_tsv);

  std::string mac_key_hex = hex_encode(random_bytes(32));
  write_file(wd / "mac.key", mac_key_hex + "\n");

  if (!fs::exists(wd / "principals.json")) {
    std::vector<access::Principal> principals = {
        access::make_principal("dr.adams", kPhysicianPw, access::Role::kPhysician),
        access::make_principal("agent.feed", kAgentPw, access::Role::kAgent),
    };
    auto saved = access::save_principals((wd / "principals.json").string(), principals);
    if (!saved.ok()) {
      std::cerr << saved.error().detail << '\n';
      return 6;
    }
  }

  auto node_config = [&](const Node& node) {
    json cfg = {
        {"listen_host", "127.0.0.1"},
        {"listen_port", node.port},
        {"realm", node.realm},
        {"registry", (wd / "realms.tsv").string()},
        {"data_dir", (wd / ("data-" + node.realm)).string()},
        {"principals", (wd / "principals.json").string()},
        {"terminology",
         {{"concepts", (wd / "concepts.tsv").string()},
          {"mappings", (wd / "mappings.tsv").string()}}},
        {"mac_key", (wd / "mac.key").string()},
    };
    return cfg.dump(2);
  };
  write_file(wd / "node-a.json", node_config(a));
  write_file(wd / "node-b.json", node_config(b));

  std::cout << "SIMOPAC demo (workdir " << workdir << ")\n";
  std::cout << "  hospital-a on port " << a.port << ", hospital-b on port " << b.port << "\n\n";

  // --- nodes ----------------------------------------------------------------
  a.pid = spawn_serve(argv0, (wd / "node-a.json").string(), (wd / "node-a.log").string());
  b.pid = spawn_serve(argv0, (wd / "node-b.json").string(), (wd / "node-b.log").string());

  Checklist list;
  list.step("start node hospital-a", 4, [&]() -> std::string {
    return wait_healthy(a) ? "" : "health endpoint never came up";
  });
  list.step("start node hospital-b", 4, [&]() -> std::string {
    return wait_healthy(b) ? "" : "health endpoint never came up";
  });

  std::string login_error;
  Session agent_a = login(a, "agent.feed", kAgentPw, login_error);
  list.step("authenticate agent at hospital-a", 5,
            [&]() -> std::string { return agent_a.token.empty() ? login_error : ""; });

  auto ingest = [&](const Node& node, const Session& s, const std::string& message,
                    const char* what) -> std::string {
    httplib::Client cli(node.base_url());
    cli.set_connection_timeout(2, 0);
    auto res = cli.Post("/ingest", bearer(s), message, "text/plain");
    if (!res) return std::string("cannot reach ") + node.base_url();
    if (res->status != 200)
      return std::string(what) + " rejected (" + std::to_string(res->status) + "): " + res->body;
    json doc = json::parse(res->body, nullptr, false);
    if (!doc.is_object() || !doc["errors"].empty()) return std::string(what) + " had errors";
    return "";
  };

  const std::int64_t now = std::chrono::duration_cast<std::chrono::seconds>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count();
  list.step("ingest admission at hospital-a", 4,
            [&] { return ingest(a, agent_a, admit_message(now - 11 * 86400), "admit"); });
  list.step("ingest lab results at hospital-a", 4,
            [&] { return ingest(a, agent_a, labs_message(now - 10 * 86400), "labs"); });

  Session physician_a = login(a, "dr.adams", kPhysicianPw, login_error);
  list.step("authenticate physician at hospital-a", 5,
            [&]() -> std::string { return physician_a.token.empty() ? login_error : ""; });

  fs::path tag_path = wd / "patient.cip";
  list.step("refresh emergency tag (TAG-2K)", 3, [&]() -> std::string {
    httplib::Client cli(a.base_url());
    cli.set_connection_timeout(2, 0);
    auto res = cli.Post("/patients/" + std::string(kPatientSn) + "/tag?profile=TAG-2K",
                        bearer(physician_a), "", "application/json");
    if (!res) return "cannot reach " + a.base_url();
    if (res->status != 200)
      return "tag refresh failed (" + std::to_string(res->status) + "): " + res->body;
    json doc = json::parse(res->body, nullptr, false);
    auto image = hex_decode(doc.value("image", std::string{}));
    if (!image.has_value() || image->empty()) return "no image in response";
    std::ofstream out(tag_path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(image->data()),
              static_cast<std::streamsize>(image->size()));
    if (!out.flush()) return "cannot write " + tag_path.string();
    std::cout << "         tag image: " << image->size() << " bytes of 256\n";
    return "";
  });

  if (stop_node_a) {
    std::cout << "  [note] stopping hospital-a to demonstrate offline triage\n";
    stop_node(a, SIGKILL);
  }

  // Ambulance scenario: only the card file, the offline dictionary and the
  // tag key — never the network.
  list.step("offline triage from tag file", 3, [&]() -> std::string {
    std::ifstream in(tag_path, std::ios::binary);
    if (!in) return "tag file missing";
    Bytes image((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto dict = term::TerminologyTable::load_concepts((wd / "concepts.tsv").string());
    auto key = hex_decode(mac_key_hex);
    templates::Template t = templates::emergency1();
    auto view = triage::build_view(image, &t,
                                   dict.ok() ? &dict.value() : nullptr,
                                   key.has_value() ? std::span<const std::uint8_t>(*key)
                                                   : std::span<const std::uint8_t>{},
                                   std::time(nullptr));
    if (!view.ok()) return view.error().detail;
    std::string rendered = triage::render_text(view.value());
    std::istringstream lines(rendered);
    for (std::string line; std::getline(lines, line);)
      std::cout << "         | " << line << '\n';
    bool has_blood = false, verified = view.value().seal == triage::SealStatus::kVerified;
    for (const auto& l : view.value().lines)
      if (l.label == "blood_type") has_blood = true;
    if (!has_blood) return "blood type missing from view";
    if (!verified) return "seal did not verify";
    return "";
  });

  list.step("record discharge at hospital-a", 4,
            [&] { return ingest(a, agent_a, discharge_message(now - 86400), "discharge"); });

  list.step("cross-realm resolve from hospital-b follows referral", 4, [&]() -> std::string {
    Session physician_b = login(b, "dr.adams", kPhysicianPw, login_error);
    if (physician_b.token.empty()) return login_error;
    std::string sn_uri = std::string(kPatientSn) + "@simopac://127.0.0.1:" +
                         std::to_string(a.port) + "/hospital-a";
    httplib::Client cli(b.base_url());
    cli.set_connection_timeout(2, 0);
    json body = {{"sn_uri", sn_uri}};
    auto res = cli.Post("/resolve", bearer(physician_b), body.dump(), "application/json");
    if (!res) return "cannot reach " + b.base_url();
    if (res->status != 307)
      return "expected a referral, got " + std::to_string(res->status) + ": " + res->body;
    json referral = json::parse(res->body, nullptr, false);
    std::string address = referral.value("address", std::string{});
    if (address.empty()) return "referral carries no address";
    std::cout << "         referral -> " << referral.value("realm", std::string{}) << " at "
              << address << '\n';

    // Follow the referral to the owning node; trust there is per-node.
    Session physician_owner = login(Node{"hospital-a", a.port, -1}, "dr.adams", kPhysicianPw,
                                    login_error);
    if (physician_owner.token.empty()) return "login at referred node: " + login_error;
    httplib::Client owner("http://" + address);
    owner.set_connection_timeout(2, 0);
    auto chart_res = owner.Post("/resolve", bearer(physician_owner), body.dump(),
                                "application/json");
    if (!chart_res) return "cannot reach referred node " + address;
    if (chart_res->status != 200)
      return "referred node answered " + std::to_string(chart_res->status);
    json chart = json::parse(chart_res->body, nullptr, false);
    if (!chart.is_object() || !chart.contains("sections")) return "chart malformed";
    for (const auto& [source, events] : chart["sections"].items()) {
      for (const auto& e : events) {
        if (e.value("kind", std::string{}) == "discharge" &&
            e.value("text", std::string{}).find("Discharged stable") != std::string::npos) {
          std::cout << "         discharge narrative visible from hospital-b via referral\n";
          return "";
        }
      }
    }
    return "discharge narrative not found in resolved chart";
  });

  stop_node(a);
  stop_node(b);

  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - started)
                     .count();
  std::cout << "\n  done in " << elapsed << " ms\n";
  if (list.exit_code() == 0)
    std::cout << "  all steps passed\n";
  else
    std::cout << "  one or more steps failed\n";
  return list.exit_code();
}

}  // namespace simopac::demo
