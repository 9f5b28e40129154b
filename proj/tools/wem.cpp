// wem: scenario runner, base-station server and telegram/AT utilities.

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"

#include "wem/http_api.hpp"
#include "wem/wem.hpp"

namespace {

int cmd_run(const std::string& scenario_path, const std::string& out_path, const std::string& trace_path,
            const std::string& state_dir, bool resume) {
  wem::ScenarioSpec spec;
  try {
    spec = wem::load_scenario(scenario_path);
  } catch (const wem::ScenarioError& e) {
    std::cerr << scenario_path << ": " << e.what() << '\n';
    return 2;
  }
  wem::SimOptions options;
  if (!state_dir.empty()) options.state_dir = state_dir;
  options.resume = resume;

  const auto report = wem::run(spec, options);
  const auto text = wem::to_report_json(report).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out_path);
    if (!(f << text)) {
      std::cerr << "cannot write " << out_path << '\n';
      return 1;
    }
  }
  if (!trace_path.empty()) {
    std::ofstream f(trace_path);
    if (!(f << wem::format_events(report.events))) {
      std::cerr << "cannot write " << trace_path << '\n';
      return 1;
    }
  }
  return 0;
}

int cmd_encode(const std::string& id, const std::string& ncu, const std::string& ecu) {
  wem::Telegram t{id, ncu, ecu};
  if (auto problem = wem::validate(t)) {
    std::cerr << "invalid telegram: " << *problem << '\n';
    return 1;
  }
  std::cout << wem::encode(t) << '\n';
  return 0;
}

int cmd_decode(const std::string& body) {
  const auto result = wem::decode(body);
  if (!result) {
    std::cerr << "parse error: " << result.error().message() << '\n';
    return 1;
  }
  const auto& t = result.value();
  std::cout << "meter_id: " << t.meter_id << '\n'
            << "ncu:      " << t.ncu_display << "  (total - extra)\n"
            << "ecu:      " << t.ecu_display << "  (extra)\n";
  return 0;
}

std::string visible(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\r') continue;
    out += c;
  }
  return out;
}

// Each input line is sent with CR LF appended. While the modem waits for a
// message body, a trailing "^Z" sends Ctrl-Z and a trailing "^[" sends Esc.
int cmd_at_repl(const std::string& own_number) {
  wem::AtModem modem(own_number);
  std::string line;
  std::int64_t clock = 0;
  while (std::getline(std::cin, line)) {
    std::string bytes;
    if (modem.session().state == wem::AtState::await_body) {
      if (line.ends_with("^Z")) bytes = line.substr(0, line.size() - 2) + wem::kCtrlZ;
      else if (line.ends_with("^[")) bytes = line.substr(0, line.size() - 2) + wem::kEsc;
      else bytes = line + "\r\n";
    } else {
      bytes = line + "\r\n";
    }
    auto result = modem.feed(bytes, clock++);
    std::cout << visible(result.response);
    if (modem.session().state == wem::AtState::await_body) std::cout << std::flush;
    for (const auto& m : result.submitted)
      std::cout << "[submitted to " << m.to_number << ": " << m.body << "]\n";
    std::cout << std::flush;
  }
  return 0;
}

wem::ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& config_path, const std::string& listen, const std::string& scenario_path,
              double pace) {
  wem::ServerConfig cfg;
  try {
    cfg = wem::load_server_config(config_path.empty() ? std::nullopt
                                                      : std::optional<std::filesystem::path>(config_path));
    if (!listen.empty()) std::tie(cfg.host, cfg.port) = wem::parse_listen(listen);
  } catch (const std::exception& e) {
    std::cerr << "config: " << e.what() << '\n';
    return 2;
  }

  auto station = std::make_shared<wem::BaseStation>(cfg.tariff, cfg.storage_dir);
  std::unique_ptr<wem::LiveSimulation> live;
  if (!scenario_path.empty()) {
    try {
      wem::SimOptions options;
      options.base_station = station;
      live = std::make_unique<wem::LiveSimulation>(wem::load_scenario(scenario_path), options, pace);
    } catch (const std::exception& e) {
      std::cerr << scenario_path << ": " << e.what() << '\n';
      return 2;
    }
  }

  wem::ApiServer server(station, live.get());
  if (!server.bind(cfg.host, cfg.port)) {
    std::cerr << "cannot listen on " << cfg.host << ':' << cfg.port << '\n';
    return 1;
  }
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (live) live->start();
  std::cerr << "listening on " << cfg.host << ':' << cfg.port << (live ? " (live scenario)" : "") << '\n';
  server.listen_after_bind();
  if (live) live->stop();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wireless energy meter simulator and head-end"};
  app.require_subcommand(1);

  std::string scenario, out, trace, state_dir;
  bool resume = false;
  auto* run = app.add_subcommand("run", "Run a scenario and write the report");
  run->add_option("scenario", scenario, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Report path (default: stdout)");
  run->add_option("--trace", trace, "Event log path");
  run->add_option("--state-dir", state_dir, "Directory for meter_<id>.nvlog files");
  run->add_flag("--resume", resume, "Keep NV logs already present in --state-dir");

  std::string config, listen, live_scenario;
  double pace = 60.0;
  auto* serve = app.add_subcommand("serve", "Start the base-station HTTP API");
  serve->add_option("--config", config, "Server config file (JSON)")->check(CLI::ExistingFile);
  serve->add_option("--listen", listen, "host:port (overrides config and WEM_LISTEN)");
  serve->add_option("--scenario", live_scenario, "Run this scenario live for the operator console")
      ->check(CLI::ExistingFile);
  serve->add_option("--pace", pace, "Simulated seconds per real second in live mode")->check(CLI::PositiveNumber);

  std::string id, ncu, ecu;
  auto* enc = app.add_subcommand("encode", "Encode a reading telegram");
  enc->add_option("meter_id", id)->required();
  enc->add_option("ncu", ncu, "Normal units, e.g. 14.00")->required();
  enc->add_option("ecu", ecu, "Extra units, e.g. 01.00")->required();

  std::string body;
  auto* dec = app.add_subcommand("decode", "Decode a reading telegram");
  dec->add_option("telegram", body)->required();

  std::string own_number = "919000000001";
  auto* repl = app.add_subcommand("at-repl", "Interactive AT session against a simulated modem");
  repl->add_option("--number", own_number, "The simulated modem's own number");

  CLI11_PARSE(app, argc, argv);

  if (*run) return cmd_run(scenario, out, trace, state_dir, resume);
  if (*serve) return cmd_serve(config, listen, live_scenario, pace);
  if (*enc) return cmd_encode(id, ncu, ecu);
  if (*dec) return cmd_decode(body);
  if (*repl) return cmd_at_repl(own_number);
  return 0;
}
