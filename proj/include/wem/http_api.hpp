#pragma once

// HTTP front of the base station, plus the live-simulation endpoints used by
// the operator console. All request and response bodies are JSON.

#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "wem/base_station.hpp"
#include "wem/firmware.hpp"
#include "wem/live.hpp"

namespace wem {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> storage_dir;
  TariffSchedule tariff{300, 500, 0};
};

using EnvLookup = std::function<const char*(const char*)>;

inline std::pair<std::string, int> parse_listen(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("listen address must be host:port");
  const int port = std::stoi(s.substr(colon + 1));
  if (port < 0 || port > 65535) throw std::invalid_argument("listen port out of range");
  return {s.substr(0, colon), port};
}

/// Config file (JSON) first, then WEM_* environment overrides:
/// WEM_LISTEN=host:port, WEM_STORAGE_DIR, WEM_NORMAL_RATE, WEM_PEAK_RATE, WEM_FIXED_CHARGE.
inline ServerConfig load_server_config(const std::optional<std::filesystem::path>& file,
                                       const EnvLookup& env = [](const char* k) { return std::getenv(k); }) {
  ServerConfig cfg;
  nlohmann::json tariff_json = nlohmann::json::object();
  if (file) {
    std::ifstream f(*file);
    if (!f) throw std::runtime_error("cannot open config " + file->string());
    auto j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw std::runtime_error(file->string() + ": not a JSON object");
    if (j.contains("listen")) std::tie(cfg.host, cfg.port) = parse_listen(j.at("listen").get<std::string>());
    if (j.contains("storage_dir")) cfg.storage_dir = j.at("storage_dir").get<std::string>();
    if (j.contains("tariff")) tariff_json = j.at("tariff");
  }
  if (const char* v = env("WEM_LISTEN")) std::tie(cfg.host, cfg.port) = parse_listen(v);
  if (const char* v = env("WEM_STORAGE_DIR")) cfg.storage_dir = std::string(v);
  if (const char* v = env("WEM_NORMAL_RATE")) tariff_json["normal_rate"] = std::string(v);
  if (const char* v = env("WEM_PEAK_RATE")) tariff_json["peak_rate"] = std::string(v);
  if (const char* v = env("WEM_FIXED_CHARGE")) tariff_json["fixed_charge"] = std::string(v);
  auto parsed = tariff_from_json(tariff_json, cfg.tariff);
  if (auto* err = std::get_if<std::string>(&parsed)) throw std::runtime_error("tariff: " + *err);
  cfg.tariff = std::get<TariffSchedule>(parsed);
  return cfg;
}

class ApiServer {
 public:
  explicit ApiServer(std::shared_ptr<BaseStation> station, LiveSimulation* live = nullptr)
      : station_(std::move(station)), live_(live) {
    routes();
  }

  ~ApiServer() { stop(); }

  int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() {
    if (server_.is_running()) server_.stop();
  }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    reply(res, status, {{"error", code}, {"message", message}});
  }

  static void not_found(httplib::Response& res) { error(res, 404, "NOT_FOUND", "invalid entry"); }

  static std::optional<std::int64_t> int_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    const auto s = req.get_param_value(name);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument(std::string(name) + " must be an integer");
    return v;
  }

  void routes() {
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::invalid_argument& e) {
        error(res, 400, "BAD_REQUEST", e.what());
      } catch (const nlohmann::json::exception& e) {
        error(res, 400, "BAD_REQUEST", e.what());
      } catch (const std::exception& e) {
        error(res, 500, "INTERNAL", e.what());
      }
    });

    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}});
    });

    server_.Post("/telegrams", [this](const httplib::Request& req, httplib::Response& res) {
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("body") || !j.at("body").is_string() ||
          !j.contains("received_at_s") || !j.at("received_at_s").is_number_integer())
        return error(res, 400, "BAD_REQUEST", "expected {from_number, body, received_at_s}");
      SmsMessage sms{j.value("from_number", std::string{}), "", j.at("body").get<std::string>(), 0};
      const auto at = j.at("received_at_s").get<std::int64_t>();
      const auto outcome = station_->ingest(sms, at);
      if (!outcome.accepted()) {
        const auto& d = *outcome.rejection;
        return reply(res, 422, {{"error", to_string(d.reason)}, {"category", to_string(d.reason)}, {"message", d.detail}});
      }
      reply(res, 202,
            {{"status", outcome.status == IngestOutcome::Status::stored ? "stored" : "duplicate"},
             {"record", *outcome.record}});
    });

    server_.Get("/meters", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, station_->meters());
    });

    server_.Post("/meters", [this](const httplib::Request& req, httplib::Response& res) {
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("meter_id") || !j.at("meter_id").is_string())
        return error(res, 400, "BAD_REQUEST", "expected {meter_id, dest_number}");
      MeterEntry entry{j.at("meter_id").get<std::string>(), j.value("dest_number", std::string{})};
      if (auto err = station_->register_meter(entry)) {
        if (*err == RegisterError::duplicate) return error(res, 409, "DUPLICATE", "meter already registered");
        return error(res, 400, "BAD_REQUEST", "meter_id must be 1-8 digits, dest_number digits");
      }
      reply(res, 201, entry);
    });

    server_.Get(R"(/meters/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto m = station_->lookup(req.matches[1].str());
      if (!m) return not_found(res);
      nlohmann::json body = *m;
      if (auto last = station_->latest(m->meter_id)) body["latest"] = *last;
      reply(res, 200, body);
    });

    server_.Get(R"(/meters/(\d+)/readings)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto from = int_param(req, "from").value_or(std::numeric_limits<std::int64_t>::min());
      const auto to = int_param(req, "to").value_or(std::numeric_limits<std::int64_t>::max());
      auto rows = station_->readings(req.matches[1].str(), from, to);
      if (!rows) return not_found(res);
      reply(res, 200, *rows);
    });

    server_.Get(R"(/meters/(\d+)/bill)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto from = int_param(req, "from").value_or(std::numeric_limits<std::int64_t>::min());
      const auto to = int_param(req, "to").value_or(std::numeric_limits<std::int64_t>::max());
      bool with_extra = true;
      if (req.has_param("with_extra")) {
        const auto v = req.get_param_value("with_extra");
        if (v != "true" && v != "false") return error(res, 400, "BAD_REQUEST", "with_extra must be true or false");
        with_extra = v == "true";
      }
      auto result = station_->compute_bill(req.matches[1].str(), from, to);
      if (auto* e = std::get_if<BillError>(&result)) {
        if (*e == BillError::unknown_meter) return not_found(res);
        return error(res, 422, to_string(*e), *e == BillError::no_readings ? "no readings in period" : "to < from");
      }
      const auto& bill = std::get<Bill>(result);
      nlohmann::json body = bill;
      body["with_extra"] = with_extra;
      body["amount"] = format_hundredths(with_extra ? bill.amount_total : bill.amount_without_extra);
      reply(res, 200, body);
    });

    server_.Get("/tariff", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, station_->tariff());
    });

    server_.Put("/tariff", [this](const httplib::Request& req, httplib::Response& res) {
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded()) return error(res, 400, "BAD_REQUEST", "body is not JSON");
      auto parsed = tariff_from_json(j, station_->tariff());
      if (auto* err = std::get_if<std::string>(&parsed)) return error(res, 422, "INVALID_TARIFF", *err);
      if (auto err = station_->set_tariff(std::get<TariffSchedule>(parsed)))
        return error(res, 422, "INVALID_TARIFF", *err);
      reply(res, 200, station_->tariff());
    });

    if (!live_) return;

    server_.Get(R"(/sim/meters/(\d+)/panel)", [this](const httplib::Request& req, httplib::Response& res) {
      auto p = live_->panel(req.matches[1].str());
      if (!p) return not_found(res);
      reply(res, 200, to_json(*p));
    });

    server_.Post(R"(/sim/meters/(\d+)/keys)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      if (!live_->has_meter(id)) return not_found(res);
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      std::vector<std::string> names;
      if (!j.is_discarded() && j.is_object() && j.contains("key") && j.at("key").is_string())
        names.push_back(j.at("key").get<std::string>());
      else if (!j.is_discarded() && j.is_object() && j.contains("keys") && j.at("keys").is_array())
        names = j.at("keys").get<std::vector<std::string>>();
      else
        return error(res, 400, "BAD_REQUEST", "expected {\"key\": k} or {\"keys\": [...]}");
      std::vector<Key> keys;
      for (const auto& n : names) {
        auto k = parse_key(n);
        if (!k) return error(res, 400, "BAD_REQUEST", "unknown key " + n);
        keys.push_back(*k);
      }
      for (auto k : keys) live_->queue_key(id, k);
      reply(res, 202, {{"queued", keys.size()}});
    });

    server_.Post(R"(/sim/meters/(\d+)/load)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      if (!live_->has_meter(id)) return not_found(res);
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("power_w"))
        return error(res, 400, "BAD_REQUEST", "expected {\"power_w\": watts or null}");
      std::optional<std::int64_t> power;
      if (!j.at("power_w").is_null()) {
        if (!j.at("power_w").is_number_integer() || j.at("power_w").get<std::int64_t>() < 0)
          return error(res, 400, "BAD_REQUEST", "power_w must be a non-negative integer");
        power = j.at("power_w").get<std::int64_t>();
      }
      live_->set_load(id, power);
      reply(res, 202, {{"power_w", power ? nlohmann::json(*power) : nlohmann::json()}});
    });
  }

  std::shared_ptr<BaseStation> station_;
  LiveSimulation* live_;
  httplib::Server server_;
};

}  // namespace wem
