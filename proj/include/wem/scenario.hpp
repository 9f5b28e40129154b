#pragma once

// Scenario files: JSON documents describing a meter fleet, load profiles,
// the SMS channel and the clock profile. See docs/scenario-format.md.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "wem/base_station.hpp"
#include "wem/firmware.hpp"
#include "wem/metering.hpp"
#include "wem/modem.hpp"
#include "wem/rtc.hpp"

namespace wem {

struct MeterScenario {
  MeterConfig config;
  std::string sim_number;  // the meter modem's own number (SMS sender)
  std::vector<LoadSample> profile;
  std::vector<std::int64_t> reboots_at_s;
};

struct ScenarioSpec {
  std::vector<MeterScenario> meters;
  ChannelConfig channel;
  std::int64_t duration_s = 0;
  ClockProfile clock;
  std::uint64_t seed = 0;
  RtcTime start_time{2024, 1, 1, 0, 0, 0, 1};
  TariffSchedule tariff;
  std::size_t nv_max_records = NvStore::kDefaultMaxRecords;
};

/// Thrown with every validation problem found, not just the first.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid scenario:";
    for (const auto& s : p) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

inline std::string default_sim_number(const std::string& meter_id) {
  std::string padded = meter_id.size() < 10 ? std::string(10 - meter_id.size(), '0') + meter_id : meter_id;
  return "91" + padded;
}

inline PeakWindow default_peak_window(ClockProfile::Kind kind) {
  if (kind == ClockProfile::Kind::demo) return {WindowUnit::minute_of_hour, 5, 8};
  return {WindowUnit::hour_of_day, 18, 21};
}

inline std::vector<std::string> validate(const ScenarioSpec& spec) {
  std::vector<std::string> problems;
  if (spec.duration_s <= 0) problems.push_back("duration_s must be > 0");
  if (spec.channel.latency_s < 0) problems.push_back("channel.latency_s must be >= 0");
  if (!spec.channel.drop_probability.valid()) problems.push_back("channel.drop_probability must be in [0,1]");
  if (auto t = spec.tariff.validate(); !t.empty()) problems.push_back("tariff: " + t.front());
  if (spec.clock.report_minute < 0 || spec.clock.report_minute > 59)
    problems.push_back("clock.report_minute must be 0-59");
  if (spec.clock.report_day < 1 || spec.clock.report_day > 28)
    problems.push_back("clock.report_day must be 1-28");

  std::map<std::string, std::vector<std::size_t>> seen;
  std::map<std::string, std::vector<std::size_t>> numbers;
  for (std::size_t i = 0; i < spec.meters.size(); ++i) {
    const auto& m = spec.meters[i];
    const auto at = "meters[" + std::to_string(i) + "] (id " + m.config.meter_id + "): ";
    for (const auto& p : m.config.validate()) problems.push_back(at + p);
    if (!all_digits(m.sim_number)) problems.push_back(at + "sim_number must be digits");
    for (const auto& p : LoadProfile::validate(m.profile)) problems.push_back(at + p);
    const auto expected_unit = default_peak_window(spec.clock.kind).unit;
    if (m.config.peak_window.unit != expected_unit)
      problems.push_back(at + "peak window unit does not match the clock profile");
    for (auto r : m.reboots_at_s)
      if (r <= 0 || r >= spec.duration_s) problems.push_back(at + "reboot time outside (0, duration_s)");
    seen[m.config.meter_id].push_back(i);
    numbers[m.sim_number].push_back(i);
  }
  auto report_duplicates = [&](const auto& index, const std::string& what) {
    for (const auto& [key, where] : index) {
      if (where.size() < 2) continue;
      std::string msg = "duplicate " + what + " " + key + " at";
      for (auto w : where) msg += " meters[" + std::to_string(w) + "]";
      problems.push_back(msg);
    }
  };
  report_duplicates(seen, "meter id");
  report_duplicates(numbers, "sim_number");
  return problems;
}

namespace scenario_detail {

inline Probability parse_probability(const nlohmann::json& j) {
  if (j.is_number()) return Probability::from_double(j.get<double>());
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
      Probability p;
      auto a = std::from_chars(s.data(), s.data() + slash, p.numerator);
      auto b = std::from_chars(s.data() + slash + 1, s.data() + s.size(), p.denominator);
      if (a.ec != std::errc{} || b.ec != std::errc{} || a.ptr != s.data() + slash ||
          b.ptr != s.data() + s.size())
        throw std::invalid_argument("drop_probability: expected \"num/den\"");
      return p;
    }
    return Probability::from_double(std::stod(s));
  }
  throw std::invalid_argument("drop_probability must be a number or \"num/den\"");
}

inline RtcTime parse_start_time(const std::string& s) {
  // YYYY-MM-DDTHH:MM:SS
  RtcTime t;
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':')
    throw std::invalid_argument("start_time must be YYYY-MM-DDTHH:MM:SS");
  auto num = [&](int pos, int len) { return std::stoi(s.substr(pos, len)); };
  t.year = num(0, 4);
  t.month = num(5, 2);
  t.date = num(8, 2);
  t.hour = num(11, 2);
  t.minute = num(14, 2);
  t.second = num(17, 2);
  return t;
}

inline PeakWindow parse_window(const nlohmann::json& j, PeakWindow base) {
  if (j.is_array()) {
    base.first = j.at(0).get<int>();
    base.last = j.at(1).get<int>();
    return base;
  }
  if (j.contains("unit")) {
    const auto u = j.at("unit").get<std::string>();
    if (u == "minute") base.unit = WindowUnit::minute_of_hour;
    else if (u == "hour") base.unit = WindowUnit::hour_of_day;
    else throw std::invalid_argument("peak_window.unit must be \"minute\" or \"hour\"");
  }
  base.first = j.value("first", base.first);
  base.last = j.value("last", base.last);
  return base;
}

}  // namespace scenario_detail

/// Builds a spec from JSON and validates it. Structural errors (wrong types)
/// and semantic problems are all reported through ScenarioError.
inline ScenarioSpec parse_scenario(const nlohmann::json& j) {
  using namespace scenario_detail;
  ScenarioSpec spec;
  std::vector<std::string> problems;
  auto guard = [&](const std::string& where, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(where + ": " + e.what());
    }
  };

  if (!j.is_object()) throw ScenarioError({"scenario must be a JSON object"});

  guard("duration_s", [&] { spec.duration_s = j.at("duration_s").get<std::int64_t>(); });
  guard("seed", [&] { spec.seed = j.value("seed", std::uint64_t{0}); });
  guard("start_time", [&] {
    if (j.contains("start_time")) spec.start_time = parse_start_time(j.at("start_time").get<std::string>());
  });
  guard("clock_profile", [&] {
    if (!j.contains("clock_profile")) return;
    const auto& c = j.at("clock_profile");
    const auto kind = c.value("kind", std::string("demo"));
    if (kind == "demo") spec.clock.kind = ClockProfile::Kind::demo;
    else if (kind == "production") spec.clock.kind = ClockProfile::Kind::production;
    else throw std::invalid_argument("kind must be \"demo\" or \"production\"");
    spec.clock.report_minute = c.value("report_minute", spec.clock.report_minute);
    spec.clock.report_day = c.value("report_day", spec.clock.report_day);
  });
  spec.channel.seed = spec.seed;
  guard("channel", [&] {
    if (!j.contains("channel")) return;
    const auto& c = j.at("channel");
    spec.channel.latency_s = c.value("latency_s", std::int64_t{0});
    if (c.contains("drop_probability")) spec.channel.drop_probability = parse_probability(c.at("drop_probability"));
    spec.channel.seed = c.value("seed", spec.seed);
  });
  guard("tariff", [&] {
    if (!j.contains("tariff")) return;
    auto parsed = tariff_from_json(j.at("tariff"));
    if (auto* err = std::get_if<std::string>(&parsed)) throw std::invalid_argument(*err);
    spec.tariff = std::get<TariffSchedule>(parsed);
  });
  guard("nv_max_records", [&] { spec.nv_max_records = j.value("nv_max_records", spec.nv_max_records); });

  const auto default_dest = j.value("base_station_number", std::string("919000000000"));
  PeakWindow default_window = default_peak_window(spec.clock.kind);
  guard("peak_window", [&] {
    if (j.contains("peak_window")) default_window = parse_window(j.at("peak_window"), default_window);
  });

  if (!j.contains("meters") || !j.at("meters").is_array()) {
    problems.push_back("meters: expected an array");
  } else {
    std::size_t i = 0;
    for (const auto& m : j.at("meters")) {
      const auto where = "meters[" + std::to_string(i++) + "]";
      guard(where, [&] {
        MeterScenario ms;
        ms.config.meter_id = m.at("meter_id").get<std::string>();
        ms.config.password = m.value("password", std::string("1234"));
        ms.config.dest_number = m.value("dest_number", default_dest);
        ms.config.load_limit_w = m.value("load_limit_w", std::int64_t{500});
        ms.config.peak_window =
            m.contains("peak_window") ? parse_window(m.at("peak_window"), default_window) : default_window;
        ms.sim_number = m.value("sim_number", default_sim_number(ms.config.meter_id));
        if (m.contains("profile")) {
          for (const auto& s : m.at("profile")) {
            ms.profile.push_back({s.at("start_s").get<std::int64_t>(), s.at("power_w").get<std::int64_t>(),
                                  s.value("voltage_v", std::int64_t{230})});
          }
        }
        if (m.contains("reboots_at_s")) ms.reboots_at_s = m.at("reboots_at_s").get<std::vector<std::int64_t>>();
        spec.meters.push_back(std::move(ms));
      });
    }
  }

  for (auto& p : validate(spec)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ScenarioError(std::move(problems));
  return spec;
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError({"cannot open " + path.string()});
  auto j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ScenarioError({path.string() + ": not valid JSON"});
  return parse_scenario(j);
}

}  // namespace wem
