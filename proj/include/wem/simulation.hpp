#pragma once

// Deterministic event loop: meters, SMS channel and base station advanced
// together in 1-second steps.
//
// Per step covering [t, t+1), in this order and for meters in id order:
//   0. queued keypad events, load overrides and scheduled reboots
//   1. RTC tick (the clock position of the elapsed second is kept)
//   2. load sampling, metering and classification
//   3. minute-boundary firmware hook; telegrams go out through the modem
//      (at most one NV commit per meter per step)
//   4. channel delivery at t+1
//   5. base-station ingestion of delivered messages

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "wem/base_station.hpp"
#include "wem/firmware.hpp"
#include "wem/metering.hpp"
#include "wem/modem.hpp"
#include "wem/nv_store.hpp"
#include "wem/rtc.hpp"
#include "wem/scenario.hpp"
#include "wem/telegram.hpp"

namespace wem {

struct SimOptions {
  /// When set, each meter's NV log lives at <dir>/meter_<id>.nvlog.
  std::optional<std::filesystem::path> state_dir;
  /// Keep NV logs found in state_dir instead of starting from empty memory.
  bool resume = false;
  /// Shared head end; a private in-memory one is created when null.
  std::shared_ptr<BaseStation> base_station;
};

struct MeterReport {
  std::string meter_id;
  EnergyRegister reg;
  std::uint64_t telegrams_sent = 0;
  std::uint64_t at_failures = 0;
  std::uint64_t nv_commits = 0;
  std::uint64_t nv_seq = 0;
  std::optional<std::string> last_telegram;
  Telegram final_telegram;
  LcdGrid lcd;
  Mode mode = Mode::run;
};

struct RunReport {
  std::int64_t duration_s = 0;
  std::uint64_t seed = 0;
  std::vector<MeterReport> meters;
  ChannelStats channel;
  std::vector<ReadingRecord> readings;
  std::vector<DeadLetter> rejections;
  std::vector<std::string> events;

  const MeterReport* meter(std::string_view id) const {
    for (const auto& m : meters)
      if (m.meter_id == id) return &m;
    return nullptr;
  }
};

inline nlohmann::json to_report_json(const RunReport& r) {
  nlohmann::json meters = nlohmann::json::array();
  for (const auto& m : r.meters) {
    meters.push_back({
        {"meter_id", m.meter_id},
        {"ncu_pulses", m.reg.ncu_pulses},
        {"ecu_pulses", m.reg.ecu_pulses},
        {"total_pulses", m.reg.total_pulses()},
        {"ncu_display", units_display(m.reg.ncu_pulses)},
        {"ecu_display", units_display(m.reg.ecu_pulses)},
        {"total_display", units_display(m.reg.total_pulses())},
        {"telegrams_sent", m.telegrams_sent},
        {"at_failures", m.at_failures},
        {"nv_commits", m.nv_commits},
        {"nv_seq", m.nv_seq},
        {"last_telegram", m.last_telegram ? nlohmann::json(*m.last_telegram) : nlohmann::json()},
        {"final_telegram", encode(m.final_telegram)},
        {"lcd", {m.lcd.rows[0], m.lcd.rows[1]}},
        {"mode", to_string(m.mode)},
    });
  }
  return {
      {"duration_s", r.duration_s},
      {"seed", r.seed},
      {"meters", meters},
      {"channel",
       {{"submitted", r.channel.submitted},
        {"delivered", r.channel.delivered},
        {"dropped", r.channel.dropped},
        {"in_flight", r.channel.in_flight}}},
      {"base_station", {{"readings", r.readings}, {"rejections", r.rejections}}},
      {"event_count", r.events.size()},
  };
}

/// What the operator console shows for one meter.
struct PanelSnapshot {
  std::string meter_id;
  std::int64_t sim_time_s = 0;
  LcdGrid lcd;
  Mode mode = Mode::run;
  EnergyRegister reg;
  std::int64_t power_w = 0;
  bool load_overridden = false;
};

inline nlohmann::json to_json(const PanelSnapshot& p) {
  return {{"meter_id", p.meter_id},
          {"sim_time_s", p.sim_time_s},
          {"lcd", {p.lcd.rows[0], p.lcd.rows[1]}},
          {"mode", to_string(p.mode)},
          {"power_w", p.power_w},
          {"load_overridden", p.load_overridden},
          {"ncu_pulses", p.reg.ncu_pulses},
          {"ecu_pulses", p.reg.ecu_pulses},
          {"total_display", units_display(p.reg.total_pulses())},
          {"ncu_display", units_display(p.reg.ncu_pulses)},
          {"ecu_display", units_display(p.reg.ecu_pulses)}};
}

class Simulation {
 public:
  explicit Simulation(ScenarioSpec spec, SimOptions options = {})
      : spec_(std::move(spec)), options_(std::move(options)), channel_(spec_.channel) {
    if (auto problems = validate(spec_); !problems.empty()) throw ScenarioError(std::move(problems));
    base_ = options_.base_station ? options_.base_station : std::make_shared<BaseStation>(spec_.tariff);
    if (options_.state_dir) std::filesystem::create_directories(*options_.state_dir);

    std::sort(spec_.meters.begin(), spec_.meters.end(),
              [](const auto& a, const auto& b) { return a.config.meter_id < b.config.meter_id; });
    for (const auto& ms : spec_.meters) {
      auto& m = meters_.emplace_back(make_meter(ms));
      sender_to_meter_[ms.sim_number] = ms.config.meter_id;
      if (!base_->lookup(ms.config.meter_id)) base_->register_meter({ms.config.meter_id, ms.sim_number});
      log(0, m.id, "boot", "total=" + units_display(m.fw->state().reg.total_pulses()) + " minute=1");
    }
  }

  std::int64_t now() const { return now_; }
  bool finished() const { return now_ >= spec_.duration_s; }
  const ScenarioSpec& spec() const { return spec_; }
  BaseStation& base_station() { return *base_; }
  std::shared_ptr<BaseStation> shared_base_station() const { return base_; }
  const std::vector<std::string>& events() const { return events_; }
  const ChannelStats& channel_stats() const { return channel_.stats(); }

  void step() {
    const std::int64_t t = now_;
    for (auto& m : meters_) step_meter(m, t);
    for (auto& msg : channel_.step(t + 1)) ingest(msg, t + 1);
    now_ = t + 1;
  }

  void run_to(std::int64_t t) {
    while (now_ < t) step();
  }

  void run() { run_to(spec_.duration_s); }

  /// Keys are applied at the start of the next step.
  bool queue_key(std::string_view meter_id, Key key) {
    auto* m = find(meter_id);
    if (!m) return false;
    m->pending_keys.push_back(key);
    return true;
  }

  /// Replaces the profile's load from the next step on; nullopt restores it.
  bool set_load_override(std::string_view meter_id, std::optional<std::int64_t> power_w) {
    auto* m = find(meter_id);
    if (!m) return false;
    m->pending_override = power_w;
    m->override_changed = true;
    return true;
  }

  std::optional<PanelSnapshot> panel(std::string_view meter_id) const {
    const auto* m = find(meter_id);
    if (!m) return std::nullopt;
    PanelSnapshot p;
    p.meter_id = m->id;
    p.sim_time_s = now_;
    p.lcd = m->fw->lcd();
    p.mode = m->fw->state().mode;
    p.reg = m->fw->state().reg;
    p.load_overridden = m->load_override.has_value();
    p.power_w = m->load_override ? *m->load_override : m->profile.at(now_).power_w;
    return p;
  }

  std::vector<std::string> meter_ids() const {
    std::vector<std::string> ids;
    for (const auto& m : meters_) ids.push_back(m.id);
    return ids;
  }

  const Firmware* firmware(std::string_view meter_id) const {
    const auto* m = find(meter_id);
    return m ? &*m->fw : nullptr;
  }

  const NvStore* nv_store(std::string_view meter_id) const {
    const auto* m = find(meter_id);
    return m ? &m->nv : nullptr;
  }

  const RtcRegisterFile* rtc(std::string_view meter_id) const {
    const auto* m = find(meter_id);
    return m ? &m->rtc : nullptr;
  }

  RunReport report() const {
    RunReport r;
    r.duration_s = spec_.duration_s;
    r.seed = spec_.seed;
    for (const auto& m : meters_) {
      MeterReport mr;
      mr.meter_id = m.id;
      mr.reg = m.fw->state().reg;
      mr.telegrams_sent = m.telegrams_sent;
      mr.at_failures = m.at_failures;
      mr.nv_commits = m.nv_commits;
      mr.nv_seq = m.nv.recover().seq;
      mr.last_telegram = m.last_telegram;
      mr.final_telegram = m.fw->telegram();
      mr.lcd = m.fw->lcd();
      mr.mode = m.fw->state().mode;
      r.meters.push_back(std::move(mr));
    }
    r.channel = channel_.stats();
    r.readings = base_->all_readings();
    r.rejections = base_->dead_letters();
    r.events = events_;
    return r;
  }

 private:
  struct MeterRuntime {
    MeterRuntime(const MeterScenario& ms, std::size_t nv_max_records)
        : id(ms.config.meter_id), spec(ms), profile(ms.profile), nv({}, nv_max_records), modem(ms.sim_number) {}

    std::string id;
    MeterScenario spec;
    LoadProfile profile;
    RtcRegisterFile rtc;
    NvStore nv;
    std::optional<Firmware> fw;
    AtModem modem;
    std::deque<Key> pending_keys;
    std::optional<std::int64_t> load_override;
    std::optional<std::int64_t> pending_override;
    bool override_changed = false;
    std::uint64_t telegrams_sent = 0;
    std::uint64_t at_failures = 0;
    std::uint64_t nv_commits = 0;
    std::optional<std::string> last_telegram;
  };

  MeterRuntime make_meter(const MeterScenario& ms) {
    MeterRuntime m(ms, spec_.nv_max_records);
    if (options_.state_dir) {
      const auto path = *options_.state_dir / ("meter_" + ms.config.meter_id + ".nvlog");
      if (!options_.resume) std::filesystem::remove(path);
      m.nv = NvStore::open_file(path, spec_.nv_max_records);
    }
    m.rtc.set_time(spec_.start_time);
    m.fw = Firmware::boot(ms.config, m.rtc, m.nv, spec_.clock);
    return m;
  }

  MeterRuntime* find(std::string_view id) {
    for (auto& m : meters_)
      if (m.id == id) return &m;
    return nullptr;
  }
  const MeterRuntime* find(std::string_view id) const {
    for (const auto& m : meters_)
      if (m.id == id) return &m;
    return nullptr;
  }

  void step_meter(MeterRuntime& m, std::int64_t t) {
    bool commit = false;

    // 0. Step-boundary inputs.
    if (std::find(m.spec.reboots_at_s.begin(), m.spec.reboots_at_s.end(), t) != m.spec.reboots_at_s.end()) {
      m.fw = Firmware::boot(m.spec.config, m.rtc, m.nv, spec_.clock);
      m.modem = AtModem(m.spec.sim_number);
      log(t, m.id, "reboot", "restored_seq=" + std::to_string(m.nv.recover().seq) +
                                 " total=" + units_display(m.fw->state().reg.total_pulses()));
    }
    if (m.override_changed) {
      m.load_override = m.pending_override;
      m.override_changed = false;
      log(t, m.id, "load", m.load_override ? std::to_string(*m.load_override) + "W" : "profile");
    }
    while (!m.pending_keys.empty()) {
      const auto actions = m.fw->on_key(m.pending_keys.front());
      m.pending_keys.pop_front();
      commit |= has_action(actions, FirmwareAction::Kind::commit_nv);
    }

    // 1. Clock.
    const RtcTime elapsed_at = m.rtc.time();
    m.rtc.tick(1);

    // 2. Metering.
    const std::int64_t power = m.load_override ? *m.load_override : m.profile.at(t).power_w;
    commit |= has_action(m.fw->on_energy(power, 1, elapsed_at), FirmwareAction::Kind::commit_nv);

    // 3. Minute boundary.
    if (m.rtc.time().second == 0) {
      for (const auto& action : m.fw->on_minute(m.rtc)) {
        if (action.kind == FirmwareAction::Kind::commit_nv) commit = true;
        if (action.kind != FirmwareAction::Kind::send_telegram) continue;
        send(m, *action.telegram, t + 1);
      }
    }
    if (commit) {
      m.fw->commit(m.nv);
      ++m.nv_commits;
    }
  }

  void send(MeterRuntime& m, const Telegram& telegram, std::int64_t at) {
    const auto body = encode(telegram);
    const auto& dest = m.fw->state().config.dest_number;
    auto session = send_sms(m.modem, dest, body, at);
    if (!session.ok) {
      ++m.at_failures;
      log(at, m.id, "at_error", "step=" + printable(session.failed_step));
      return;
    }
    ++m.telegrams_sent;
    m.last_telegram = body;
    log(at, m.id, "telegram", body);
    for (auto& msg : session.submitted) {
      if (!channel_.submit(msg)) log(at, m.id, "sms_dropped", msg.body);
    }
  }

  void ingest(const SmsMessage& msg, std::int64_t at) {
    const auto it = sender_to_meter_.find(msg.from_number);
    const std::string who = it == sender_to_meter_.end() ? "-" : it->second;
    log(at, who, "sms_delivered", msg.body);
    const auto outcome = base_->ingest(msg, at);
    switch (outcome.status) {
      case IngestOutcome::Status::stored: log(at, who, "ingest_stored", msg.body); break;
      case IngestOutcome::Status::duplicate: log(at, who, "ingest_duplicate", msg.body); break;
      case IngestOutcome::Status::rejected:
        log(at, who, "ingest_rejected", std::string(to_string(outcome.rejection->reason)) + ":" + msg.body);
        break;
    }
  }

  static std::string printable(std::string_view s) {
    std::string out;
    for (char c : s) {
      if (c == '\r') out += "\\r";
      else if (c == '\n') out += "\\n";
      else if (c == kCtrlZ) out += "^Z";
      else out += c;
    }
    return out;
  }

  void log(std::int64_t t, const std::string& meter, std::string_view kind, std::string_view detail) {
    std::string line = "t=" + std::to_string(t) + " meter=" + meter + " kind=";
    line += kind;
    line += " detail=";
    line += detail;
    events_.push_back(std::move(line));
  }

  ScenarioSpec spec_;
  SimOptions options_;
  SmsChannel channel_;
  std::shared_ptr<BaseStation> base_;
  std::vector<MeterRuntime> meters_;
  std::map<std::string, std::string> sender_to_meter_;
  std::vector<std::string> events_;
  std::int64_t now_ = 0;
};

/// Runs a scenario to completion.
inline RunReport run(const ScenarioSpec& spec, SimOptions options = {}) {
  Simulation sim(spec, std::move(options));
  sim.run();
  return sim.report();
}

inline std::string format_events(const std::vector<std::string>& events) {
  std::string out;
  for (const auto& e : events) {
    out += e;
    out += '\n';
  }
  return out;
}

}  // namespace wem
