#pragma once

// Meter controller: boot, hourly reporting, peak accounting, 16x2 LCD and
// the password-gated keypad menu.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "wem/metering.hpp"
#include "wem/modem.hpp"
#include "wem/nv_store.hpp"
#include "wem/rtc.hpp"
#include "wem/telegram.hpp"

namespace wem {

inline constexpr int kLcdCols = 16;
inline constexpr int kLcdRows = 2;

struct MeterConfig {
  std::string meter_id = "1";
  std::string password = "1234";
  std::string dest_number = "919000000000";
  std::int64_t load_limit_w = 500;
  PeakWindow peak_window;

  PeakPolicy peak_policy() const { return {peak_window, load_limit_w}; }

  std::vector<std::string> validate() const {
    std::vector<std::string> problems;
    if (!all_digits(meter_id) || meter_id.size() > 8) problems.push_back("meter_id must be 1-8 digits");
    if (!all_digits(password) || password.size() != 4) problems.push_back("password must be exactly 4 digits");
    if (!all_digits(dest_number) || dest_number.size() < 10 || dest_number.size() > 12)
      problems.push_back("dest_number must be 10-12 digits");
    if (load_limit_w < 0) problems.push_back("load_limit_w must be >= 0");
    if (!peak_window.valid()) problems.push_back("peak window bounds out of range");
    return problems;
  }

  bool operator==(const MeterConfig&) const = default;
};

inline std::string serialize_config(const MeterConfig& c) {
  nlohmann::json j = {
      {"id", c.meter_id},
      {"pw", c.password},
      {"dest", c.dest_number},
      {"limit", c.load_limit_w},
      {"win", {c.peak_window.unit == WindowUnit::minute_of_hour ? "minute" : "hour",
               c.peak_window.first, c.peak_window.last}},
  };
  return j.dump();
}

inline std::optional<MeterConfig> parse_config(std::string_view digest) {
  auto j = nlohmann::json::parse(digest, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    MeterConfig c;
    c.meter_id = j.at("id").get<std::string>();
    c.password = j.at("pw").get<std::string>();
    c.dest_number = j.at("dest").get<std::string>();
    c.load_limit_w = j.at("limit").get<std::int64_t>();
    const auto& w = j.at("win");
    c.peak_window.unit = w.at(0).get<std::string>() == "hour" ? WindowUnit::hour_of_day
                                                              : WindowUnit::minute_of_hour;
    c.peak_window.first = w.at(1).get<int>();
    c.peak_window.last = w.at(2).get<int>();
    if (!c.validate().empty()) return std::nullopt;
    return c;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

/// When the meter reports. The demo profile compresses a billing cycle into an
/// hour: report at minute 2 of every hour. The production profile reports on
/// a fixed day of every second month.
struct ClockProfile {
  enum class Kind { demo, production };
  Kind kind = Kind::demo;
  int report_minute = 2;
  int report_day = 2;

  // Identifies the reporting period containing `t`; one report per period.
  std::int64_t period_mark(const RtcRegisterFile& rtc) const {
    if (kind == Kind::demo) return rtc.seconds_since_2000() / 3600;
    const auto t = rtc.time();
    return (static_cast<std::int64_t>(t.year) * 12 + (t.month - 1)) / 2;
  }

  bool is_report_slot(const RtcTime& t) const {
    if (kind == Kind::demo) return t.minute == report_minute;
    return t.date == report_day;
  }
};

enum class Key { d0, d1, d2, d3, d4, d5, d6, d7, d8, d9, star, hash, up, down, enter };

inline std::optional<Key> parse_key(std::string_view s) {
  if (s.size() == 1 && s[0] >= '0' && s[0] <= '9') return static_cast<Key>(s[0] - '0');
  if (s == "*") return Key::star;
  if (s == "#") return Key::hash;
  if (s == "UP") return Key::up;
  if (s == "DOWN") return Key::down;
  if (s == "ENTER") return Key::enter;
  return std::nullopt;
}

inline std::optional<char> key_digit(Key k) {
  if (k <= Key::d9) return static_cast<char>('0' + static_cast<int>(k));
  return std::nullopt;
}

enum class Mode { run, password_entry, menu, edit_field };

enum class MenuItem { id, fixed_unit_value, mobile_number, exit };
inline constexpr int kMenuItems = 4;

inline std::string_view menu_label(MenuItem item) {
  switch (item) {
    case MenuItem::id: return "ID";
    case MenuItem::fixed_unit_value: return "Fixed unit value";
    case MenuItem::mobile_number: return "Mobile Number";
    case MenuItem::exit: return "Exit";
  }
  return "";
}

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::run: return "RUN";
    case Mode::password_entry: return "PASSWORD_ENTRY";
    case Mode::menu: return "MENU";
    case Mode::edit_field: return "EDIT_FIELD";
  }
  return "?";
}

/// 2 rows x 16 columns of printable ASCII.
struct LcdGrid {
  std::array<std::string, kLcdRows> rows{std::string(kLcdCols, ' '), std::string(kLcdCols, ' ')};

  static std::string fit(std::string_view text) {
    std::string row(kLcdCols, ' ');
    for (std::size_t i = 0; i < text.size() && i < static_cast<std::size_t>(kLcdCols); ++i) {
      const char c = text[i];
      row[i] = (c >= 0x20 && c <= 0x7E) ? c : '?';
    }
    return row;
  }

  bool operator==(const LcdGrid&) const = default;
};

struct FirmwareAction {
  enum class Kind { send_telegram, commit_nv, lcd_update };
  Kind kind;
  std::optional<Telegram> telegram;
};

using Actions = std::vector<FirmwareAction>;

inline bool has_action(const Actions& actions, FirmwareAction::Kind kind) {
  for (const auto& a : actions)
    if (a.kind == kind) return true;
  return false;
}

struct FirmwareState {
  Mode mode = Mode::run;
  MenuItem menu_item = MenuItem::id;
  MeterConfig config;
  EnergyRegister reg;
  LcdGrid lcd;
  std::optional<std::int64_t> last_report_mark;
  std::string input_buffer;
  std::string notice;  // transient first-row message ("WRONG PASSWORD", ...)
  bool authenticated = false;

  bool operator==(const FirmwareState&) const = default;
};

class Firmware {
 public:
  /// Power-on: set the RTC to minute 1 (seconds 0, oscillator running, 24h
  /// mode), restore reading and config from NV memory, enter RUN.
  static Firmware boot(const MeterConfig& factory_config, RtcRegisterFile& rtc,
                       const NvStore& nv, ClockProfile profile = {}) {
    const int hour = rtc.time().hour;
    rtc.write_byte(rtc_reg::hours, bcd_encode(hour));
    rtc.write_byte(rtc_reg::minutes, bcd_encode(1));
    rtc.write_byte(rtc_reg::seconds, 0x00);

    Firmware fw;
    fw.profile_ = profile;
    fw.state_.config = factory_config;
    const auto record = nv.recover();
    if (!record.config_digest.empty()) {
      if (auto restored = parse_config(record.config_digest)) fw.state_.config = *restored;
    }
    fw.state_.reg.ncu_pulses = static_cast<std::int64_t>(record.ncu_pulses);
    fw.state_.reg.ecu_pulses = static_cast<std::int64_t>(record.ecu_pulses);
    fw.refresh_lcd();
    return fw;
  }

  /// Meters `dt_s` seconds of constant load observed at clock time `at`.
  Actions on_energy(std::int64_t power_w, std::int64_t dt_s, const RtcTime& at) {
    const auto& window = state_.config.peak_window;
    const int position = window.unit == WindowUnit::minute_of_hour ? at.minute : at.hour;
    const auto cls = classify(state_.config.peak_policy(), position, power_w);
    const auto before = state_.reg.total_pulses();
    state_.reg = accumulate(state_.reg, joules_for_interval({0, power_w, 1}, dt_s), cls);
    if (state_.reg.total_pulses() == before) return {};
    refresh_lcd();
    return {{FirmwareAction::Kind::commit_nv, {}}, {FirmwareAction::Kind::lcd_update, {}}};
  }

  /// Called once per minute boundary with the RTC already at the new minute.
  Actions on_minute(const RtcRegisterFile& rtc) {
    Actions actions;
    const auto now = rtc.time();
    const auto mark = profile_.period_mark(rtc);
    if (profile_.is_report_slot(now) && state_.last_report_mark != mark) {
      state_.last_report_mark = mark;
      actions.push_back({FirmwareAction::Kind::send_telegram, telegram()});
    }
    refresh_lcd();
    actions.push_back({FirmwareAction::Kind::lcd_update, {}});
    return actions;
  }

  Actions on_key(Key key) {
    Actions actions;
    auto& s = state_;
    const auto digit = key_digit(key);
    switch (s.mode) {
      case Mode::run:
        if (key == Key::hash) {
          s.mode = Mode::password_entry;
          s.input_buffer.clear();
          s.notice.clear();
          s.authenticated = false;
        }
        break;

      case Mode::password_entry:
        if (digit) {
          if (s.input_buffer.size() < 4) s.input_buffer += *digit;
        } else if (key == Key::enter) {
          if (s.input_buffer == s.config.password) {
            s.mode = Mode::menu;
            s.menu_item = MenuItem::id;
            s.authenticated = true;
            s.notice.clear();
          } else {
            s.notice = "WRONG PASSWORD";
          }
          s.input_buffer.clear();
        } else if (key == Key::star) {
          leave_to_run();
        }
        break;

      case Mode::menu:
        if (key == Key::up || key == Key::down) {
          const int step = key == Key::down ? 1 : kMenuItems - 1;
          s.menu_item = static_cast<MenuItem>((static_cast<int>(s.menu_item) + step) % kMenuItems);
        } else if (key == Key::enter) {
          if (s.menu_item == MenuItem::exit) {
            leave_to_run();
          } else {
            s.mode = Mode::edit_field;
            s.input_buffer.clear();
            s.notice.clear();
          }
        } else if (key == Key::star) {
          leave_to_run();
        }
        break;

      case Mode::edit_field:
        if (digit) {
          if (s.input_buffer.size() < max_edit_length(s.menu_item)) s.input_buffer += *digit;
        } else if (key == Key::enter) {
          if (s.authenticated && apply_edit()) {
            s.mode = Mode::menu;
            s.notice.clear();
            actions.push_back({FirmwareAction::Kind::commit_nv, {}});
          } else {
            s.notice = "INVALID ENTRY";
          }
          s.input_buffer.clear();
        } else if (key == Key::star) {
          s.mode = Mode::menu;
          s.input_buffer.clear();
          s.notice.clear();
        }
        break;
    }
    refresh_lcd();
    actions.push_back({FirmwareAction::Kind::lcd_update, {}});
    return actions;
  }

  LcdGrid render_lcd() const {
    const auto& s = state_;
    LcdGrid g;
    switch (s.mode) {
      case Mode::run:
        g.rows[0] = LcdGrid::fit("ID:" + s.config.meter_id);
        g.rows[1] = LcdGrid::fit("TOT:" + units_display(s.reg.total_pulses()) +
                                 " EX:" + units_display(s.reg.ecu_pulses));
        break;
      case Mode::password_entry:
        g.rows[0] = LcdGrid::fit(s.notice.empty() ? "ENTER PASSWORD" : s.notice);
        g.rows[1] = LcdGrid::fit(std::string(s.input_buffer.size(), '*'));
        break;
      case Mode::menu: {
        const char letter = static_cast<char>('a' + static_cast<int>(s.menu_item));
        g.rows[0] = LcdGrid::fit(std::string("MENU (") + letter + ")");
        g.rows[1] = LcdGrid::fit(menu_label(s.menu_item));
        break;
      }
      case Mode::edit_field:
        g.rows[0] = LcdGrid::fit(s.notice.empty() ? std::string(menu_label(s.menu_item)) : s.notice);
        g.rows[1] = LcdGrid::fit(s.input_buffer);
        break;
    }
    return g;
  }

  /// Telegram for the current reading: NCU is total minus extra, ECU is extra.
  Telegram telegram() const {
    return {state_.config.meter_id, units_display(state_.reg.ncu_pulses),
            units_display(state_.reg.ecu_pulses)};
  }

  std::string config_digest() const { return serialize_config(state_.config); }

  /// Writes the current reading and config as one NV record.
  std::uint64_t commit(NvStore& nv) const {
    return nv.commit(static_cast<std::uint64_t>(state_.reg.ncu_pulses),
                     static_cast<std::uint64_t>(state_.reg.ecu_pulses), config_digest());
  }

  const FirmwareState& state() const { return state_; }
  const LcdGrid& lcd() const { return state_.lcd; }
  const ClockProfile& profile() const { return profile_; }

 private:
  Firmware() = default;

  static std::size_t max_edit_length(MenuItem item) {
    switch (item) {
      case MenuItem::id: return 8;
      case MenuItem::fixed_unit_value: return 6;
      case MenuItem::mobile_number: return 12;
      case MenuItem::exit: return 0;
    }
    return 0;
  }

  bool apply_edit() {
    auto& s = state_;
    const auto& text = s.input_buffer;
    if (text.empty()) return false;
    switch (s.menu_item) {
      case MenuItem::id:
        if (text.size() > 8) return false;
        s.config.meter_id = text;
        return true;
      case MenuItem::fixed_unit_value:
        if (text.size() > 6) return false;
        s.config.load_limit_w = std::stoll(text);
        return true;
      case MenuItem::mobile_number:
        if (text.size() < 10 || text.size() > 12) return false;
        s.config.dest_number = text;
        return true;
      case MenuItem::exit: return false;
    }
    return false;
  }

  void leave_to_run() {
    state_.mode = Mode::run;
    state_.input_buffer.clear();
    state_.notice.clear();
    state_.authenticated = false;
  }

  void refresh_lcd() { state_.lcd = render_lcd(); }

  FirmwareState state_;
  ClockProfile profile_;
};

/// Outcome of driving the modem through one reporting session.
struct ModemSession {
  bool ok = false;
  std::string transcript;  // bytes sent and received, in order
  std::string failed_step;
  std::vector<SmsMessage> submitted;
};

/// The four-step send: AT, ATE0, AT+CMGF=1, then AT+CMGS="<dest>" and the
/// body once the '>' prompt arrives, terminated by Ctrl-Z. Each step must be
/// answered with OK (or the prompt) before the next is sent.
inline ModemSession send_sms(AtModem& modem, std::string_view dest, std::string_view body,
                             std::int64_t now_s) {
  ModemSession session;
  struct Step {
    std::string tx;
    std::string_view expect;
  };
  const std::string crlf = "\r\n";
  const std::vector<Step> steps = {
      {"AT" + crlf, at::ok},
      {"ATE0" + crlf, at::ok},
      {"AT+CMGF=1" + crlf, at::ok},
      {"AT+CMGS=\"" + std::string(dest) + "\"" + crlf, at::prompt},
      {std::string(body) + kCtrlZ, at::ok},
  };
  for (const auto& step : steps) {
    auto result = modem.feed(step.tx, now_s);
    session.transcript += step.tx;
    session.transcript += result.response;
    for (auto& m : result.submitted) session.submitted.push_back(std::move(m));
    if (!result.response.ends_with(step.expect)) {
      session.failed_step = step.tx;
      if (modem.session().state == AtState::await_body) modem.feed(std::string(1, kEsc), now_s);
      return session;
    }
  }
  session.ok = true;
  return session;
}

}  // namespace wem
