#pragma once

// DS1307 register-file emulation. The I2C transaction layer is not modeled;
// firmware reads and writes registers by address.
//
//   0x00 seconds (bit 7 = CH, clock halt)   0x04 date    1-31
//   0x01 minutes                            0x05 month   1-12
//   0x02 hours (bit 6 = 12h mode, bit 5 PM) 0x06 year    00-99 (2000-2099)
//   0x03 day of week 1-7                    0x07 control
//   0x08-0x3F battery-backed RAM (56 bytes)

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace wem {

inline constexpr std::uint8_t kRtcSize = 0x40;
inline constexpr std::uint8_t kRtcNvramStart = 0x08;

namespace rtc_reg {
inline constexpr std::uint8_t seconds = 0x00;
inline constexpr std::uint8_t minutes = 0x01;
inline constexpr std::uint8_t hours = 0x02;
inline constexpr std::uint8_t day = 0x03;
inline constexpr std::uint8_t date = 0x04;
inline constexpr std::uint8_t month = 0x05;
inline constexpr std::uint8_t year = 0x06;
inline constexpr std::uint8_t control = 0x07;

inline constexpr std::uint8_t clock_halt = 0x80;
inline constexpr std::uint8_t mode_12h = 0x40;
inline constexpr std::uint8_t pm = 0x20;
}  // namespace rtc_reg

inline std::uint8_t bcd_encode(int n) {
  if (n < 0 || n > 99) throw std::invalid_argument("bcd_encode: value out of range 0-99");
  return static_cast<std::uint8_t>(((n / 10) << 4) | (n % 10));
}

inline int bcd_decode(std::uint8_t b) {
  const int hi = b >> 4;
  const int lo = b & 0x0F;
  if (hi > 9 || lo > 9) throw std::invalid_argument("bcd_decode: nibble above 9");
  return hi * 10 + lo;
}

/// Broken-down calendar time as the RTC presents it.
struct RtcTime {
  int year = 2000;  // 2000-2099
  int month = 1;
  int date = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;
  int day_of_week = 1;  // 1-7, user-defined origin

  bool operator==(const RtcTime&) const = default;
};

namespace detail {

// Days since 2000-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468 - 10957;
}

struct Civil {
  int year;
  int month;
  int date;
};

constexpr Civil civil_from_days(std::int64_t z) {
  z += 719468 + 10957;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

// 2000-2099 holds 25 leap years; the chip's year counter wraps 99 -> 00.
inline constexpr std::int64_t kCenturyDays = 36525;
inline constexpr std::int64_t kCenturySeconds = kCenturyDays * 86400;

}  // namespace detail

class RtcRegisterFile {
 public:
  /// Power-on state: 2000-01-01 00:00:00, oscillator running, RAM zeroed.
  RtcRegisterFile() {
    regs_.fill(0);
    regs_[rtc_reg::day] = 0x01;
    regs_[rtc_reg::date] = 0x01;
    regs_[rtc_reg::month] = 0x01;
  }

  std::uint8_t read_byte(int addr) const {
    check_address(addr);
    return regs_[static_cast<std::size_t>(addr)];
  }

  void write_byte(int addr, std::uint8_t value) {
    check_address(addr);
    if (addr < kRtcNvramStart && addr != rtc_reg::control) check_time_field(addr, value);
    regs_[static_cast<std::size_t>(addr)] = value;
  }

  bool halted() const { return (regs_[rtc_reg::seconds] & rtc_reg::clock_halt) != 0; }
  bool twelve_hour_mode() const { return (regs_[rtc_reg::hours] & rtc_reg::mode_12h) != 0; }

  RtcTime time() const {
    RtcTime t;
    t.second = bcd_decode(regs_[rtc_reg::seconds] & 0x7F);
    t.minute = bcd_decode(regs_[rtc_reg::minutes] & 0x7F);
    t.hour = decode_hours(regs_[rtc_reg::hours]);
    t.day_of_week = bcd_decode(regs_[rtc_reg::day] & 0x07);
    t.date = bcd_decode(regs_[rtc_reg::date] & 0x3F);
    t.month = bcd_decode(regs_[rtc_reg::month] & 0x1F);
    t.year = 2000 + bcd_decode(regs_[rtc_reg::year]);
    return t;
  }

  /// Writes all time registers. Keeps the CH bit and the 12/24h mode.
  void set_time(const RtcTime& t) {
    if (t.year < 2000 || t.year > 2099 || t.month < 1 || t.month > 12 || t.date < 1 ||
        t.date > 31 || t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59 ||
        t.second < 0 || t.second > 59 || t.day_of_week < 1 || t.day_of_week > 7)
      throw std::invalid_argument("RtcRegisterFile::set_time: field out of range");
    const std::uint8_t ch = regs_[rtc_reg::seconds] & rtc_reg::clock_halt;
    regs_[rtc_reg::seconds] = static_cast<std::uint8_t>(ch | bcd_encode(t.second));
    regs_[rtc_reg::minutes] = bcd_encode(t.minute);
    regs_[rtc_reg::hours] = encode_hours(t.hour, twelve_hour_mode());
    regs_[rtc_reg::day] = bcd_encode(t.day_of_week);
    regs_[rtc_reg::date] = bcd_encode(t.date);
    regs_[rtc_reg::month] = bcd_encode(t.month);
    regs_[rtc_reg::year] = bcd_encode(t.year - 2000);
  }

  /// Seconds since 2000-01-01 00:00:00 of the current register contents.
  std::int64_t seconds_since_2000() const {
    const auto t = time();
    return detail::days_from_civil(t.year, static_cast<unsigned>(t.month),
                                   static_cast<unsigned>(t.date)) *
               86400 +
           t.hour * 3600 + t.minute * 60 + t.second;
  }

  /// Advances the calendar by dt_s seconds. No-op while the clock is halted.
  void tick(std::int64_t dt_s) {
    if (dt_s < 0) throw std::invalid_argument("RtcRegisterFile::tick: negative interval");
    if (halted() || dt_s == 0) return;
    const auto before = time();
    const std::int64_t start = seconds_since_2000();
    const std::int64_t start_day = start / 86400;
    const std::int64_t end = (start + dt_s) % detail::kCenturySeconds;
    const std::int64_t end_day = end / 86400;
    const std::int64_t elapsed_days = (start + dt_s) / 86400 - start_day;

    const auto civil = detail::civil_from_days(end_day);
    RtcTime after;
    after.year = civil.year;
    after.month = civil.month;
    after.date = civil.date;
    const std::int64_t sod = end % 86400;
    after.hour = static_cast<int>(sod / 3600);
    after.minute = static_cast<int>(sod / 60 % 60);
    after.second = static_cast<int>(sod % 60);
    after.day_of_week = static_cast<int>((before.day_of_week - 1 + elapsed_days % 7) % 7) + 1;
    set_time(after);
  }

  std::array<std::uint8_t, kRtcSize> bytes() const { return regs_; }

  bool operator==(const RtcRegisterFile&) const = default;

 private:
  static void check_address(int addr) {
    if (addr < 0 || addr >= kRtcSize)
      throw std::out_of_range("RTC address out of range 0x00-0x3F: " + std::to_string(addr));
  }

  static int decode_hours(std::uint8_t reg) {
    if (reg & rtc_reg::mode_12h) {
      const int h12 = bcd_decode(reg & 0x1F);
      const bool is_pm = (reg & rtc_reg::pm) != 0;
      return (h12 % 12) + (is_pm ? 12 : 0);
    }
    return bcd_decode(reg & 0x3F);
  }

  static std::uint8_t encode_hours(int hour, bool twelve) {
    if (!twelve) return bcd_encode(hour);
    const int h12 = hour % 12 == 0 ? 12 : hour % 12;
    return static_cast<std::uint8_t>(rtc_reg::mode_12h | (hour >= 12 ? rtc_reg::pm : 0) |
                                     bcd_encode(h12));
  }

  // Rejects writes that would leave a time register undecodable.
  static void check_time_field(int addr, std::uint8_t value) {
    auto in_range = [](std::uint8_t bcd, int lo, int hi) {
      const int hi_nib = bcd >> 4;
      const int lo_nib = bcd & 0x0F;
      if (hi_nib > 9 || lo_nib > 9) return false;
      const int v = hi_nib * 10 + lo_nib;
      return v >= lo && v <= hi;
    };
    bool ok = true;
    switch (addr) {
      case rtc_reg::seconds: ok = in_range(value & 0x7F, 0, 59); break;
      case rtc_reg::minutes: ok = (value & 0x80) == 0 && in_range(value, 0, 59); break;
      case rtc_reg::hours:
        ok = (value & rtc_reg::mode_12h) ? (value & 0x80) == 0 && in_range(value & 0x1F, 1, 12)
                                         : (value & 0xC0) == 0 && in_range(value & 0x3F, 0, 23);
        break;
      case rtc_reg::day: ok = in_range(value, 1, 7); break;
      case rtc_reg::date: ok = in_range(value, 1, 31); break;
      case rtc_reg::month: ok = in_range(value, 1, 12); break;
      case rtc_reg::year: ok = in_range(value, 0, 99); break;
      default: break;
    }
    if (!ok) throw std::invalid_argument("RTC write: invalid value for time register");
  }

  std::array<std::uint8_t, kRtcSize> regs_{};
};

}  // namespace wem
