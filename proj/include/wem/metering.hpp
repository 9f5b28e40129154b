#pragma once

// Energy accounting for a single-phase meter: power samples become joules,
// joules become pulses (3200 per kWh), pulses are split into normal and extra
// consumption by the peak-hour policy.

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wem {

inline constexpr std::int64_t kPulsesPerUnit = 3200;
inline constexpr std::int64_t kJoulesPerUnit = 3'600'000;  // 1 kWh
inline constexpr std::int64_t kJoulesPerPulse = kJoulesPerUnit / kPulsesPerUnit;
static_assert(kJoulesPerPulse * kPulsesPerUnit == kJoulesPerUnit);
static_assert(kJoulesPerPulse == 1125);

/// One step of a piecewise-constant load profile. Holds from `start_s` until
/// the next sample's `start_s`.
struct LoadSample {
  std::int64_t start_s = 0;
  std::int64_t power_w = 0;
  std::int64_t voltage_v = 230;

  bool operator==(const LoadSample&) const = default;
};

/// Ground-truth reading of a meter: pulse counters per consumption class plus
/// the sub-pulse joules carried toward the next pulse.
struct EnergyRegister {
  std::int64_t ncu_pulses = 0;
  std::int64_t ecu_pulses = 0;
  std::int64_t ncu_remainder_j = 0;
  std::int64_t ecu_remainder_j = 0;

  std::int64_t total_pulses() const { return ncu_pulses + ecu_pulses; }
  bool operator==(const EnergyRegister&) const = default;
};

enum class ConsumptionClass { normal, extra };

enum class WindowUnit { minute_of_hour, hour_of_day };

inline int window_unit_limit(WindowUnit unit) {
  return unit == WindowUnit::minute_of_hour ? 59 : 23;
}

/// Inclusive range of clock positions. `first > last` wraps around the end of
/// the unit (e.g. hours 22..2).
struct PeakWindow {
  WindowUnit unit = WindowUnit::minute_of_hour;
  int first = 5;
  int last = 8;

  bool valid() const {
    const int hi = window_unit_limit(unit);
    return first >= 0 && first <= hi && last >= 0 && last <= hi;
  }

  bool contains(int position) const {
    if (first <= last) return position >= first && position <= last;
    return position >= first || position <= last;
  }

  bool operator==(const PeakWindow&) const = default;
};

struct PeakPolicy {
  PeakWindow window;
  std::int64_t load_limit_w = 0;

  bool valid() const { return window.valid() && load_limit_w >= 0; }
};

inline std::int64_t joules_for_interval(const LoadSample& sample, std::int64_t dt_s) {
  if (dt_s < 0) throw std::invalid_argument("joules_for_interval: negative interval");
  return sample.power_w * dt_s;
}

/// Extra consumption needs both conditions: the clock is inside the peak
/// window and the instantaneous load is above the permissible limit.
inline ConsumptionClass classify(const PeakPolicy& policy, int clock_position,
                                 std::int64_t power_w) {
  if (clock_position < 0 || clock_position > window_unit_limit(policy.window.unit))
    throw std::invalid_argument("classify: clock position out of range");
  if (policy.window.contains(clock_position) && power_w > policy.load_limit_w)
    return ConsumptionClass::extra;
  return ConsumptionClass::normal;
}

inline EnergyRegister accumulate(EnergyRegister reg, std::int64_t joules,
                                 ConsumptionClass cls) {
  if (joules < 0) throw std::invalid_argument("accumulate: negative energy");
  auto& pulses = cls == ConsumptionClass::extra ? reg.ecu_pulses : reg.ncu_pulses;
  auto& remainder =
      cls == ConsumptionClass::extra ? reg.ecu_remainder_j : reg.ncu_remainder_j;
  const std::int64_t carried = remainder + joules;
  pulses += carried / kJoulesPerPulse;
  remainder = carried % kJoulesPerPulse;
  return reg;
}

/// Units with two fractional digits, floored, at least two integer digits:
/// 0 -> "00.00", 3200 -> "01.00", 320000 -> "100.00".
inline std::string units_display(std::int64_t pulses) {
  if (pulses < 0) throw std::invalid_argument("units_display: negative pulse count");
  const std::int64_t hundredths = pulses * 100 / kPulsesPerUnit;
  std::string whole = std::to_string(hundredths / 100);
  if (whole.size() < 2) whole.insert(0, 2 - whole.size(), '0');
  const auto frac = hundredths % 100;
  std::string out = whole;
  out += '.';
  out += static_cast<char>('0' + frac / 10);
  out += static_cast<char>('0' + frac % 10);
  return out;
}

/// Display value in integer hundredths of a unit (the number units_display renders).
inline std::int64_t units_hundredths(std::int64_t pulses) {
  return pulses * 100 / kPulsesPerUnit;
}

/// A piecewise-constant load profile with 1-second resolution.
class LoadProfile {
 public:
  LoadProfile() = default;
  explicit LoadProfile(std::vector<LoadSample> samples) : samples_(std::move(samples)) {
    const auto problems = validate(samples_);
    if (!problems.empty()) throw std::invalid_argument(problems.front());
  }

  static std::vector<std::string> validate(std::span<const LoadSample> samples) {
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      const auto at = "sample " + std::to_string(i) + ": ";
      if (s.power_w < 0) problems.push_back(at + "power_w must be >= 0");
      if (s.voltage_v <= 0) problems.push_back(at + "voltage_v must be > 0");
      if (i > 0 && s.start_s <= samples[i - 1].start_s)
        problems.push_back(at + "start_s must be strictly increasing");
    }
    return problems;
  }

  /// The sample in force at time t; before the first sample the load is zero.
  LoadSample at(std::int64_t t) const {
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](std::int64_t v, const LoadSample& s) { return v < s.start_s; });
    if (it == samples_.begin()) return LoadSample{t, 0, samples_.empty() ? 230 : samples_.front().voltage_v};
    return *std::prev(it);
  }

  std::span<const LoadSample> samples() const { return samples_; }

 private:
  std::vector<LoadSample> samples_;
};

}  // namespace wem
