#pragma once

// Head-end service: meter registry, telegram ingestion, reading history and
// billing. Meters report lifetime totals; bills are differences between the
// readings that bound a period.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

#include "json.hpp"

#include "wem/modem.hpp"
#include "wem/telegram.hpp"

namespace wem {

// Fixed-point value with two decimals, stored as hundredths. Used for both
// consumption units and currency.
using Hundredths = std::int64_t;

inline std::optional<Hundredths> parse_hundredths(std::string_view s) {
  if (s.empty()) return std::nullopt;
  const auto dot = s.find('.');
  const auto whole = s.substr(0, dot);
  const auto frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() || whole.size() > 15 || frac.size() > 2) return std::nullopt;
  if (dot != std::string_view::npos && frac.empty()) return std::nullopt;
  Hundredths v = 0;
  for (char c : whole) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  int scale = 0;
  for (char c : frac) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
    ++scale;
  }
  for (; scale < 2; ++scale) v *= 10;
  return v;
}

inline std::string format_hundredths(Hundredths v) {
  const bool negative = v < 0;
  const auto mag = negative ? -v : v;
  std::string out = std::to_string(mag / 100);
  out += '.';
  out += static_cast<char>('0' + mag % 100 / 10);
  out += static_cast<char>('0' + mag % 10);
  return negative ? "-" + out : out;
}

/// Hundredths from a JSON string ("3.00") or number (3, 3.5).
inline std::optional<Hundredths> hundredths_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_hundredths(j.get<std::string>());
  if (j.is_number_integer()) return j.get<std::int64_t>() * 100;
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (!(x >= 0) || x > 1e13) return std::nullopt;
    return static_cast<Hundredths>(x * 100.0 + 0.5);
  }
  return std::nullopt;
}

struct MeterEntry {
  std::string meter_id;
  std::string dest_number;

  bool operator==(const MeterEntry&) const = default;
};

struct ReadingRecord {
  std::string meter_id;
  std::int64_t received_at_s = 0;
  Hundredths ncu_units = 0;
  Hundredths ecu_units = 0;
  std::string raw;
  std::string from_number;

  bool operator==(const ReadingRecord&) const = default;
};

struct TariffSchedule {
  Hundredths normal_rate = 0;   // currency per unit
  Hundredths peak_rate = 0;     // currency per unit
  Hundredths fixed_charge = 0;  // currency per billing period

  std::vector<std::string> validate() const {
    std::vector<std::string> problems;
    if (normal_rate < 0 || peak_rate < 0 || fixed_charge < 0) problems.push_back("tariff values must be >= 0");
    if (peak_rate < normal_rate) problems.push_back("peak_rate must be >= normal_rate");
    return problems;
  }

  bool operator==(const TariffSchedule&) const = default;
};

struct Bill {
  std::string meter_id;
  std::int64_t period_start_s = 0;
  std::int64_t period_end_s = 0;
  std::optional<std::int64_t> start_reading_at;  // absent: zero baseline
  std::int64_t end_reading_at = 0;
  Hundredths ncu_consumed = 0;
  Hundredths ecu_consumed = 0;
  Hundredths amount_without_extra = 0;
  Hundredths amount_total = 0;
};

/// rate x quantity, both in hundredths, rounded half-up to hundredths.
inline Hundredths charge(Hundredths rate, Hundredths quantity) {
  return (rate * quantity + 50) / 100;
}

enum class RejectReason { parse, unknown_meter, stale };

inline const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::parse: return "PARSE";
    case RejectReason::unknown_meter: return "UNKNOWN_METER";
    case RejectReason::stale: return "STALE";
  }
  return "?";
}

struct DeadLetter {
  std::int64_t received_at_s = 0;
  std::string from_number;
  std::string raw;
  RejectReason reason = RejectReason::parse;
  std::string detail;
};

struct IngestOutcome {
  enum class Status { stored, duplicate, rejected };
  Status status = Status::rejected;
  std::optional<ReadingRecord> record;
  std::optional<DeadLetter> rejection;

  bool accepted() const { return status != Status::rejected; }
};

enum class BillError { unknown_meter, invalid_period, no_readings };

inline const char* to_string(BillError e) {
  switch (e) {
    case BillError::unknown_meter: return "NOT_FOUND";
    case BillError::invalid_period: return "INVALID_PERIOD";
    case BillError::no_readings: return "NO_READINGS";
  }
  return "?";
}

enum class RegisterError { duplicate, invalid };

// JSON mapping shared by the storage files and the HTTP API.

inline void to_json(nlohmann::json& j, const MeterEntry& m) {
  j = {{"meter_id", m.meter_id}, {"dest_number", m.dest_number}};
}

inline void to_json(nlohmann::json& j, const ReadingRecord& r) {
  j = {{"meter_id", r.meter_id},
       {"received_at_s", r.received_at_s},
       {"ncu_units", format_hundredths(r.ncu_units)},
       {"ecu_units", format_hundredths(r.ecu_units)},
       {"raw", r.raw},
       {"from_number", r.from_number}};
}

inline void to_json(nlohmann::json& j, const TariffSchedule& t) {
  j = {{"normal_rate", format_hundredths(t.normal_rate)},
       {"peak_rate", format_hundredths(t.peak_rate)},
       {"fixed_charge", format_hundredths(t.fixed_charge)}};
}

inline void to_json(nlohmann::json& j, const DeadLetter& d) {
  j = {{"received_at_s", d.received_at_s},
       {"from_number", d.from_number},
       {"raw", d.raw},
       {"category", to_string(d.reason)},
       {"detail", d.detail}};
}

inline void to_json(nlohmann::json& j, const Bill& b) {
  j = {{"meter_id", b.meter_id},
       {"period", {{"from", b.period_start_s}, {"to", b.period_end_s}}},
       {"start_reading_at", b.start_reading_at ? nlohmann::json(*b.start_reading_at) : nlohmann::json()},
       {"end_reading_at", b.end_reading_at},
       {"ncu_consumed", format_hundredths(b.ncu_consumed)},
       {"ecu_consumed", format_hundredths(b.ecu_consumed)},
       {"amount_without_extra", format_hundredths(b.amount_without_extra)},
       {"amount_total", format_hundredths(b.amount_total)}};
}

/// Parses a tariff object; each field may be a decimal string or a number.
inline std::variant<TariffSchedule, std::string> tariff_from_json(const nlohmann::json& j,
                                                                   TariffSchedule base = {}) {
  if (!j.is_object()) return std::string("tariff must be an object");
  for (auto [key, field] : {std::pair{"normal_rate", &TariffSchedule::normal_rate},
                            std::pair{"peak_rate", &TariffSchedule::peak_rate},
                            std::pair{"fixed_charge", &TariffSchedule::fixed_charge}}) {
    if (!j.contains(key)) continue;
    auto v = hundredths_from_json(j.at(key));
    if (!v) return std::string(key) + " is not a non-negative decimal";
    base.*field = *v;
  }
  if (auto problems = base.validate(); !problems.empty()) return problems.front();
  return base;
}

class BaseStation {
 public:
  explicit BaseStation(TariffSchedule tariff = {},
                       std::optional<std::filesystem::path> storage_dir = std::nullopt)
      : tariff_(tariff), storage_dir_(std::move(storage_dir)) {
    if (auto problems = tariff_.validate(); !problems.empty())
      throw std::invalid_argument("tariff: " + problems.front());
    if (storage_dir_) load();
  }

  BaseStation(const BaseStation&) = delete;
  BaseStation& operator=(const BaseStation&) = delete;

  std::optional<RegisterError> register_meter(const MeterEntry& entry) {
    if (!all_digits(entry.meter_id) || entry.meter_id.size() > 8 ||
        (!entry.dest_number.empty() && !all_digits(entry.dest_number)))
      return RegisterError::invalid;
    std::unique_lock lock(mutex_);
    if (find_meter(entry.meter_id)) return RegisterError::duplicate;
    meters_.push_back(entry);
    append_line("meters.jsonl", entry);
    return std::nullopt;
  }

  std::optional<MeterEntry> lookup(std::string_view meter_id) const {
    std::shared_lock lock(mutex_);
    if (auto* m = find_meter(meter_id)) return *m;
    return std::nullopt;
  }

  std::vector<MeterEntry> meters() const {
    std::shared_lock lock(mutex_);
    return meters_;
  }

  IngestOutcome ingest(const SmsMessage& sms, std::int64_t received_at_s) {
    std::unique_lock lock(mutex_);
    IngestOutcome out;
    auto reject = [&](RejectReason reason, std::string detail) {
      DeadLetter d{received_at_s, sms.from_number, sms.body, reason, std::move(detail)};
      append_line("dead_letter.jsonl", d);
      dead_letters_.push_back(d);
      out.status = IngestOutcome::Status::rejected;
      out.rejection = std::move(d);
      return out;
    };

    const auto decoded = decode(sms.body);
    if (!decoded) return reject(RejectReason::parse, decoded.error().message());
    const auto& t = decoded.value();
    const auto ncu = parse_hundredths(t.ncu_display);
    const auto ecu = parse_hundredths(t.ecu_display);
    if (!ncu || !ecu) return reject(RejectReason::parse, "reading value out of range");
    if (!find_meter(t.meter_id)) return reject(RejectReason::unknown_meter, "meter " + t.meter_id + " is not registered");

    ReadingRecord rec{t.meter_id, received_at_s, *ncu, *ecu, sms.body, sms.from_number};
    if (seen_.contains({rec.meter_id, rec.raw, rec.received_at_s})) {
      out.status = IngestOutcome::Status::duplicate;
      out.record = std::move(rec);
      return out;
    }
    if (auto last = latest_locked(rec.meter_id)) {
      if (rec.ncu_units < last->ncu_units || rec.ecu_units < last->ecu_units)
        return reject(RejectReason::stale, "reading below last stored " + last->raw);
    }
    seen_.insert({rec.meter_id, rec.raw, rec.received_at_s});
    readings_.push_back(rec);
    append_line("readings.jsonl", rec);
    out.status = IngestOutcome::Status::stored;
    out.record = std::move(rec);
    return out;
  }

  /// Readings with from <= received_at <= to; nullopt for an unknown meter.
  std::optional<std::vector<ReadingRecord>> readings(
      std::string_view meter_id, std::int64_t from = std::numeric_limits<std::int64_t>::min(),
      std::int64_t to = std::numeric_limits<std::int64_t>::max()) const {
    std::shared_lock lock(mutex_);
    if (!find_meter(meter_id)) return std::nullopt;
    std::vector<ReadingRecord> out;
    for (const auto& r : readings_)
      if (r.meter_id == meter_id && r.received_at_s >= from && r.received_at_s <= to) out.push_back(r);
    return out;
  }

  std::optional<ReadingRecord> latest(std::string_view meter_id) const {
    std::shared_lock lock(mutex_);
    return latest_locked(meter_id);
  }

  /// Bill for (period_start, period_end]: consumption between the latest
  /// reading at or before each bound. Without an earlier reading the start is
  /// the zero baseline.
  std::variant<Bill, BillError> compute_bill(std::string_view meter_id, std::int64_t period_start_s,
                                             std::int64_t period_end_s,
                                             std::optional<TariffSchedule> tariff = std::nullopt) const {
    std::shared_lock lock(mutex_);
    if (!find_meter(meter_id)) return BillError::unknown_meter;
    if (period_end_s < period_start_s) return BillError::invalid_period;
    const TariffSchedule& rates = tariff ? *tariff : tariff_;

    const ReadingRecord* start = nullptr;
    const ReadingRecord* end = nullptr;
    for (const auto& r : readings_) {
      if (r.meter_id != meter_id) continue;
      if (r.received_at_s <= period_start_s && (!start || r.received_at_s >= start->received_at_s)) start = &r;
      if (r.received_at_s <= period_end_s && (!end || r.received_at_s >= end->received_at_s)) end = &r;
    }
    if (!end || end->received_at_s <= period_start_s) return BillError::no_readings;

    Bill b;
    b.meter_id = std::string(meter_id);
    b.period_start_s = period_start_s;
    b.period_end_s = period_end_s;
    if (start) b.start_reading_at = start->received_at_s;
    b.end_reading_at = end->received_at_s;
    b.ncu_consumed = end->ncu_units - (start ? start->ncu_units : 0);
    b.ecu_consumed = end->ecu_units - (start ? start->ecu_units : 0);
    b.amount_without_extra = rates.fixed_charge + charge(rates.normal_rate, b.ncu_consumed);
    b.amount_total = b.amount_without_extra + charge(rates.peak_rate, b.ecu_consumed);
    return b;
  }

  TariffSchedule tariff() const {
    std::shared_lock lock(mutex_);
    return tariff_;
  }

  /// Replaces the tariff; returns the validation problem when rejected.
  std::optional<std::string> set_tariff(const TariffSchedule& t) {
    if (auto problems = t.validate(); !problems.empty()) return problems.front();
    std::unique_lock lock(mutex_);
    tariff_ = t;
    if (storage_dir_) {
      std::ofstream f(*storage_dir_ / "tariff.json", std::ios::trunc);
      f << nlohmann::json(t).dump() << '\n';
    }
    return std::nullopt;
  }

  std::vector<DeadLetter> dead_letters() const {
    std::shared_lock lock(mutex_);
    return dead_letters_;
  }

  std::vector<ReadingRecord> all_readings() const {
    std::shared_lock lock(mutex_);
    return readings_;
  }

 private:
  const MeterEntry* find_meter(std::string_view id) const {
    for (const auto& m : meters_)
      if (m.meter_id == id) return &m;
    return nullptr;
  }

  std::optional<ReadingRecord> latest_locked(std::string_view meter_id) const {
    for (auto it = readings_.rbegin(); it != readings_.rend(); ++it)
      if (it->meter_id == meter_id) return *it;
    return std::nullopt;
  }

  template <typename T>
  void append_line(const char* file, const T& value) {
    if (!storage_dir_) return;
    std::ofstream f(*storage_dir_ / file, std::ios::app);
    f << nlohmann::json(value).dump() << '\n';
    if (!f) throw std::runtime_error(std::string("base station: cannot append to ") + file);
  }

  template <typename F>
  void for_each_line(const char* file, F&& fn) {
    std::ifstream f(*storage_dir_ / file);
    std::string line;
    std::size_t n = 0;
    while (std::getline(f, line)) {
      ++n;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw std::runtime_error(std::string(file) + ":" + std::to_string(n) + ": malformed record");
      fn(j);
    }
  }

  void load() {
    std::filesystem::create_directories(*storage_dir_);
    for_each_line("meters.jsonl", [&](const nlohmann::json& j) {
      meters_.push_back({j.at("meter_id").get<std::string>(), j.value("dest_number", "")});
    });
    for_each_line("readings.jsonl", [&](const nlohmann::json& j) {
      ReadingRecord r;
      r.meter_id = j.at("meter_id").get<std::string>();
      r.received_at_s = j.at("received_at_s").get<std::int64_t>();
      r.ncu_units = parse_hundredths(j.at("ncu_units").get<std::string>()).value_or(0);
      r.ecu_units = parse_hundredths(j.at("ecu_units").get<std::string>()).value_or(0);
      r.raw = j.at("raw").get<std::string>();
      r.from_number = j.value("from_number", "");
      seen_.insert({r.meter_id, r.raw, r.received_at_s});
      readings_.push_back(std::move(r));
    });
    for_each_line("dead_letter.jsonl", [&](const nlohmann::json& j) {
      DeadLetter d;
      d.received_at_s = j.at("received_at_s").get<std::int64_t>();
      d.from_number = j.value("from_number", "");
      d.raw = j.value("raw", "");
      const auto cat = j.value("category", "PARSE");
      d.reason = cat == "STALE" ? RejectReason::stale
                 : cat == "UNKNOWN_METER" ? RejectReason::unknown_meter
                                          : RejectReason::parse;
      d.detail = j.value("detail", "");
      dead_letters_.push_back(std::move(d));
    });
    const auto tariff_file = *storage_dir_ / "tariff.json";
    if (std::filesystem::exists(tariff_file)) {
      std::ifstream f(tariff_file);
      auto parsed = tariff_from_json(nlohmann::json::parse(f), tariff_);
      if (auto* t = std::get_if<TariffSchedule>(&parsed)) tariff_ = *t;
    }
  }

  mutable std::shared_mutex mutex_;
  TariffSchedule tariff_;
  std::optional<std::filesystem::path> storage_dir_;
  std::vector<MeterEntry> meters_;
  std::vector<ReadingRecord> readings_;
  std::vector<DeadLetter> dead_letters_;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen_;
};

}  // namespace wem
