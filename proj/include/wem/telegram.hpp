#pragma once

// SMS reading telegram:  #$<meter id>$<total - extra>$<extra>$*
//
//   telegram := "#$" id "$" units "$" units "$*"
//   id       := [0-9]{1,8}
//   units    := [0-9]{2,} "." [0-9]{2}

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wem {

struct Telegram {
  std::string meter_id;
  std::string ncu_display;
  std::string ecu_display;

  bool operator==(const Telegram&) const = default;
};

enum class TelegramError {
  missing_header,
  missing_trailer,
  field_count,
  bad_meter_id,
  bad_decimal,
};

inline const char* to_string(TelegramError e) {
  switch (e) {
    case TelegramError::missing_header: return "missing header";
    case TelegramError::missing_trailer: return "missing trailer";
    case TelegramError::field_count: return "field count";
    case TelegramError::bad_meter_id: return "bad meter id";
    case TelegramError::bad_decimal: return "malformed decimal field";
  }
  return "unknown";
}

struct ParseError {
  TelegramError kind;
  std::size_t position;  // byte offset of the first offending byte

  std::string message() const {
    return std::string(to_string(kind)) + " at byte " + std::to_string(position);
  }
  bool operator==(const ParseError&) const = default;
};

class DecodeResult {
 public:
  DecodeResult(Telegram t) : telegram_(std::move(t)) {}
  DecodeResult(ParseError e) : error_(e) {}

  bool ok() const { return telegram_.has_value(); }
  explicit operator bool() const { return ok(); }

  const Telegram& value() const {
    if (!telegram_) throw std::logic_error("DecodeResult: no telegram (" + error_->message() + ")");
    return *telegram_;
  }
  const ParseError& error() const {
    if (!error_) throw std::logic_error("DecodeResult: no error");
    return *error_;
  }

 private:
  std::optional<Telegram> telegram_;
  std::optional<ParseError> error_;
};

namespace telegram_detail {

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Offset of the first byte violating the id rule, or npos.
inline std::size_t check_id(std::string_view f) {
  if (f.empty()) return 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!is_digit(f[i]) || i >= 8) return i;
  }
  return std::string_view::npos;
}

inline std::size_t check_units(std::string_view f) {
  std::size_t i = 0;
  while (i < f.size() && is_digit(f[i])) ++i;
  if (i < 2) return i;
  if (i == f.size() || f[i] != '.') return i;
  ++i;
  for (int k = 0; k < 2; ++k, ++i) {
    if (i == f.size() || !is_digit(f[i])) return i;
  }
  if (i != f.size()) return i;
  return std::string_view::npos;
}

}  // namespace telegram_detail

/// Field-level validation against the grammar; empty when the telegram is encodable.
inline std::optional<std::string> validate(const Telegram& t) {
  using namespace telegram_detail;
  if (check_id(t.meter_id) != std::string_view::npos) return "meter_id must be 1-8 digits";
  if (check_units(t.ncu_display) != std::string_view::npos) return "ncu_display is not NN.NN";
  if (check_units(t.ecu_display) != std::string_view::npos) return "ecu_display is not NN.NN";
  return std::nullopt;
}

inline std::string encode(const Telegram& t) {
  if (auto problem = validate(t)) throw std::invalid_argument("telegram encode: " + *problem);
  std::string out;
  out.reserve(8 + t.meter_id.size() + t.ncu_display.size() + t.ecu_display.size());
  out += "#$";
  out += t.meter_id;
  out += '$';
  out += t.ncu_display;
  out += '$';
  out += t.ecu_display;
  out += "$*";
  return out;
}

inline DecodeResult decode(std::string_view bytes) {
  using namespace telegram_detail;
  constexpr auto npos = std::string_view::npos;

  if (bytes.empty() || bytes[0] != '#') return ParseError{TelegramError::missing_header, 0};
  if (bytes.size() < 2 || bytes[1] != '$') return ParseError{TelegramError::missing_header, 1};
  if (bytes.size() < 4 || bytes.substr(bytes.size() - 2) != "$*") {
    const std::size_t at = bytes.size() < 4 ? bytes.size() : bytes.size() - 2;
    return ParseError{TelegramError::missing_trailer, at};
  }

  // Fields sit between the header and the trailer, separated by '$'.
  const std::size_t body_end = bytes.size() - 2;
  std::size_t start = 2;
  int field = 0;
  while (true) {
    std::size_t sep = bytes.find('$', start);
    if (sep == npos || sep > body_end) sep = body_end;
    if (field == 3) return ParseError{TelegramError::field_count, start - 1};
    const auto text = bytes.substr(start, sep - start);
    if (field == 0) {
      if (auto bad = check_id(text); bad != npos)
        return ParseError{TelegramError::bad_meter_id, start + bad};
    } else {
      if (auto bad = check_units(text); bad != npos) {
        // A '*' right where a field should start means fields ran out early.
        if (text.empty() && sep == body_end) return ParseError{TelegramError::field_count, start};
        return ParseError{TelegramError::bad_decimal, start + bad};
      }
    }
    ++field;
    if (sep == body_end) break;
    start = sep + 1;
  }
  if (field != 3) return ParseError{TelegramError::field_count, body_end};

  std::vector<std::string_view> parts;
  std::size_t s = 2;
  for (int i = 0; i < 3; ++i) {
    std::size_t e = bytes.find('$', s);
    parts.push_back(bytes.substr(s, e - s));
    s = e + 1;
  }
  return Telegram{std::string(parts[0]), std::string(parts[1]), std::string(parts[2])};
}

}  // namespace wem
