#pragma once

// GSM modem emulation (AT command subset used by the meter) and a seeded
// store-and-forward SMS channel.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wem {

inline constexpr char kCtrlZ = 0x1A;
inline constexpr char kEsc = 0x1B;
inline constexpr std::size_t kMaxSmsBody = 160;
inline constexpr std::size_t kMaxCommandLine = 256;

namespace at {
inline constexpr std::string_view ok = "\r\nOK\r\n";
inline constexpr std::string_view error = "\r\nERROR\r\n";
inline constexpr std::string_view prompt = "\r\n> ";
}  // namespace at

struct SmsMessage {
  std::string from_number;
  std::string to_number;
  std::string body;
  std::int64_t submit_time_s = 0;

  bool operator==(const SmsMessage&) const = default;
};

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

enum class AtState { command, await_body };

struct AtSession {
  bool echo = true;
  bool text_mode = false;
  AtState state = AtState::command;
  std::optional<std::string> pending_dest;
  std::string line_buffer;
};

struct FeedResult {
  std::string response;
  std::vector<SmsMessage> submitted;
};

/// Byte-level AT command interpreter. Input may arrive in arbitrary chunks;
/// command lines are processed when their CR LF terminator arrives.
class AtModem {
 public:
  explicit AtModem(std::string own_number = "") : own_number_(std::move(own_number)) {}

  FeedResult feed(std::string_view input, std::int64_t now_s = 0) {
    FeedResult out;
    for (char c : input) {
      if (session_.state == AtState::await_body)
        body_byte(c, now_s, out);
      else
        command_byte(c, out);
    }
    return out;
  }

  const AtSession& session() const { return session_; }
  const std::string& own_number() const { return own_number_; }

 private:
  void command_byte(char c, FeedResult& out) {
    if (c == kCtrlZ) return;  // stray terminator outside a message
    if (session_.echo) out.response += c;
    auto& line = session_.line_buffer;
    line += c;
    if (line.size() >= 2 && line.ends_with("\r\n")) {
      line.resize(line.size() - 2);
      std::string cmd = std::move(line);
      line.clear();
      execute(cmd, out);
      return;
    }
    if (line.size() > kMaxCommandLine) {
      line.clear();
      out.response += at::error;
    }
  }

  void execute(std::string_view raw, FeedResult& out) {
    // A bare CR left over from an earlier line ending is not a command.
    while (!raw.empty() && (raw.front() == '\r' || raw.front() == '\n')) raw.remove_prefix(1);
    if (raw.empty()) return;

    std::string upper(raw);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });

    if (upper == "AT") {
      out.response += at::ok;
    } else if (upper == "ATE0") {
      session_.echo = false;
      out.response += at::ok;
    } else if (upper == "ATE1") {
      session_.echo = true;
      out.response += at::ok;
    } else if (upper == "AT+CMGF=1") {
      session_.text_mode = true;
      out.response += at::ok;
    } else if (upper == "AT+CMGF=0") {
      session_.text_mode = false;
      out.response += at::ok;
    } else if (upper.starts_with("AT+CMGS=")) {
      std::string_view arg = std::string_view(raw).substr(8);
      if (arg.size() >= 2 && arg.front() == '"' && arg.back() == '"')
        arg = arg.substr(1, arg.size() - 2);
      if (!session_.text_mode || !all_digits(arg)) {
        out.response += at::error;
        return;
      }
      session_.pending_dest = std::string(arg);
      session_.state = AtState::await_body;
      body_.clear();
      out.response += at::prompt;
    } else {
      out.response += at::error;
    }
  }

  void body_byte(char c, std::int64_t now_s, FeedResult& out) {
    if (c == kEsc) {
      reset_body();
      return;
    }
    if (c == kCtrlZ) {
      if (body_.size() > kMaxSmsBody) {
        out.response += at::error;
      } else {
        out.submitted.push_back(SmsMessage{own_number_, *session_.pending_dest, body_, now_s});
        out.response += at::ok;
      }
      reset_body();
      return;
    }
    if (session_.echo) out.response += c;
    // Anything past the cap is rejected at the terminator; stop growing.
    if (body_.size() <= kMaxSmsBody) body_ += c;
  }

  void reset_body() {
    body_.clear();
    session_.pending_dest.reset();
    session_.state = AtState::command;
  }

  std::string own_number_;
  AtSession session_;
  std::string body_;
};

/// Drop probability as an exact fraction.
struct Probability {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;

  static Probability from_double(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
    constexpr std::uint64_t den = 1'000'000;
    return {static_cast<std::uint64_t>(p * den + 0.5), den};
  }

  bool valid() const { return denominator > 0 && numerator <= denominator; }
  double as_double() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
};

struct ChannelConfig {
  std::int64_t latency_s = 0;
  Probability drop_probability;
  std::uint64_t seed = 0;
};

namespace channel_detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// FNV-1a; std::hash is not stable across standard libraries.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace channel_detail

struct ChannelStats {
  std::uint64_t submitted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;
};

/// Store-and-forward SMS network. Whether a message is lost is fixed at
/// submission from (seed, sender, per-sender sequence number), so one sender's
/// fate does not depend on how many messages other senders produced.
class SmsChannel {
 public:
  explicit SmsChannel(ChannelConfig config) : config_(config) {
    if (config_.latency_s < 0) throw std::invalid_argument("channel latency must be >= 0");
    if (!config_.drop_probability.valid())
      throw std::invalid_argument("channel drop probability must be in [0,1]");
  }

  /// Returns false when the message is lost.
  bool submit(SmsMessage msg) {
    ++stats_.submitted;
    const auto seq = sender_seq_[msg.from_number]++;
    if (lost(msg.from_number, seq)) {
      ++stats_.dropped;
      return false;
    }
    queue_.push_back(std::move(msg));
    ++stats_.in_flight;
    return true;
  }

  std::vector<SmsMessage> step(std::int64_t now_s) {
    std::vector<SmsMessage> out;
    while (!queue_.empty() && queue_.front().submit_time_s + config_.latency_s <= now_s) {
      out.push_back(std::move(queue_.front()));
      queue_.pop_front();
      --stats_.in_flight;
      ++stats_.delivered;
    }
    return out;
  }

  const ChannelStats& stats() const { return stats_; }
  const ChannelConfig& config() const { return config_; }

 private:
  bool lost(std::string_view sender, std::uint64_t seq) const {
    const auto& p = config_.drop_probability;
    if (p.numerator == 0) return false;
    if (p.numerator >= p.denominator) return true;
    using namespace channel_detail;
    const std::uint64_t draw = splitmix64(splitmix64(config_.seed ^ fnv1a(sender)) + seq);
    // Compare draw / 2^64 < num / den without overflow via 128-bit product.
    const unsigned __int128 lhs = static_cast<unsigned __int128>(draw) * p.denominator;
    const unsigned __int128 rhs = static_cast<unsigned __int128>(p.numerator) << 64;
    return lhs < rhs;
  }

  ChannelConfig config_;
  std::deque<SmsMessage> queue_;
  std::map<std::string, std::uint64_t> sender_seq_;
  ChannelStats stats_;
};

}  // namespace wem
