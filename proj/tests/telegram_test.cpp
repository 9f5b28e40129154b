#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "wem/telegram.hpp"

namespace wem {
namespace {

// Reference grammar as a regular expression; decode must agree with it.
const std::regex kGrammar(R"(#\$[0-9]{1,8}\$[0-9]{2,}\.[0-9]{2}\$[0-9]{2,}\.[0-9]{2}\$\*)");

TEST(TelegramEncode, Examples) {
  EXPECT_EQ(encode({"12345", "00.00", "00.00"}), "#$12345$00.00$00.00$*");
  EXPECT_EQ(encode({"1", "00.00", "00.00"}), "#$1$00.00$00.00$*");
  EXPECT_EQ(encode({"12345", "14.00", "01.00"}), "#$12345$14.00$01.00$*");
  EXPECT_EQ(encode({"12345", "100.25", "01.00"}), "#$12345$100.25$01.00$*");
}

TEST(TelegramEncode, RejectsInvalidFields) {
  EXPECT_THROW(encode({"", "00.00", "00.00"}), std::invalid_argument);
  EXPECT_THROW(encode({"123456789", "00.00", "00.00"}), std::invalid_argument);
  EXPECT_THROW(encode({"12a", "00.00", "00.00"}), std::invalid_argument);
  EXPECT_THROW(encode({"1", "0.00", "00.00"}), std::invalid_argument);
  EXPECT_THROW(encode({"1", "00.0", "00.00"}), std::invalid_argument);
  EXPECT_THROW(encode({"1", "00.00", "00,00"}), std::invalid_argument);
}

TEST(TelegramDecode, PaperLiteral) {
  const auto r = decode("#$12345$00.00$00.00$*");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.value(), (Telegram{"12345", "00.00", "00.00"}));
}

TEST(TelegramDecode, ErrorsNameCategoryAndPosition) {
  auto expect_error = [](std::string_view in, TelegramError kind, std::size_t pos) {
    const auto r = decode(in);
    ASSERT_FALSE(r.ok()) << in;
    EXPECT_EQ(r.error().kind, kind) << in << ": " << r.error().message();
    EXPECT_EQ(r.error().position, pos) << in << ": " << r.error().message();
  };
  expect_error("#$12345$00.00$*", TelegramError::field_count, 13);
  expect_error("#$12345$00.00$00.00$00.00$*", TelegramError::field_count, 19);
  expect_error("$12345$00.00$00.00$*", TelegramError::missing_header, 0);
  expect_error("#12345$00.00$00.00$*", TelegramError::missing_header, 1);
  expect_error("#$12345$00.00$00.00$", TelegramError::missing_trailer, 18);
  expect_error("#$12345$00.00$00.00", TelegramError::missing_trailer, 17);
  expect_error("#$12a45$00.00$00.00$*", TelegramError::bad_meter_id, 4);
  expect_error("#$$00.00$00.00$*", TelegramError::bad_meter_id, 2);
  expect_error("#$123456789$00.00$00.00$*", TelegramError::bad_meter_id, 10);
  expect_error("#$1$0.00$00.00$*", TelegramError::bad_decimal, 5);
  expect_error("#$1$00.00$00.0x$*", TelegramError::bad_decimal, 14);
  expect_error("", TelegramError::missing_header, 0);
  expect_error("garbage", TelegramError::missing_header, 0);
  expect_error("#$*", TelegramError::missing_trailer, 3);
}

Telegram random_telegram(std::mt19937_64& rng) {
  auto digits = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += static_cast<char>('0' + rng() % 10);
    return s;
  };
  auto units = [&] { return digits(2 + rng() % 4) + "." + digits(2); };
  return {digits(1 + rng() % 8), units(), units()};
}

TEST(TelegramProperties, RoundTrip) {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 10000; ++i) {
    const auto t = random_telegram(rng);
    const auto bytes = encode(t);
    ASSERT_TRUE(std::regex_match(bytes, kGrammar)) << bytes;
    const auto back = decode(bytes);
    ASSERT_TRUE(back.ok()) << bytes;
    ASSERT_EQ(back.value(), t);
  }
}

// Mutated valid telegrams and raw noise: decode must accept exactly what the
// reference grammar accepts, and never throw.
TEST(TelegramProperties, AgreesWithReferenceGrammar) {
  std::mt19937_64 rng(31);
  const std::string alphabet = "#$*.0123456789a\r\n\x1a";
  for (int i = 0; i < 20000; ++i) {
    std::string s = encode(random_telegram(rng));
    const int edits = static_cast<int>(rng() % 4);
    for (int e = 0; e < edits; ++e) {
      const auto pos = rng() % (s.size() + 1);
      switch (rng() % 3) {
        case 0: s.insert(s.begin() + static_cast<long>(pos), alphabet[rng() % alphabet.size()]); break;
        case 1: if (pos < s.size()) s.erase(pos, 1); break;
        default: if (pos < s.size()) s[pos] = alphabet[rng() % alphabet.size()]; break;
      }
    }
    DecodeResult r = Telegram{};
    ASSERT_NO_THROW(r = decode(s)) << s;
    EXPECT_EQ(r.ok(), std::regex_match(s, kGrammar)) << s;
    if (r.ok()) EXPECT_EQ(encode(r.value()), s);
    else EXPECT_LE(r.error().position, s.size());
  }
}

TEST(TelegramProperties, ArbitraryBytesNeverCrash) {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 20000; ++i) {
    std::string s(rng() % 40, '\0');
    for (auto& c : s) c = static_cast<char>(rng());
    if (rng() % 2) s = "#$" + s;
    if (rng() % 2) s += "$*";
    const auto r = decode(s);
    EXPECT_EQ(r.ok(), std::regex_match(s, kGrammar));
  }
}

}  // namespace
}  // namespace wem
