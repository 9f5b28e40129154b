#include <gtest/gtest.h>

#include <random>

#include "wem/modem.hpp"

namespace wem {
namespace {

TEST(AtModem, GoldenSendTranscript) {
  AtModem m("919000000001");
  EXPECT_EQ(m.feed("AT\r\n").response, "AT\r\n\r\nOK\r\n");
  EXPECT_EQ(m.feed("ATE0\r\n").response, "ATE0\r\n\r\nOK\r\n");
  EXPECT_EQ(m.feed("AT+CMGF=1\r\n").response, "\r\nOK\r\n");
  EXPECT_EQ(m.feed("AT+CMGS=\"919876543210\"\r\n").response, "\r\n> ");
  const auto done = m.feed(std::string("#$12345$00.00$00.00$*") + kCtrlZ, 42);
  EXPECT_EQ(done.response, "\r\nOK\r\n");
  ASSERT_EQ(done.submitted.size(), 1u);
  EXPECT_EQ(done.submitted[0], (SmsMessage{"919000000001", "919876543210", "#$12345$00.00$00.00$*", 42}));
  EXPECT_EQ(m.session().state, AtState::command);
}

TEST(AtModem, ChunkingDoesNotMatter) {
  const std::string script = std::string("AT\r\nAT+CMGF=1\r\nAT+CMGS=\"123\"\r\nhello") + kCtrlZ + "ATE0\r\nAT\r\n";
  AtModem whole;
  const auto expected = whole.feed(script);
  AtModem bytewise;
  FeedResult acc;
  for (char c : script) {
    auto r = bytewise.feed(std::string_view(&c, 1));
    acc.response += r.response;
    acc.submitted.insert(acc.submitted.end(), r.submitted.begin(), r.submitted.end());
  }
  EXPECT_EQ(acc.response, expected.response);
  EXPECT_EQ(acc.submitted, expected.submitted);
}

TEST(AtModem, EchoMirrorsInputBeforeResult) {
  AtModem m;
  const std::string cmd = "at+cmgf=1\r\n";
  const auto r = m.feed(cmd);
  EXPECT_EQ(r.response, cmd + std::string(at::ok));
}

TEST(AtModem, SendBeforeTextModeIsError) {
  AtModem m;
  m.feed("ATE0\r\n");
  EXPECT_EQ(m.feed("AT+CMGS=\"123\"\r\n").response, at::error);
  EXPECT_EQ(m.session().state, AtState::command);
}

TEST(AtModem, ErrorsLeaveStateUnchanged) {
  AtModem m;
  m.feed("ATE0\r\nAT+CMGF=1\r\n");
  const auto before = m.session();
  EXPECT_EQ(m.feed("AT+FOO\r\n").response, at::error);
  EXPECT_EQ(m.feed("AT+CMGS=\"12a\"\r\n").response, at::error);
  EXPECT_EQ(m.feed("AT+CMGS=\r\n").response, at::error);
  EXPECT_EQ(m.session().echo, before.echo);
  EXPECT_EQ(m.session().text_mode, before.text_mode);
  EXPECT_EQ(m.session().state, AtState::command);
}

TEST(AtModem, EscCancelsWithoutSending) {
  AtModem m;
  m.feed("ATE0\r\nAT+CMGF=1\r\nAT+CMGS=\"123\"\r\n");
  const auto r = m.feed(std::string("partial") + kEsc);
  EXPECT_TRUE(r.submitted.empty());
  EXPECT_EQ(m.session().state, AtState::command);
  EXPECT_EQ(m.feed("AT\r\n").response, at::ok);
}

TEST(AtModem, BodyLengthCap) {
  AtModem m;
  m.feed("ATE0\r\nAT+CMGF=1\r\n");
  m.feed("AT+CMGS=\"123\"\r\n");
  auto r = m.feed(std::string(kMaxSmsBody, 'x') + kCtrlZ);
  EXPECT_EQ(r.response, at::ok);
  ASSERT_EQ(r.submitted.size(), 1u);
  EXPECT_EQ(r.submitted[0].body.size(), kMaxSmsBody);

  m.feed("AT+CMGS=\"123\"\r\n");
  r = m.feed(std::string(kMaxSmsBody + 1, 'x') + kCtrlZ);
  EXPECT_EQ(r.response, at::error);
  EXPECT_TRUE(r.submitted.empty());
  EXPECT_EQ(m.session().state, AtState::command);
}

TEST(AtModem, OverlongCommandLineIsError) {
  AtModem m;
  m.feed("ATE0\r\n");
  const auto r = m.feed(std::string(kMaxCommandLine + 1, 'A'));
  EXPECT_EQ(r.response, at::error);
  EXPECT_EQ(m.feed("AT\r\n").response, at::ok);
}

TEST(AtModem, StrayCtrlZIsIgnored) {
  AtModem m;
  m.feed("ATE0\r\n");
  const auto r = m.feed(std::string(1, kCtrlZ) + "AT\r\n");
  EXPECT_EQ(r.response, at::ok);
  EXPECT_TRUE(r.submitted.empty());
}

// Arbitrary bytes: the modem always answers with well-formed result codes,
// never throws, and only submits on an explicit Ctrl-Z in body state.
TEST(AtModem, GarbageInputIsTotal) {
  std::mt19937_64 rng(41);
  const std::string pieces[] = {"AT", "\r\n", "ATE0", "ATE1", "AT+CMGF=1", "AT+CMGS=\"99\"", "x",
                                std::string(1, kCtrlZ), std::string(1, kEsc), "\r", "\n"};
  for (int trial = 0; trial < 2000; ++trial) {
    AtModem m;
    std::string input;
    const int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      if (rng() % 4 == 0) input += static_cast<char>(rng());
      else input += pieces[rng() % std::size(pieces)];
    }
    FeedResult r;
    ASSERT_NO_THROW(r = m.feed(input));
    for (const auto& s : r.submitted) {
      EXPECT_EQ(s.to_number, "99");
      EXPECT_LE(s.body.size(), kMaxSmsBody);
    }
    EXPECT_LE(m.session().line_buffer.size(), kMaxCommandLine);
  }
}

SmsMessage msg(const std::string& from, std::int64_t t, const std::string& body = "b") {
  return {from, "919876543210", body, t};
}

TEST(SmsChannel, ZeroDropZeroLatencyDeliversInOrder) {
  SmsChannel ch({0, {0, 1}, 1});
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(ch.submit(msg("1", 10, std::to_string(i))));
  const auto out = ch.step(10);
  ASSERT_EQ(out.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out[i].body, std::to_string(i));
  EXPECT_EQ(ch.stats().delivered, 5u);
}

TEST(SmsChannel, LatencyHoldsMessages) {
  SmsChannel ch({30, {0, 1}, 1});
  ch.submit(msg("1", 100));
  EXPECT_TRUE(ch.step(129).empty());
  EXPECT_EQ(ch.step(130).size(), 1u);
}

TEST(SmsChannel, CertainDropDeliversNothing) {
  SmsChannel ch({0, {1, 1}, 1});
  for (int i = 0; i < 100; ++i) EXPECT_FALSE(ch.submit(msg("1", i)));
  EXPECT_TRUE(ch.step(1000).empty());
  EXPECT_EQ(ch.stats().dropped, 100u);
}

TEST(SmsChannel, SameSeedSameFate) {
  auto run = [](std::uint64_t seed) {
    SmsChannel ch({5, Probability::from_double(0.3), seed});
    std::vector<bool> fate;
    for (int i = 0; i < 500; ++i) fate.push_back(ch.submit(msg(std::to_string(i % 3), i)));
    return fate;
  };
  EXPECT_EQ(run(7), run(7));
  EXPECT_NE(run(7), run(8));
}

TEST(SmsChannel, SenderFateIndependentOfOtherTraffic) {
  SmsChannel alone({0, Probability::from_double(0.5), 9});
  SmsChannel mixed({0, Probability::from_double(0.5), 9});
  std::vector<bool> a, b;
  for (int i = 0; i < 200; ++i) {
    a.push_back(alone.submit(msg("A", i)));
    mixed.submit(msg("B", i));
    b.push_back(mixed.submit(msg("A", i)));
  }
  EXPECT_EQ(a, b);
}

TEST(SmsChannel, AccountingAndRate) {
  SmsChannel ch({3, Probability::from_double(0.25), 11});
  for (int t = 0; t < 20000; ++t) {
    ch.submit(msg(std::to_string(t % 7), t));
    ch.step(t);
    const auto& s = ch.stats();
    ASSERT_EQ(s.submitted, s.delivered + s.dropped + s.in_flight);
  }
  ch.step(1'000'000);
  const auto& s = ch.stats();
  EXPECT_EQ(s.in_flight, 0u);
  EXPECT_EQ(s.submitted, s.delivered + s.dropped);
  const double rate = static_cast<double>(s.dropped) / static_cast<double>(s.submitted);
  EXPECT_NEAR(rate, 0.25, 0.02);
}

TEST(SmsChannel, RejectsBadConfig) {
  EXPECT_THROW(SmsChannel({-1, {0, 1}, 0}), std::invalid_argument);
  EXPECT_THROW(SmsChannel({0, {2, 1}, 0}), std::invalid_argument);
  EXPECT_THROW(SmsChannel({0, {0, 0}, 0}), std::invalid_argument);
  EXPECT_THROW(Probability::from_double(1.5), std::invalid_argument);
}

}  // namespace
}  // namespace wem
