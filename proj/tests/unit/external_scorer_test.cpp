#include <chrono>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lossprobe/scoring.hpp"

namespace lossprobe::scoring {
namespace {

using namespace std::chrono_literals;
using lossprobe::testing::errc_of;
using lossprobe::testing::TempDir;
using lossprobe::testing::toy_fixture;

class ExternalScorerTest : public ::testing::Test {
 protected:
  void SetUp() override { toy_fixture().model->save(model_path()); }

  std::filesystem::path model_path() const { return dir_ / "model.json"; }

  std::vector<std::string> args(const std::string& mode) const {
    return {"--model", model_path().string(), "--mode", mode};
  }

  std::unique_ptr<Scorer> open(const std::string& mode, ExternalOptions opts = {}) const {
    return open_external(LOSSPROBE_FAKE_ADAPTER, args(mode), opts);
  }

  TempDir dir_;
};

TEST_F(ExternalScorerTest, HandshakeExposesAdapterIdentity) {
  const auto scorer = open("normal");
  EXPECT_EQ(scorer->kind(), ScorerKind::external);
  EXPECT_EQ(scorer->name(), "fake:" + toy_fixture().model->name());
  EXPECT_EQ(scorer->vocab_size(), toy_fixture().model->vocab_size());
  const auto& hello = dynamic_cast<ExternalScorer&>(*scorer).handshake();
  EXPECT_EQ(hello.at("loss_base"), "nats");
}

TEST_F(ExternalScorerTest, RoundTripMatchesBuiltinScorer) {
  const auto& fx = toy_fixture();
  auto external = open("normal");
  BuiltinNgramScorer builtin(fx.model, "toy");
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& s = fx.heldout[i % fx.heldout.size()];
    const auto a = score_sequence(*external, s);
    const auto b = score_sequence(builtin, s);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t t = 0; t < a.size(); ++t) EXPECT_NEAR(a.values[t], b.values[t], 1e-6);
  }
  EXPECT_TRUE(check_conformance(*external, fx.heldout).passed());
}

TEST_F(ExternalScorerTest, ShutdownReportsCleanExit) {
  ExternalScorer scorer(LOSSPROBE_FAKE_ADAPTER, args("normal"));
  EXPECT_EQ(scorer.shutdown(), 0);
  EXPECT_EQ(scorer.shutdown(), -1);
  EXPECT_EQ(errc_of([&] { scorer.score_tokens(std::vector<TokenId>{1, 2}); }),
            Errc::backend_failure);
}

TEST_F(ExternalScorerTest, SilentAdapterTimesOut) {
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(errc_of([&] { open("silent", {300ms, 0ms}); }), Errc::handshake_timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 5s);
}

TEST_F(ExternalScorerTest, DefaultHandshakeTimeoutIsThirtySeconds) {
  EXPECT_EQ(ExternalOptions{}.handshake_timeout, 30s);
  EXPECT_EQ(ExternalOptions{}.request_timeout, 0ms);
}

TEST_F(ExternalScorerTest, MalformedHandshakes) {
  EXPECT_EQ(errc_of([&] { open("no-vocab"); }), Errc::malformed_handshake);
  EXPECT_EQ(errc_of([&] { open("garbage"); }), Errc::malformed_handshake);
  EXPECT_EQ(errc_of([&] { open("refuse"); }), Errc::malformed_handshake);
}

TEST_F(ExternalScorerTest, MissingProgramIsASpawnFailure) {
  EXPECT_EQ(errc_of([] { open_external("/nonexistent/adapter", {}); }), Errc::spawn_failure);
}

TEST_F(ExternalScorerTest, NanNamesTokenIndexAndSessionSurvives) {
  const auto& s = toy_fixture().heldout.front();
  auto scorer = open("nan");
  try {
    score_sequence(*scorer, s);
    FAIL() << "expected a protocol violation";
  } catch (const ProtocolViolation& e) {
    ASSERT_TRUE(e.token_index().has_value());
    EXPECT_EQ(*e.token_index(), 17u);
  }
  // Short sequences carry no token 17, so the same session still answers.
  const auto trace = score_sequence(*scorer, s.truncated(10));
  EXPECT_EQ(trace.size(), 10u);
}

TEST_F(ExternalScorerTest, WrongLengthIsAProtocolViolation) {
  auto scorer = open("short");
  EXPECT_EQ(errc_of([&] { score_sequence(*scorer, toy_fixture().heldout.front()); }),
            Errc::protocol_violation);
}

TEST_F(ExternalScorerTest, AdapterErrorsAreBackendFailures) {
  auto scorer = open("error");
  const auto& s = toy_fixture().heldout.front();
  EXPECT_EQ(errc_of([&] { score_sequence(*scorer, s); }), Errc::backend_failure);
  EXPECT_EQ(errc_of([&] { score_sequence(*scorer, s); }), Errc::backend_failure);
}

TEST_F(ExternalScorerTest, AdapterExitMidSession) {
  auto scorer = open("exit");
  EXPECT_EQ(errc_of([&] { score_sequence(*scorer, toy_fixture().heldout.front()); }),
            Errc::backend_failure);
}

TEST_F(ExternalScorerTest, RequestTimeoutClosesTheSession) {
  auto scorer = open("slow", {30s, 200ms});
  const auto& s = toy_fixture().heldout.front();
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(errc_of([&] { score_sequence(*scorer, s); }), Errc::backend_failure);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 5s);
  EXPECT_EQ(errc_of([&] { score_sequence(*scorer, s); }), Errc::backend_failure);
}

TEST(ParseResponseLine, MapsBareNonFiniteLiteralsToNull) {
  const auto j = parse_response_line(R"({"ok":true,"nll":[1.5,NaN,Infinity,-Infinity,2]})");
  const auto& nll = j.at("nll");
  EXPECT_EQ(nll[0], 1.5);
  EXPECT_TRUE(nll[1].is_null());
  EXPECT_TRUE(nll[2].is_null());
  EXPECT_TRUE(nll[3].is_null());
  EXPECT_EQ(nll[4], 2);
}

TEST(ParseResponseLine, LeavesStringsAlone) {
  const auto j = parse_response_line(R"({"ok":false,"error":"got NaN \"Infinity\""})");
  EXPECT_EQ(j.at("error"), "got NaN \"Infinity\"");
}

TEST(ParseResponseLine, NonJsonIsAProtocolViolation) {
  EXPECT_EQ(errc_of([] { parse_response_line("hello there"); }), Errc::protocol_violation);
}

}  // namespace
}  // namespace lossprobe::scoring
