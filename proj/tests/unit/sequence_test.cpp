#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lossprobe/sequence.hpp"

namespace lossprobe {
namespace {

using testing::errc_of;

TEST(TokenSequence, RejectsEmptyAndOutOfVocab) {
  EXPECT_EQ(errc_of([] { TokenSequence("s", {}, 4); }), Errc::invalid_argument);
  EXPECT_EQ(errc_of([] { TokenSequence("s", {1, 4}, 4); }), Errc::token_out_of_vocab);
  EXPECT_EQ(errc_of([] { TokenSequence("s", {1}, 0); }), Errc::invalid_argument);
  EXPECT_EQ(errc_of([] { TokenSequence("s", {1}, 4, 0.0); }), Errc::invalid_argument);
  EXPECT_NO_THROW(TokenSequence("s", {0, 3}, 4, 50.0));
}

TEST(TokenSequence, TruncatedKeepsPrefixAndMetadata) {
  const TokenSequence s("s", {1, 2, 3, 0}, 4, 50.0);
  const auto t = s.truncated(2);
  EXPECT_EQ(std::vector<TokenId>(t.tokens().begin(), t.tokens().end()),
            (std::vector<TokenId>{1, 2}));
  EXPECT_EQ(t.id(), "s");
  EXPECT_EQ(t.vocab_size(), 4u);
  EXPECT_EQ(t.frame_rate_hz(), 50.0);
}

TEST(PerturbWindow, ValidationBounds) {
  EXPECT_NO_THROW(validate_window({1, 9}, 10));
  EXPECT_NO_THROW(validate_window({10, 0}, 10));
  EXPECT_EQ(errc_of([] { validate_window({0, 2}, 10); }), Errc::window_out_of_bounds);
  EXPECT_EQ(errc_of([] { validate_window({5, 6}, 10); }), Errc::window_out_of_bounds);
  EXPECT_EQ(errc_of([] { validate_window({11, 0}, 10); }), Errc::window_out_of_bounds);
  EXPECT_TRUE(PerturbWindow({2, 3}).contains(4));
  EXPECT_FALSE(PerturbWindow({2, 3}).contains(5));
}

TEST(NoiseTokenModel, Validation) {
  EXPECT_EQ(errc_of([] { NoiseTokenModel{NoiseMode::constant, {}, 0}.validate(); }),
            Errc::empty_noise_vocab);
  EXPECT_EQ(errc_of([] { NoiseTokenModel{NoiseMode::constant, {1, 2}, 0}.validate(); }),
            Errc::invalid_argument);
  EXPECT_EQ(errc_of([] { NoiseTokenModel{NoiseMode::iid_uniform, {1, 9}, 0}.validate(8); }),
            Errc::token_out_of_vocab);
}

TEST(SequenceIo, JsonLinesRoundTrip) {
  const std::vector<TokenSequence> seqs = {TokenSequence("a", {0, 1, 2}, 3),
                                           TokenSequence("b,c", {2}, 3, 50.0)};
  std::stringstream buf;
  write_sequences(buf, seqs);
  EXPECT_EQ(read_sequences(buf), seqs);
}

TEST(SequenceIo, MalformedLinesAreParseErrors) {
  std::istringstream not_json("{\"id\":\"a\",\"tokens\":[1]}\nnope\n");
  EXPECT_EQ(errc_of([&] { read_sequences(not_json); }), Errc::parse_error);
  std::istringstream negative(R"({"id":"a","tokens":[-1],"vocab_size":3})");
  EXPECT_EQ(errc_of([&] { read_sequences(negative); }), Errc::parse_error);
  std::istringstream out_of_vocab(R"({"id":"a","tokens":[3],"vocab_size":3})");
  EXPECT_EQ(errc_of([&] { read_sequences(out_of_vocab); }), Errc::token_out_of_vocab);
  EXPECT_EQ(errc_of([] { read_sequences(std::filesystem::path("/nonexistent/x.jsonl")); }),
            Errc::io_error);
}

TEST(PerturbationSpec, JsonRoundTrip) {
  PerturbationSpec noise;
  noise.window = {250, 200};
  noise.seed = 99;
  noise.noise_mode = NoiseMode::iid_uniform;
  noise.noise_vocab = {64, 65};
  const auto back = perturbation_from_json(to_json(noise));
  EXPECT_EQ(back.kind, PerturbKind::noise);
  EXPECT_EQ(back.window.start, 250u);
  EXPECT_EQ(back.window.length, 200u);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.noise_mode, NoiseMode::iid_uniform);
  EXPECT_EQ(back.noise_vocab, noise.noise_vocab);

  PerturbationSpec shuffle;
  shuffle.kind = PerturbKind::shuffle;
  shuffle.window = {3, 12};
  shuffle.segment_len = 5;
  EXPECT_EQ(perturbation_from_json(to_json(shuffle)).segment_len, 5u);
  EXPECT_EQ(errc_of([] { perturbation_from_json({{"kind", "blur"}, {"start", 1}, {"length", 1}}); }),
            Errc::parse_error);
}

TEST(NoiseMode, StringForms) {
  EXPECT_EQ(to_string(NoiseMode::iid_uniform), "iid-uniform");
  EXPECT_EQ(parse_noise_mode("constant"), NoiseMode::constant);
  EXPECT_EQ(errc_of([] { parse_noise_mode("pink"); }), Errc::parse_error);
}

}  // namespace
}  // namespace lossprobe
