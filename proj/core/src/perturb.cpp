#include "lossprobe/perturb.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "lossprobe/error.hpp"
#include "lossprobe/rng.hpp"

namespace lossprobe {

TokenSequence inject_tokens(const TokenSequence& seq, const PerturbWindow& window,
                            std::span<const TokenId> noise_tokens) {
  validate_window(window, seq.size());
  if (noise_tokens.size() != window.length) {
    fail(Errc::length_mismatch, fmt::format("{} noise tokens for a window of length {}",
                                            noise_tokens.size(), window.length));
  }
  for (TokenId t : noise_tokens) {
    if (t >= seq.vocab_size()) {
      fail(Errc::token_out_of_vocab,
           fmt::format("noise token {} >= vocab_size {}", t, seq.vocab_size()));
    }
  }
  std::vector<TokenId> out(seq.tokens().begin(), seq.tokens().end());
  std::copy(noise_tokens.begin(), noise_tokens.end(), out.begin() + window.start);
  return seq.with_tokens(std::move(out));
}

TokenSequence shuffle_segments(const TokenSequence& seq, const PerturbWindow& window,
                               std::size_t segment_len, std::uint64_t seed) {
  validate_window(window, seq.size());
  if (segment_len == 0) fail(Errc::invalid_argument, "segment_len must be >= 1");

  const auto src = seq.tokens();
  const std::size_t n_segments = (window.length + segment_len - 1) / segment_len;
  std::vector<std::size_t> order(n_segments);
  for (std::size_t i = 0; i < n_segments; ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<TokenId> out(src.begin(), src.end());
  auto dst = out.begin() + window.start;
  for (std::size_t seg : order) {
    const std::size_t b = window.start + seg * segment_len;
    const std::size_t e = std::min(b + segment_len, window.end());
    dst = std::copy(src.begin() + b, src.begin() + e, dst);
  }
  return seq.with_tokens(std::move(out));
}

std::vector<TokenId> make_noise_tokens(std::size_t length, const NoiseTokenModel& model) {
  model.validate();
  if (model.mode == NoiseMode::constant) {
    return std::vector<TokenId>(length, model.noise_vocab.front());
  }
  Rng rng(model.seed);
  std::vector<TokenId> out(length);
  const std::uint64_t last = model.noise_vocab.size() - 1;
  for (auto& t : out) t = model.noise_vocab[rng.uniform_int(0, last)];
  return out;
}

TokenSequence apply_perturbation(const TokenSequence& seq, const PerturbationSpec& spec) {
  if (spec.kind == PerturbKind::shuffle) {
    return shuffle_segments(seq, spec.window, spec.segment_len, spec.seed);
  }
  const auto model = spec.noise_model();
  model.validate(seq.vocab_size());
  return inject_tokens(seq, spec.window, make_noise_tokens(spec.window.length, model));
}

}  // namespace lossprobe
