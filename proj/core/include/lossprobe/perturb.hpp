#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lossprobe/sequence.hpp"

namespace lossprobe {

// Replaces tokens inside `window` with `noise_tokens`; everything else is
// copied unchanged. Errors: window_out_of_bounds, length_mismatch,
// token_out_of_vocab.
TokenSequence inject_tokens(const TokenSequence& seq, const PerturbWindow& window,
                            std::span<const TokenId> noise_tokens);

// Cuts the window into consecutive segments of `segment_len` tokens (the last
// one may be shorter and is permuted like any other) and reorders them by a
// uniformly random permutation drawn from `seed`.
TokenSequence shuffle_segments(const TokenSequence& seq, const PerturbWindow& window,
                               std::size_t segment_len, std::uint64_t seed);

// Deterministic in (model, length). Constant mode repeats the single noise
// token; iid mode draws uniformly from the noise vocabulary.
std::vector<TokenId> make_noise_tokens(std::size_t length, const NoiseTokenModel& model);

// Applies a serialized perturbation spec (noise injection or shuffle).
TokenSequence apply_perturbation(const TokenSequence& seq, const PerturbationSpec& spec);

}  // namespace lossprobe
