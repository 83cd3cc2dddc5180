#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "lossprobe/error.hpp"
#include "lossprobe/rng.hpp"
#include "lossprobe/toymodel.hpp"

namespace lossprobe::toy {

void CorpusConfig::validate() const {
  const auto bad = [](const std::string& why) { fail(Errc::invalid_argument, "corpus config: " + why); };
  if (music_vocab_size == 0) bad("music_vocab_size must be positive");
  if (noise_vocab.empty()) bad("noise_vocab must not be empty");
  std::set<TokenId> seen;
  for (TokenId t : noise_vocab) {
    if (t < music_vocab_size) bad(fmt::format("noise token {} overlaps the music vocabulary", t));
    if (t >= vocab_size()) {
      bad(fmt::format("noise token {} outside [{}, {})", t, music_vocab_size, vocab_size()));
    }
    if (!seen.insert(t).second) bad(fmt::format("duplicate noise token {}", t));
  }
  if (motif_len == 0 || motif_count == 0 || repeats_per_seq == 0) {
    bad("motif_len, motif_count and repeats_per_seq must be positive");
  }
  if (sequence_length() < 2) bad("sequences need at least two tokens");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) bad("mutation_rate must be in [0, 1]");
  if (!(noise_mix_fraction >= 0.0 && noise_mix_fraction <= 1.0)) {
    bad("noise_mix_fraction must be in [0, 1]");
  }
  if (n_sequences == 0) bad("n_sequences must be positive");
}

nlohmann::json to_json(const CorpusConfig& cfg) {
  return {{"music_vocab_size", cfg.music_vocab_size},
          {"noise_vocab", cfg.noise_vocab},
          {"motif_len", cfg.motif_len},
          {"motif_count", cfg.motif_count},
          {"repeats_per_seq", cfg.repeats_per_seq},
          {"mutation_rate", cfg.mutation_rate},
          {"noise_mix_fraction", cfg.noise_mix_fraction},
          {"n_sequences", cfg.n_sequences},
          {"seed", cfg.seed}};
}

CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
  CorpusConfig cfg;
  try {
    cfg.music_vocab_size = j.value("music_vocab_size", cfg.music_vocab_size);
    cfg.noise_vocab = j.value("noise_vocab", cfg.noise_vocab);
    cfg.motif_len = j.value("motif_len", cfg.motif_len);
    cfg.motif_count = j.value("motif_count", cfg.motif_count);
    cfg.repeats_per_seq = j.value("repeats_per_seq", cfg.repeats_per_seq);
    cfg.mutation_rate = j.value("mutation_rate", cfg.mutation_rate);
    cfg.noise_mix_fraction = j.value("noise_mix_fraction", cfg.noise_mix_fraction);
    cfg.n_sequences = j.value("n_sequences", cfg.n_sequences);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("corpus config: {}", e.what()));
  }
  return cfg;
}

std::vector<TokenSequence> gen_corpus(const CorpusConfig& cfg, std::size_t first_index) {
  cfg.validate();
  const Rng root(cfg.seed);
  const TokenId music_max = cfg.music_vocab_size - 1;

  std::vector<std::vector<TokenId>> motifs(cfg.motif_count);
  Rng motif_rng = root.split("motifs");
  for (auto& m : motifs) {
    m.resize(cfg.motif_len);
    for (auto& t : m) t = static_cast<TokenId>(motif_rng.uniform_int(0, music_max));
  }

  const std::size_t T = cfg.sequence_length();
  std::vector<TokenSequence> out;
  out.reserve(cfg.n_sequences);
  for (std::size_t k = 0; k < cfg.n_sequences; ++k) {
    const std::size_t index = first_index + k;
    Rng rng = root.split("sequence", index);
    const auto& motif = motifs[rng.uniform_int(0, cfg.motif_count - 1)];

    std::vector<TokenId> tokens;
    tokens.reserve(T);
    for (std::size_t r = 0; r < cfg.repeats_per_seq; ++r) {
      for (TokenId t : motif) {
        tokens.push_back(rng.bernoulli(cfg.mutation_rate)
                             ? static_cast<TokenId>(rng.uniform_int(0, music_max))
                             : t);
      }
    }

    // Noise run: length in [min(motif_len, T-1), max(that, T/4)], start >= 1.
    if (rng.bernoulli(cfg.noise_mix_fraction)) {
      const std::size_t lo = std::min(cfg.motif_len, T - 1);
      const std::size_t hi = std::min(std::max(lo, T / 4), T - 1);
      const std::size_t len = rng.uniform_int(lo, hi);
      const std::size_t start = rng.uniform_int(1, T - len);
      const TokenId noise = cfg.noise_vocab[rng.uniform_int(0, cfg.noise_vocab.size() - 1)];
      std::fill_n(tokens.begin() + static_cast<std::ptrdiff_t>(start), len, noise);
    }

    out.emplace_back(fmt::format("toy-{:06d}", index), std::move(tokens), cfg.vocab_size(),
                     50.0);
  }
  return out;
}

}  // namespace lossprobe::toy
