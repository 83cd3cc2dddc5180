#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lossprobe/sequence.hpp"
#include "lossprobe/trace.hpp"

namespace lossprobe::toy {

// Synthetic "music" corpus. Each sequence repeats one motif from a fixed bank
// `repeats_per_seq` times with point mutations; a fraction of sequences also
// carries one constant run of a noise token, which is what teaches the scorer
// that noise is cheap to predict.
struct CorpusConfig {
  std::uint32_t music_vocab_size = 64;
  std::vector<TokenId> noise_vocab = {64, 65, 66, 67};
  std::size_t motif_len = 8;
  std::size_t motif_count = 16;
  std::size_t repeats_per_seq = 12;
  double mutation_rate = 0.05;
  double noise_mix_fraction = 0.1;
  std::size_t n_sequences = 500;
  std::uint64_t seed = 1;

  std::uint32_t vocab_size() const {
    return music_vocab_size + static_cast<std::uint32_t>(noise_vocab.size());
  }
  std::size_t sequence_length() const { return motif_len * repeats_per_seq; }
  void validate() const;
};

nlohmann::json to_json(const CorpusConfig& cfg);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);

// Sequences `first_index .. first_index + n_sequences - 1`. Each sequence has
// its own seed stream, so a held-out set drawn with a later `first_index`
// shares the motif bank with the training set but no sequences.
std::vector<TokenSequence> gen_corpus(const CorpusConfig& cfg, std::size_t first_index = 0);

// Fixed-order Laplace-smoothed n-gram model without backoff. Contexts shorter
// than `order` are left-padded with bos() == vocab_size, which is never
// predicted.
class NGramModel {
 public:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;
  };
  using Context = std::vector<TokenId>;

  NGramModel(std::size_t order, std::uint32_t vocab_size, double alpha);

  std::size_t order() const noexcept { return order_; }
  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  double alpha() const noexcept { return alpha_; }
  TokenId bos() const noexcept { return vocab_size_; }
  const std::map<Context, ContextCounts>& contexts() const noexcept { return contexts_; }
  std::string name() const;

  void add_sequence(std::span<const TokenId> tokens);

  // p(next | context); context must hold exactly order() ids (bos allowed).
  double probability(std::span<const TokenId> context, TokenId next) const;
  std::vector<double> distribution(std::span<const TokenId> context) const;

  // -ln p(x_t | x_{t-k..t-1}) for every position.
  std::vector<double> token_nll(std::span<const TokenId> tokens) const;

  nlohmann::json to_json() const;
  static NGramModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static NGramModel load(const std::filesystem::path& path);

 private:
  std::size_t order_;
  std::uint32_t vocab_size_;
  double alpha_;
  std::map<Context, ContextCounts> contexts_;
};

NGramModel train_ngram(std::span<const TokenSequence> corpus, std::size_t order, double alpha);

// Errors: vocab_mismatch when the sequence vocabulary exceeds the model's.
LossTrace score_ngram(const NGramModel& model, const TokenSequence& seq);

}  // namespace lossprobe::toy
