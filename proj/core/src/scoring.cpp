#include "lossprobe/scoring.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lossprobe/error.hpp"

namespace lossprobe::scoring {

std::string to_string(ScorerKind kind) {
  return kind == ScorerKind::builtin_ngram ? "builtin-ngram" : "external";
}

LossTrace score_sequence(Scorer& scorer, const TokenSequence& seq) {
  if (seq.vocab_size() > scorer.vocab_size()) {
    fail(Errc::vocab_mismatch,
         fmt::format("sequence '{}' has vocab {} but scorer '{}' declares {}", seq.id(),
                     seq.vocab_size(), scorer.name(), scorer.vocab_size()));
  }
  auto values = scorer.score_tokens(seq.tokens());
  if (values.size() != seq.size()) {
    throw ProtocolViolation(fmt::format("scorer returned {} values for {} tokens", values.size(),
                                        seq.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ProtocolViolation(
          fmt::format("non-finite NLL at token {} of sequence '{}'", i, seq.id()), i);
    }
  }
  return {std::move(values), seq.id(), scorer.name()};
}

BuiltinNgramScorer::BuiltinNgramScorer(std::shared_ptr<const toy::NGramModel> model,
                                       std::string descriptor)
    : model_(std::move(model)), descriptor_(std::move(descriptor)) {
  if (!model_) fail(Errc::invalid_argument, "null n-gram model");
}

std::vector<double> BuiltinNgramScorer::score_tokens(std::span<const TokenId> tokens) {
  for (TokenId t : tokens) {
    if (t >= model_->vocab_size()) {
      fail(Errc::vocab_mismatch,
           fmt::format("token {} outside model vocab {}", t, model_->vocab_size()));
    }
  }
  return model_->token_nll(tokens);
}

std::unique_ptr<Scorer> open_external(const std::string& command,
                                      const std::vector<std::string>& args,
                                      ExternalOptions options) {
  return std::make_unique<ExternalScorer>(command, args, options);
}

}  // namespace lossprobe::scoring
