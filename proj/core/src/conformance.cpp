#include <cmath>

#include <fmt/format.h>

#include "lossprobe/error.hpp"
#include "lossprobe/scoring.hpp"

namespace lossprobe::scoring {

ConformanceReport check_conformance(Scorer& scorer, std::span<const TokenSequence> samples) {
  ConformanceReport report;
  for (const auto& seq : samples) {
    ++report.sequences_checked;
    const auto note = [&](const std::string& what) {
      report.failures.push_back(fmt::format("{}: {}", seq.id(), what));
    };
    try {
      const auto first = scorer.score_tokens(seq.tokens());
      if (first.size() != seq.size()) {
        note(fmt::format("returned {} values for {} tokens", first.size(), seq.size()));
        continue;
      }
      bool finite = true;
      for (std::size_t i = 0; i < first.size() && finite; ++i) {
        if (!std::isfinite(first[i])) {
          note(fmt::format("non-finite value at token {}", i));
          finite = false;
        }
      }
      if (!finite) continue;

      if (scorer.score_tokens(seq.tokens()) != first) note("repeat call differs");

      // Shared prefix of half the sequence, every later token altered.
      const std::size_t prefix = seq.size() / 2;
      if (prefix == 0 || seq.vocab_size() < 2) continue;
      std::vector<TokenId> altered(seq.tokens().begin(), seq.tokens().end());
      for (std::size_t i = prefix; i < altered.size(); ++i) {
        altered[i] = (altered[i] + 1) % seq.vocab_size();
      }
      const auto second = scorer.score_tokens(altered);
      if (second.size() != altered.size()) {
        note("length mismatch on suffix-altered copy");
        continue;
      }
      for (std::size_t i = 0; i < prefix; ++i) {
        if (second[i] != first[i]) {
          note(fmt::format("prefix instability at token {} ({} vs {})", i, first[i], second[i]));
          break;
        }
      }
    } catch (const Error& e) {
      note(e.what());
    }
  }
  return report;
}

}  // namespace lossprobe::scoring
