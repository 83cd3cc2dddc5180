#pragma once

#include <numeric>
#include <string>
#include <vector>

namespace lossprobe {

// Per-token negative log-likelihoods (nats) of one sequence under one scorer.
// Only per-token values are stored; the sequence loss is always their sum.
struct LossTrace {
  std::vector<double> values;
  std::string sequence_id;
  std::string scorer_id;

  std::size_t size() const noexcept { return values.size(); }
  double total() const noexcept { return std::accumulate(values.begin(), values.end(), 0.0); }

  friend bool operator==(const LossTrace&, const LossTrace&) = default;
};

}  // namespace lossprobe
