#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lossprobe/analysis.hpp"
#include "lossprobe/scoring.hpp"
#include "lossprobe/sequence.hpp"
#include "lossprobe/stats.hpp"
#include "lossprobe/toymodel.hpp"

namespace lossprobe::harness {

inline constexpr int kConfigVersion = 1;

std::vector<std::size_t> default_lengths(PerturbKind kind);

struct ScorerConfig {
  scoring::ScorerKind kind = scoring::ScorerKind::builtin_ngram;
  // builtin-ngram: serialized model; empty means "train from the toy block".
  std::filesystem::path model;
  // external: program and arguments.
  std::string command;
  std::vector<std::string> args;
  std::chrono::milliseconds handshake_timeout{30'000};
  std::chrono::milliseconds request_timeout{0};
};

// Desk-scale experiment: train the n-gram on a generated corpus and evaluate
// on held-out sequences drawn after it (same motif bank, no embedded noise).
struct ToySetup {
  toy::CorpusConfig corpus;
  std::size_t order = 4;
  double alpha = 0.1;
  std::size_t heldout = 50;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  PerturbKind kind = PerturbKind::noise;
  std::vector<std::size_t> lengths = default_lengths(PerturbKind::noise);
  std::size_t start = 250;
  std::size_t sequence_length = 750;
  std::uint64_t master_seed = 0;
  std::size_t workers = 1;

  NoiseMode noise_mode = NoiseMode::constant;
  std::vector<TokenId> noise_vocab = {64};
  // Shuffle sweeps: a window of L tokens is cut into this many segments
  // (segment length ceil(L / segments_per_window)).
  std::size_t segments_per_window = 4;

  analysis::DetectorParams detector;
  stats::Alternative alternative = stats::Alternative::two_sided;

  ScorerConfig scorer;
  std::optional<std::filesystem::path> samples;
  std::optional<ToySetup> toy;
  std::vector<std::string> formats = {"csv", "json"};

  void validate() const;
};

// YAML schema (version 1); every key is optional except `version`:
//
//   version: 1
//   experiment: {kind, lengths, start, sequence_length, master_seed, workers}
//   noise:      {mode: constant|iid-uniform, vocab: [ids]}
//   shuffle:    {segments_per_window}
//   analysis:   {smooth_len, run_len, zero_tol, alternative}
//   scorer:     {kind: builtin-ngram|external, model, command, args,
//                handshake_timeout_ms, request_timeout_ms}
//   samples:    path to a JSON Lines token file
//   toy:        {corpus: {...CorpusConfig fields}, order, alpha, heldout}
//   report:     {formats: [csv, json, svg]}
//
// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& yaml_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace lossprobe::harness
