#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lossprobe {

using TokenId = std::uint32_t;

// A discrete token sequence x[0..T). Immutable once constructed; the
// constructor enforces T >= 1 and every id < vocab_size.
class TokenSequence {
 public:
  TokenSequence(std::string id, std::vector<TokenId> tokens, std::uint32_t vocab_size,
                std::optional<double> frame_rate_hz = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  std::span<const TokenId> tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  std::optional<double> frame_rate_hz() const noexcept { return frame_rate_hz_; }

  // Same id, vocabulary and frame rate, new contents.
  TokenSequence with_tokens(std::vector<TokenId> tokens) const;
  TokenSequence truncated(std::size_t n) const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;

 private:
  std::string id_;
  std::vector<TokenId> tokens_;
  std::uint32_t vocab_size_;
  std::optional<double> frame_rate_hz_;
};

// Half-open, 0-based token range [start, start + length).
struct PerturbWindow {
  std::size_t start = 0;
  std::size_t length = 0;

  std::size_t end() const noexcept { return start + length; }
  bool contains(std::size_t i) const noexcept { return i >= start && i < end(); }
  friend bool operator==(const PerturbWindow&, const PerturbWindow&) = default;
};

// Throws window_out_of_bounds unless start >= 1 and end() <= sequence_length.
void validate_window(const PerturbWindow& window, std::size_t sequence_length);

enum class NoiseMode { constant, iid_uniform };

struct NoiseTokenModel {
  NoiseMode mode = NoiseMode::constant;
  std::vector<TokenId> noise_vocab;
  std::uint64_t seed = 0;

  // Checks the mode/vocabulary constraints; `vocab_size` is that of the target
  // sequence (0 skips the range check).
  void validate(std::uint32_t vocab_size = 0) const;
};

enum class PerturbKind { noise, shuffle };

struct PerturbationSpec {
  PerturbKind kind = PerturbKind::noise;
  PerturbWindow window;
  std::uint64_t seed = 0;
  // kind == noise
  NoiseMode noise_mode = NoiseMode::constant;
  std::vector<TokenId> noise_vocab;
  // kind == shuffle
  std::size_t segment_len = 1;

  NoiseTokenModel noise_model() const { return {noise_mode, noise_vocab, seed}; }
};

std::string to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& text);
std::string to_string(PerturbKind kind);
PerturbKind parse_perturb_kind(const std::string& text);

nlohmann::json to_json(const TokenSequence& seq);
TokenSequence sequence_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const nlohmann::json& j);

// JSON Lines: one sequence object per line. Blank lines are ignored.
std::vector<TokenSequence> read_sequences(std::istream& in);
std::vector<TokenSequence> read_sequences(const std::filesystem::path& path);
void write_sequences(std::ostream& out, std::span<const TokenSequence> seqs);
void write_sequences(const std::filesystem::path& path, std::span<const TokenSequence> seqs);

}  // namespace lossprobe
