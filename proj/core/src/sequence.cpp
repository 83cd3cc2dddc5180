#include "lossprobe/sequence.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "lossprobe/error.hpp"

namespace lossprobe {

TokenSequence::TokenSequence(std::string id, std::vector<TokenId> tokens,
                             std::uint32_t vocab_size, std::optional<double> frame_rate_hz)
    : id_(std::move(id)),
      tokens_(std::move(tokens)),
      vocab_size_(vocab_size),
      frame_rate_hz_(frame_rate_hz) {
  if (vocab_size_ == 0) fail(Errc::invalid_argument, "vocab_size must be positive");
  if (tokens_.empty()) fail(Errc::invalid_argument, fmt::format("sequence '{}' is empty", id_));
  if (frame_rate_hz_ && !(std::isfinite(*frame_rate_hz_) && *frame_rate_hz_ > 0.0)) {
    fail(Errc::invalid_argument, fmt::format("sequence '{}': frame_rate_hz must be positive", id_));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] >= vocab_size_) {
      fail(Errc::token_out_of_vocab,
           fmt::format("sequence '{}': token {} at index {} >= vocab_size {}", id_, tokens_[i],
                       i, vocab_size_));
    }
  }
}

TokenSequence TokenSequence::with_tokens(std::vector<TokenId> tokens) const {
  return TokenSequence(id_, std::move(tokens), vocab_size_, frame_rate_hz_);
}

TokenSequence TokenSequence::truncated(std::size_t n) const {
  if (n >= tokens_.size()) return *this;
  return with_tokens(std::vector<TokenId>(tokens_.begin(), tokens_.begin() + n));
}

void validate_window(const PerturbWindow& window, std::size_t sequence_length) {
  if (window.start < 1) {
    fail(Errc::window_out_of_bounds, "window start must be >= 1 (one context token required)");
  }
  if (window.start > sequence_length || window.length > sequence_length - window.start) {
    fail(Errc::window_out_of_bounds,
         fmt::format("window [{}, {}) exceeds sequence length {}", window.start,
                     window.start + window.length, sequence_length));
  }
}

void NoiseTokenModel::validate(std::uint32_t vocab_size) const {
  if (noise_vocab.empty()) fail(Errc::empty_noise_vocab, "noise vocabulary is empty");
  if (mode == NoiseMode::constant && noise_vocab.size() != 1) {
    fail(Errc::invalid_argument,
         fmt::format("constant noise requires exactly one noise token, got {}",
                     noise_vocab.size()));
  }
  if (vocab_size != 0) {
    for (TokenId t : noise_vocab) {
      if (t >= vocab_size) {
        fail(Errc::token_out_of_vocab,
             fmt::format("noise token {} >= vocab_size {}", t, vocab_size));
      }
    }
  }
}

std::string to_string(NoiseMode mode) {
  return mode == NoiseMode::constant ? "constant" : "iid-uniform";
}

NoiseMode parse_noise_mode(const std::string& text) {
  if (text == "constant") return NoiseMode::constant;
  if (text == "iid-uniform" || text == "iid") return NoiseMode::iid_uniform;
  fail(Errc::parse_error, fmt::format("unknown noise mode '{}'", text));
}

std::string to_string(PerturbKind kind) { return kind == PerturbKind::noise ? "noise" : "shuffle"; }

PerturbKind parse_perturb_kind(const std::string& text) {
  if (text == "noise") return PerturbKind::noise;
  if (text == "shuffle") return PerturbKind::shuffle;
  fail(Errc::parse_error, fmt::format("unknown perturbation kind '{}'", text));
}

nlohmann::json to_json(const TokenSequence& seq) {
  nlohmann::json j;
  j["id"] = seq.id();
  j["tokens"] = std::vector<TokenId>(seq.tokens().begin(), seq.tokens().end());
  j["vocab_size"] = seq.vocab_size();
  if (seq.frame_rate_hz()) j["frame_rate_hz"] = *seq.frame_rate_hz();
  return j;
}

TokenSequence sequence_from_json(const nlohmann::json& j) {
  try {
    std::optional<double> rate;
    if (j.contains("frame_rate_hz") && !j.at("frame_rate_hz").is_null()) {
      rate = j.at("frame_rate_hz").get<double>();
    }
    const auto& raw = j.at("tokens");
    std::vector<TokenId> tokens;
    tokens.reserve(raw.size());
    for (const auto& t : raw) {
      if (!t.is_number_integer() || t.get<std::int64_t>() < 0) {
        fail(Errc::parse_error, "token ids must be non-negative integers");
      }
      tokens.push_back(t.get<TokenId>());
    }
    return TokenSequence(j.at("id").get<std::string>(), std::move(tokens),
                         j.at("vocab_size").get<std::uint32_t>(), rate);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("bad sequence object: {}", e.what()));
  }
}

nlohmann::json to_json(const PerturbationSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind);
  j["start"] = spec.window.start;
  j["length"] = spec.window.length;
  j["seed"] = spec.seed;
  if (spec.kind == PerturbKind::noise) {
    j["noise_mode"] = to_string(spec.noise_mode);
    j["noise_vocab"] = spec.noise_vocab;
  } else {
    j["segment_len"] = spec.segment_len;
  }
  return j;
}

PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
  try {
    PerturbationSpec spec;
    spec.kind = parse_perturb_kind(j.at("kind").get<std::string>());
    spec.window = {j.at("start").get<std::size_t>(), j.at("length").get<std::size_t>()};
    spec.seed = j.value("seed", std::uint64_t{0});
    if (spec.kind == PerturbKind::noise) {
      spec.noise_mode = parse_noise_mode(j.at("noise_mode").get<std::string>());
      spec.noise_vocab = j.at("noise_vocab").get<std::vector<TokenId>>();
    } else {
      spec.segment_len = j.at("segment_len").get<std::size_t>();
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("bad perturbation spec: {}", e.what()));
  }
}

std::vector<TokenSequence> read_sequences(std::istream& in) {
  std::vector<TokenSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::parse_error, fmt::format("line {}: {}", lineno, e.what()));
    }
    out.push_back(sequence_from_json(j));
  }
  return out;
}

std::vector<TokenSequence> read_sequences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, fmt::format("cannot open '{}'", path.string()));
  return read_sequences(in);
}

void write_sequences(std::ostream& out, std::span<const TokenSequence> seqs) {
  for (const auto& s : seqs) out << to_json(s).dump() << '\n';
}

void write_sequences(const std::filesystem::path& path, std::span<const TokenSequence> seqs) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, fmt::format("cannot write '{}'", path.string()));
  write_sequences(out, seqs);
  if (!out) fail(Errc::io_error, fmt::format("write to '{}' failed", path.string()));
}

}  // namespace lossprobe
