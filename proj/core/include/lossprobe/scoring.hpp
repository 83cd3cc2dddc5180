#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lossprobe/error.hpp"
#include "lossprobe/sequence.hpp"
#include "lossprobe/toymodel.hpp"
#include "lossprobe/trace.hpp"

namespace lossprobe::scoring {

enum class ScorerKind { builtin_ngram, external };

std::string to_string(ScorerKind kind);

// A model backend that returns per-token NLLs in nats. Conforming backends are
// deterministic and prefix-stable: two sequences sharing a prefix of length n
// receive identical values on indices < n. A handle is used by one worker at
// a time.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual ScorerKind kind() const = 0;
  virtual std::string name() const = 0;
  // Model path or command line.
  virtual std::string descriptor() const = 0;
  virtual std::uint32_t vocab_size() const = 0;

  // Raw backend output. Prefer score_sequence(), which validates it.
  virtual std::vector<double> score_tokens(std::span<const TokenId> tokens) = 0;
};

// Scores `seq` and checks the result: vocab_mismatch when the sequence
// vocabulary exceeds the scorer's, ProtocolViolation on a length mismatch or a
// non-finite entry (with its token index).
LossTrace score_sequence(Scorer& scorer, const TokenSequence& seq);

class BuiltinNgramScorer final : public Scorer {
 public:
  BuiltinNgramScorer(std::shared_ptr<const toy::NGramModel> model, std::string descriptor = {});

  ScorerKind kind() const override { return ScorerKind::builtin_ngram; }
  std::string name() const override { return model_->name(); }
  std::string descriptor() const override { return descriptor_; }
  std::uint32_t vocab_size() const override { return model_->vocab_size(); }
  std::vector<double> score_tokens(std::span<const TokenId> tokens) override;

  const toy::NGramModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const toy::NGramModel> model_;
  std::string descriptor_;
};

struct ExternalOptions {
  std::chrono::milliseconds handshake_timeout{30'000};
  // Zero waits indefinitely.
  std::chrono::milliseconds request_timeout{0};
};

// Adapter subprocess speaking newline-delimited JSON over stdin/stdout:
//   -> {"cmd":"hello"}   <- {"ok":true,"name":...,"vocab_size":N,"loss_base":"nats"}
//   -> {"cmd":"score","id":...,"tokens":[...]}   <- {"ok":true,"id":...,"nll":[...]}
//   -> {"cmd":"shutdown"}   <- {"ok":true}, then exit 0
// One request in flight at a time. The destructor performs the shutdown.
class ExternalScorer final : public Scorer {
 public:
  ExternalScorer(const std::string& command, const std::vector<std::string>& args,
                 ExternalOptions options = {});
  ~ExternalScorer() override;
  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  ScorerKind kind() const override { return ScorerKind::external; }
  std::string name() const override { return name_; }
  std::string descriptor() const override { return descriptor_; }
  std::uint32_t vocab_size() const override { return vocab_size_; }
  std::vector<double> score_tokens(std::span<const TokenId> tokens) override;

  const nlohmann::json& handshake() const noexcept { return handshake_; }
  // Sends shutdown and reaps the process; returns its exit status (or -1).
  int shutdown();

 private:
  nlohmann::json request(const nlohmann::json& message, std::chrono::milliseconds timeout);
  void send_line(const std::string& line);
  std::string read_line(std::chrono::milliseconds timeout, Errc timeout_code);
  void kill_child();
  int reap(std::chrono::milliseconds grace);

  std::string descriptor_;
  ExternalOptions options_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 0;
  std::string name_;
  std::uint32_t vocab_size_ = 0;
  nlohmann::json handshake_;
};

std::unique_ptr<Scorer> open_external(const std::string& command,
                                      const std::vector<std::string>& args,
                                      ExternalOptions options = {});

// Parses one adapter response line. Bare NaN / Infinity / -Infinity literals
// outside strings are mapped to null so a non-finite NLL can be reported with
// its token index instead of as an unparseable line.
nlohmann::json parse_response_line(const std::string& line);

struct ConformanceReport {
  std::size_t sequences_checked = 0;
  std::vector<std::string> failures;
  bool passed() const noexcept { return failures.empty(); }
};

// Checks determinism (repeat calls), trace length, finiteness and prefix
// stability (a suffix-altered copy must score identically on the shared
// prefix) for every sample.
ConformanceReport check_conformance(Scorer& scorer, std::span<const TokenSequence> samples);

}  // namespace lossprobe::scoring
