#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lossprobe {

// Every failure the library reports carries one of these codes. Codes up to
// `io_error` are caller mistakes (bad input, bad files); the rest come from a
// scoring backend misbehaving at runtime.
enum class Errc {
  invalid_argument,
  window_out_of_bounds,
  length_mismatch,
  token_out_of_vocab,
  empty_noise_vocab,
  silent_signal,
  loudness_out_of_range,
  rate_mismatch,
  vocab_mismatch,
  scorer_mismatch,
  constant_input,
  too_few_points,
  empty_region,
  parse_error,
  io_error,
  // runtime / backend
  backend_failure,
  protocol_violation,
  spawn_failure,
  handshake_timeout,
  malformed_handshake,
  all_samples_failed,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

  // True for input/validation problems, false for backend/runtime failures.
  bool is_validation() const noexcept { return code_ <= Errc::io_error; }

 private:
  Errc code_;
};

// A backend answered with something the scoring protocol forbids.
// `token_index` is set when the violation concerns a specific NLL entry.
class ProtocolViolation : public Error {
 public:
  ProtocolViolation(const std::string& message,
                    std::optional<std::size_t> token_index = std::nullopt)
      : Error(Errc::protocol_violation, message), token_index_(token_index) {}

  std::optional<std::size_t> token_index() const noexcept { return token_index_; }

 private:
  std::optional<std::size_t> token_index_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace lossprobe
