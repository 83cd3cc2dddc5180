#include "lossprobe/error.hpp"

namespace lossprobe {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::window_out_of_bounds: return "window out of bounds";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::token_out_of_vocab: return "token out of vocabulary";
    case Errc::empty_noise_vocab: return "empty noise vocabulary";
    case Errc::silent_signal: return "silent signal";
    case Errc::loudness_out_of_range: return "loudness offset out of range";
    case Errc::rate_mismatch: return "sample rate mismatch";
    case Errc::vocab_mismatch: return "vocabulary mismatch";
    case Errc::scorer_mismatch: return "scorer mismatch";
    case Errc::constant_input: return "constant input";
    case Errc::too_few_points: return "too few points";
    case Errc::empty_region: return "empty region";
    case Errc::parse_error: return "parse error";
    case Errc::io_error: return "i/o error";
    case Errc::backend_failure: return "backend failure";
    case Errc::protocol_violation: return "protocol violation";
    case Errc::spawn_failure: return "spawn failure";
    case Errc::handshake_timeout: return "handshake timeout";
    case Errc::malformed_handshake: return "malformed handshake";
    case Errc::all_samples_failed: return "all samples failed";
  }
  return "unknown error";
}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace lossprobe
