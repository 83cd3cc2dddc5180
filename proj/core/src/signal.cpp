#include "lossprobe/signal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "lossprobe/error.hpp"
#include "lossprobe/rng.hpp"

namespace lossprobe::signal {

namespace {

double mean_square(const AudioSignal& s) {
  if (s.samples.empty()) fail(Errc::invalid_argument, "signal is empty");
  double acc = 0.0;
  for (double v : s.samples) acc += v * v;
  return acc / static_cast<double>(s.samples.size());
}

}  // namespace

double rms_db(const AudioSignal& signal) {
  const double ms = mean_square(signal);
  if (ms == 0.0) fail(Errc::silent_signal, "silent signal has no finite RMS level");
  // 20*log10(sqrt(ms)) == 10*log10(ms)
  return 10.0 * std::log10(ms);
}

AudioSignal white_noise(std::size_t n_samples, std::uint64_t seed, std::uint32_t sample_rate_hz,
                        NoiseShape shape) {
  if (n_samples == 0) fail(Errc::invalid_argument, "white_noise needs at least one sample");
  if (sample_rate_hz == 0) fail(Errc::invalid_argument, "sample rate must be positive");
  Rng rng(seed);
  AudioSignal out{std::vector<double>(n_samples), sample_rate_hz};
  if (shape == NoiseShape::gaussian) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : out.samples) v = dist(rng);
  } else {
    const double a = std::sqrt(3.0);
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& v : out.samples) v = dist(rng);
  }
  return out;
}

LoudnessMatch match_loudness(const AudioSignal& noise, const AudioSignal& reference,
                             const LoudnessSpec& spec, bool strict) {
  if (!std::isfinite(spec.offset_db)) {
    fail(Errc::invalid_argument, "loudness offset must be finite");
  }
  LoudnessMatch result;
  if (spec.offset_db < kMinOffsetDb || spec.offset_db > kMaxOffsetDb) {
    const auto msg = fmt::format("loudness offset {} dB outside [{}, {}] dB", spec.offset_db,
                                 kMinOffsetDb, kMaxOffsetDb);
    if (strict) fail(Errc::loudness_out_of_range, msg);
    result.warnings.push_back(msg);
  }
  const double ref_db = rms_db(reference);
  const double noise_db = rms_db(noise);
  result.gain = std::pow(10.0, (ref_db + spec.offset_db - noise_db) / 20.0);
  result.signal.sample_rate_hz = noise.sample_rate_hz;
  result.signal.samples.resize(noise.samples.size());
  for (std::size_t i = 0; i < noise.samples.size(); ++i) {
    const double v = noise.samples[i] * result.gain;
    if (std::abs(v) > 1.0) ++result.clipped_samples;
    result.signal.samples[i] = v;
  }
  if (result.clipped_samples > 0) {
    result.warnings.push_back(
        fmt::format("{} samples exceed full scale after gain {}", result.clipped_samples,
                    result.gain));
  }
  return result;
}

AudioSignal splice(const AudioSignal& audio, std::size_t start_sample, const AudioSignal& noise) {
  if (audio.sample_rate_hz != noise.sample_rate_hz) {
    fail(Errc::rate_mismatch, fmt::format("cannot splice {} Hz noise into {} Hz audio",
                                          noise.sample_rate_hz, audio.sample_rate_hz));
  }
  if (start_sample > audio.size() || noise.size() > audio.size() - start_sample) {
    fail(Errc::window_out_of_bounds,
         fmt::format("splice [{}, {}) exceeds {} samples", start_sample,
                     start_sample + noise.size(), audio.size()));
  }
  AudioSignal out = audio;
  std::copy(noise.samples.begin(), noise.samples.end(),
            out.samples.begin() + static_cast<std::ptrdiff_t>(start_sample));
  return out;
}

double tokens_to_seconds(std::size_t n_tokens, double frame_rate_hz) {
  if (!(frame_rate_hz > 0.0)) fail(Errc::invalid_argument, "frame rate must be positive");
  return static_cast<double>(n_tokens) / frame_rate_hz;
}

std::size_t tokens_to_samples(std::size_t token_index, double frame_rate_hz,
                              std::uint32_t sample_rate_hz) {
  const double seconds = tokens_to_seconds(token_index, frame_rate_hz);
  return static_cast<std::size_t>(std::llround(seconds * sample_rate_hz));
}

}  // namespace lossprobe::signal
