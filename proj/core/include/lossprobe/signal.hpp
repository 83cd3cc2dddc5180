#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lossprobe::signal {

inline constexpr std::uint32_t kDefaultSampleRate = 32000;
inline constexpr double kMinOffsetDb = -30.0;
inline constexpr double kMaxOffsetDb = -12.0;

struct AudioSignal {
  std::vector<double> samples;
  std::uint32_t sample_rate_hz = kDefaultSampleRate;

  std::size_t size() const noexcept { return samples.size(); }
  friend bool operator==(const AudioSignal&, const AudioSignal&) = default;
};

// Offset of the noise level relative to the reference RMS, in dB.
struct LoudnessSpec {
  double offset_db = -20.0;
};

enum class NoiseShape { gaussian, uniform };

// 20*log10(RMS) relative to full scale 1.0. Errors: empty -> invalid_argument,
// all-zero -> silent_signal.
double rms_db(const AudioSignal& signal);

// Unit-variance i.i.d. noise, deterministic in seed.
AudioSignal white_noise(std::size_t n_samples, std::uint64_t seed,
                        std::uint32_t sample_rate_hz = kDefaultSampleRate,
                        NoiseShape shape = NoiseShape::gaussian);

struct LoudnessMatch {
  AudioSignal signal;
  double gain = 1.0;
  // Samples whose magnitude exceeds 1.0 after scaling. They are left as-is.
  std::size_t clipped_samples = 0;
  std::vector<std::string> warnings;
};

// Scales `noise` by one gain so rms_db(out) == rms_db(reference) + offset_db.
// An offset outside [-30, -12] dB is a warning, or loudness_out_of_range when
// `strict` is set.
LoudnessMatch match_loudness(const AudioSignal& noise, const AudioSignal& reference,
                             const LoudnessSpec& spec, bool strict = false);

// Replaces audio[start, start + noise.size()) by noise. Errors: rate_mismatch,
// window_out_of_bounds.
AudioSignal splice(const AudioSignal& audio, std::size_t start_sample, const AudioSignal& noise);

double tokens_to_seconds(std::size_t n_tokens, double frame_rate_hz);
// Sample index at which token `token_index` begins.
std::size_t tokens_to_samples(std::size_t token_index, double frame_rate_hz,
                              std::uint32_t sample_rate_hz);

enum class WavEncoding { pcm16, float32 };

// Mono RIFF/WAVE, 16-bit PCM or 32-bit IEEE float. When `expected_rate` is
// non-zero a different file rate is a rate_mismatch error.
AudioSignal read_wav(const std::filesystem::path& path,
                     std::uint32_t expected_rate = kDefaultSampleRate);
void write_wav(const std::filesystem::path& path, const AudioSignal& signal,
               WavEncoding encoding = WavEncoding::float32);

// Raw little-endian float32 samples plus a `<path>.json` sidecar holding
// sample_rate_hz and num_samples.
void write_raw_f32(const std::filesystem::path& path, const AudioSignal& signal);
AudioSignal read_raw_f32(const std::filesystem::path& path);

}  // namespace lossprobe::signal
