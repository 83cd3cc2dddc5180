#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lossprobe/error.hpp"
#include "lossprobe/signal.hpp"

namespace lossprobe::signal {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_error, fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::io_error, fmt::format("write to '{}' failed", path.string()));
}

float f32_from_le(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

void put_f32(std::vector<unsigned char>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

}  // namespace

AudioSignal read_wav(const std::filesystem::path& path, std::uint32_t expected_rate) {
  const auto bytes = slurp(path);
  const auto bad = [&](const std::string& why) {
    fail(Errc::parse_error, fmt::format("'{}': {}", path.string(), why));
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    bad("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) bad("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) bad("short fmt chunk");
      format = get_u16(chunk + 8);
      channels = get_u16(chunk + 10);
      rate = get_u32(chunk + 12);
      bits = get_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) bad("short extensible fmt chunk");
        format = get_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (format == 0) bad("missing fmt chunk");
  if (data == nullptr) bad("missing data chunk");
  if (channels != 1) bad(fmt::format("expected mono, got {} channels", channels));
  if (expected_rate != 0 && rate != expected_rate) {
    fail(Errc::rate_mismatch, fmt::format("'{}': sample rate {} Hz, expected {} Hz",
                                          path.string(), rate, expected_rate));
  }

  AudioSignal out;
  out.sample_rate_hz = rate;
  if (format == kFormatPcm && bits == 16) {
    out.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(get_u16(data + 2 * i));
      out.samples[i] = static_cast<double>(v) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    out.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      out.samples[i] = f32_from_le(data + 4 * i);
    }
  } else {
    bad(fmt::format("unsupported encoding (format {}, {} bits)", format, bits));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal,
               WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(signal.size() * block);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, signal.sample_rate_hz);
  put_u32(out, signal.sample_rate_hz * block);
  put_u16(out, block);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (double v : signal.samples) {
    if (encoding == WavEncoding::pcm16) {
      const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      put_f32(out, static_cast<float>(v));
    }
  }
  dump(path, out);
}

void write_raw_f32(const std::filesystem::path& path, const AudioSignal& signal) {
  std::vector<unsigned char> out;
  out.reserve(signal.size() * 4);
  for (double v : signal.samples) put_f32(out, static_cast<float>(v));
  dump(path, out);

  nlohmann::json sidecar;
  sidecar["format"] = "f32le";
  sidecar["num_samples"] = signal.size();
  sidecar["sample_rate_hz"] = signal.sample_rate_hz;
  const std::string text = sidecar.dump(2) + "\n";
  dump(path.string() + ".json", std::vector<unsigned char>(text.begin(), text.end()));
}

AudioSignal read_raw_f32(const std::filesystem::path& path) {
  const auto meta_bytes = slurp(path.string() + ".json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse_error, fmt::format("bad sidecar for '{}': {}", path.string(), e.what()));
  }
  const auto bytes = slurp(path);
  if (bytes.size() % 4 != 0) {
    fail(Errc::parse_error, fmt::format("'{}' is not a whole number of float32 samples",
                                        path.string()));
  }
  AudioSignal out;
  out.sample_rate_hz = meta.value("sample_rate_hz", kDefaultSampleRate);
  out.samples.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = f32_from_le(bytes.data() + 4 * i);
  }
  if (meta.contains("num_samples") && meta["num_samples"].get<std::size_t>() != out.size()) {
    fail(Errc::parse_error, fmt::format("'{}': sidecar declares {} samples, found {}",
                                        path.string(), meta["num_samples"].get<std::size_t>(),
                                        out.size()));
  }
  return out;
}

}  // namespace lossprobe::signal
