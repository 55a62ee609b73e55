#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "noisemap/acoustics.hpp"
#include "noisemap/error.hpp"

namespace noisemap::wav {

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p)
{
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p)
{
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& out, std::uint16_t v)
{
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline std::vector<unsigned char> slurp(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("unreadable_file", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace detail

enum class Encoding { Pcm16, Float32 };

/// Mono RIFF/WAVE reader for 16-bit PCM and 32-bit IEEE float data.
inline PcmFrame read(const std::filesystem::path& path)
{
  const auto bytes = detail::slurp(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error("bad_wav", path.string() + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size())
      throw Error("bad_wav", "truncated chunk in " + path.string());
    if (std::memcmp(chunk, "fmt ", 4) == 0 && len >= 16) {
      format = detail::read_u16(bytes.data() + body);
      channels = detail::read_u16(bytes.data() + body + 2);
      rate = detail::read_u32(bytes.data() + body + 4);
      bits = detail::read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && len >= 26) // WAVE_FORMAT_EXTENSIBLE: subformat GUID
        format = detail::read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1u);
  }
  if (data == nullptr || rate == 0)
    throw Error("bad_wav", "missing fmt or data chunk in " + path.string());
  if (channels != 1)
    throw Error("bad_wav", "only mono WAV is supported");

  PcmFrame frame;
  frame.sample_rate = static_cast<int>(rate);
  if (format == 1 && bits == 16) {
    frame.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < frame.samples.size(); ++i) {
      const auto v = static_cast<std::int16_t>(detail::read_u16(data + 2 * i));
      frame.samples[i] = v / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    frame.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < frame.samples.size(); ++i) {
      const std::uint32_t raw = detail::read_u32(data + 4 * i);
      float f;
      std::memcpy(&f, &raw, sizeof f);
      frame.samples[i] = std::clamp(static_cast<double>(f), -1.0, 1.0);
    }
  } else {
    throw Error("bad_wav", "unsupported WAV encoding (need 16-bit PCM or 32-bit float)");
  }
  return frame;
}

/// Headerless little-endian float32 samples; the rate is not stored in the file.
inline PcmFrame read_raw_f32(const std::filesystem::path& path, int sample_rate)
{
  const auto bytes = detail::slurp(path);
  PcmFrame frame;
  frame.sample_rate = sample_rate;
  frame.samples.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < frame.samples.size(); ++i) {
    const std::uint32_t raw = detail::read_u32(bytes.data() + 4 * i);
    float f;
    std::memcpy(&f, &raw, sizeof f);
    frame.samples[i] = std::clamp(static_cast<double>(f), -1.0, 1.0);
  }
  return frame;
}

inline void write(const std::filesystem::path& path, const PcmFrame& frame,
                  Encoding enc = Encoding::Float32)
{
  const std::uint16_t bits = enc == Encoding::Pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(frame.samples.size() * block);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  detail::put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, enc == Encoding::Pcm16 ? 1 : 3);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(frame.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(frame.sample_rate) * block);
  detail::put_u16(out, block);
  detail::put_u16(out, bits);
  out += "data";
  detail::put_u32(out, data_len);
  for (double s : frame.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    if (enc == Encoding::Pcm16) {
      const auto v = static_cast<std::int16_t>(std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)));
      detail::put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      const auto f = static_cast<float>(c);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      detail::put_u32(out, raw);
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("unwritable_file", "cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

} // namespace noisemap::wav
