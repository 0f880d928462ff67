// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_WAV_HPP
#define IVA_WAV_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "iva/errors.hpp"
#include "iva/stft.hpp"

namespace iva {

struct WavData {
  double sample_rate = 0.0;
  Signal channels;  // samples in [-1, 1]
};

enum class WavFormat { pcm16, float32 };

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

// Reads PCM 16-bit and IEEE float 32-bit RIFF/WAVE files, any channel count.
inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("wav: cannot open " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw format_error("wav: not a RIFF/WAVE file: " + path);

  std::uint16_t audio_format = 0, n_channels = 0, bits = 0;
  std::uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const std::uint32_t chunk_len = detail::read_u32(raw.data() + pos + 4);
    const unsigned char* body = raw.data() + pos + 8;
    if (pos + 8 + chunk_len > raw.size())
      throw format_error("wav: truncated chunk in " + path);
    if (std::memcmp(raw.data() + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw format_error("wav: short fmt chunk");
      audio_format = detail::read_u16(body);
      n_channels = detail::read_u16(body + 2);
      rate = detail::read_u32(body + 4);
      bits = detail::read_u16(body + 14);
      if (audio_format == 0xFFFE && chunk_len >= 40)
        audio_format = detail::read_u16(body + 24);  // extensible subformat
    } else if (std::memcmp(raw.data() + pos, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (n_channels == 0 || data_off == 0)
    throw format_error("wav: missing fmt or data chunk in " + path);

  WavData wav;
  wav.sample_rate = rate;
  const unsigned char* d = raw.data() + data_off;
  if (audio_format == 1 && bits == 16) {
    const size_t n = data_len / 2 / n_channels;
    wav.channels.assign(n_channels, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
      for (int c = 0; c < n_channels; ++c) {
        const std::int16_t v = static_cast<std::int16_t>(
            detail::read_u16(d + 2 * (i * n_channels + c)));
        wav.channels[c][i] = v / 32768.0;
      }
  } else if (audio_format == 3 && bits == 32) {
    const size_t n = data_len / 4 / n_channels;
    wav.channels.assign(n_channels, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
      for (int c = 0; c < n_channels; ++c) {
        const std::uint32_t u = detail::read_u32(d + 4 * (i * n_channels + c));
        float f;
        std::memcpy(&f, &u, 4);
        wav.channels[c][i] = f;
      }
  } else {
    throw format_error("wav: unsupported format (want PCM16 or float32): " +
                       path);
  }
  return wav;
}

inline void write_wav(const std::string& path, const WavData& wav,
                      WavFormat fmt = WavFormat::float32) {
  require(!wav.channels.empty(), "wav: no channels to write");
  const size_t n = wav.channels[0].size();
  for (const auto& ch : wav.channels)
    require(ch.size() == n, "wav: channel lengths differ");
  const int nc = static_cast<int>(wav.channels.size());
  const int bytes = fmt == WavFormat::pcm16 ? 2 : 4;
  const std::uint32_t data_len = static_cast<std::uint32_t>(n * nc * bytes);

  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  detail::put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, fmt == WavFormat::pcm16 ? 1 : 3);
  detail::put_u16(out, static_cast<std::uint16_t>(nc));
  detail::put_u32(out, static_cast<std::uint32_t>(wav.sample_rate));
  detail::put_u32(out,
                  static_cast<std::uint32_t>(wav.sample_rate) * nc * bytes);
  detail::put_u16(out, static_cast<std::uint16_t>(nc * bytes));
  detail::put_u16(out, static_cast<std::uint16_t>(8 * bytes));
  out += "data";
  detail::put_u32(out, data_len);
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < nc; ++c) {
      const double v = wav.channels[c][i];
      if (fmt == WavFormat::pcm16) {
        const long q =
            std::clamp(std::lrint(v * 32768.0), -32768L, 32767L);
        detail::put_u16(out, static_cast<std::uint16_t>(
                                 static_cast<std::int16_t>(q)));
      } else {
        const float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put_u32(out, u);
      }
    }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw format_error("wav: cannot write " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace iva

#endif  // IVA_WAV_HPP
