#pragma once

// 16-bit PCM mono WAV, canonical 44-byte header, little-endian.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "neuralogram/errors.hpp"
#include "neuralogram/waveform.hpp"

namespace nlg {

namespace detail {

inline void put_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v & 0xff));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

inline std::int16_t quantize_pcm16(double x) {
  const double q = std::round(x * 32767.0);
  return static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
}

inline std::vector<unsigned char> encode_wav(const Waveform& w) {
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::vector<unsigned char> b;
  b.reserve(44 + data_bytes);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(b, 16);
  detail::put_u16(b, 1);  // PCM
  detail::put_u16(b, 1);  // mono
  detail::put_u32(b, static_cast<std::uint32_t>(w.sample_rate));
  detail::put_u32(b, static_cast<std::uint32_t>(w.sample_rate) * 2);
  detail::put_u16(b, 2);
  detail::put_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(b, data_bytes);
  for (double x : w.samples) detail::put_u16(b, static_cast<std::uint16_t>(quantize_pcm16(x)));
  return b;
}

inline Waveform decode_wav(const std::vector<unsigned char>& b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file");
  std::size_t pos = 12;
  int rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= b.size()) {
    const std::uint32_t len = detail::get_u32(b.data() + pos + 4);
    const unsigned char* body = b.data() + pos + 8;
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (len < 16 || pos + 8 + len > b.size()) throw TruncatedError("short fmt chunk");
      const auto format = detail::get_u16(body);
      const auto channels = detail::get_u16(body + 2);
      const auto bits = detail::get_u16(body + 14);
      if (format != 1 || bits != 16) throw FormatError("only 16-bit PCM is supported");
      if (channels != 1) throw FormatError("only mono audio is supported");
      rate = static_cast<int>(detail::get_u32(body + 4));
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      if (pos + 8 + len > b.size()) throw TruncatedError("data chunk shorter than declared");
      Waveform w{std::vector<double>(len / 2), rate};
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<std::int16_t>(detail::get_u16(body + 2 * i)) / 32767.0;
      return w;
    }
    pos += 8 + len + (len & 1);
  }
  throw FormatError("no data chunk");
}

inline void write_wav(const std::string& path, const Waveform& w) {
  const auto bytes = encode_wav(w);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

}  // namespace nlg
