#pragma once

// Container shared by checkpoints and matrix exports:
//   8-byte magic | u64 little-endian header length | UTF-8 JSON header | f32 LE payload

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralogram/errors.hpp"

namespace nlg {

struct Container {
  nlohmann::json header;
  std::vector<float> payload;
};

namespace detail {

inline void append_f32(std::vector<unsigned char>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

inline float read_f32(const unsigned char* p) {
  const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
                             (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

inline std::vector<unsigned char> encode_container(std::string_view magic, const nlohmann::json& header,
                                                   std::span<const float> payload) {
  if (magic.size() != 8) throw InvalidArgument("container magic must be 8 bytes");
  const std::string text = header.dump();
  std::vector<unsigned char> out(magic.begin(), magic.end());
  const auto len = static_cast<std::uint64_t>(text.size());
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((len >> (8 * i)) & 0xff));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + 4 * payload.size());
  for (float v : payload) detail::append_f32(out, v);
  return out;
}

inline Container decode_container(std::string_view magic, std::span<const unsigned char> bytes) {
  if (bytes.size() < 16) throw TruncatedError("file too short for a header");
  if (std::memcmp(bytes.data(), magic.data(), 8) != 0)
    throw FormatError("bad magic: expected " + std::string(magic));
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= std::uint64_t(bytes[8 + i]) << (8 * i);
  if (len > bytes.size() - 16) throw TruncatedError("header length exceeds file size");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed JSON header: ") + e.what());
  }
  const std::size_t body = bytes.size() - 16 - len;
  if (body % 4 != 0) throw TruncatedError("payload is not a whole number of f32 values");
  c.payload.resize(body / 4);
  const unsigned char* p = bytes.data() + 16 + len;
  for (std::size_t i = 0; i < c.payload.size(); ++i) c.payload[i] = detail::read_f32(p + 4 * i);
  return c;
}

inline void write_bytes(const std::string& path, std::span<const unsigned char> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace nlg
