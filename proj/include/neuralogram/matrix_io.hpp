#pragma once

// Neuralogram export.
//
// CSV: one header line "N=<rows>,frames=<cols>,hop_s=<h>,window_s=<w>,layer=<l>"
// followed by one line per embedding index, values printed with 9 significant
// digits (exact for f32).
// Binary: magic "NLGMAT01", JSON header, row-major f32 payload.

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "neuralogram/binary_container.hpp"
#include "neuralogram/errors.hpp"
#include "neuralogram/extractor.hpp"

namespace nlg {

inline constexpr std::string_view kMatrixMagic = "NLGMAT01";

inline void write_neuralogram_csv(std::ostream& os, const Neuralogram& ng) {
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  os << "N=" << ng.data.rows << ",frames=" << ng.data.cols << ",hop_s=" << num(ng.hop_s)
     << ",window_s=" << num(ng.window_s) << ",layer=" << ng.layer << '\n';
  for (std::size_t r = 0; r < ng.data.rows; ++r) {
    for (std::size_t c = 0; c < ng.data.cols; ++c) {
      if (c) os << ',';
      os << num(static_cast<float>(ng.data(r, c)));
    }
    os << '\n';
  }
}

inline Neuralogram read_neuralogram_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty Neuralogram CSV");
  std::map<std::string, std::string> kv;
  std::istringstream hs(line);
  std::string item;
  while (std::getline(hs, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("bad Neuralogram CSV header field '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  for (const char* key : {"N", "frames", "hop_s", "window_s"})
    if (!kv.count(key)) throw FormatError(std::string("Neuralogram CSV header lacks ") + key);
  Neuralogram ng;
  const std::size_t rows = std::stoul(kv["N"]), cols = std::stoul(kv["frames"]);
  ng.data = Matrix(rows, cols);
  ng.hop_s = std::stod(kv["hop_s"]);
  ng.window_s = std::stod(kv["window_s"]);
  ng.layer = kv.count("layer") ? std::stoul(kv["layer"]) : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(is, line)) throw TruncatedError("Neuralogram CSV has fewer rows than declared");
    std::istringstream ls(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= cols) throw IntegrityError("Neuralogram CSV row longer than declared");
      ng.data(r, c++) = static_cast<double>(std::stof(cell));
    }
    if (c != cols) throw IntegrityError("Neuralogram CSV row shorter than declared");
  }
  return ng;
}

inline std::vector<unsigned char> encode_neuralogram(const Neuralogram& ng) {
  std::vector<float> payload(ng.data.data.begin(), ng.data.data.end());
  nlohmann::json header = {{"rows", ng.data.rows}, {"cols", ng.data.cols},   {"hop_s", ng.hop_s},
                           {"window_s", ng.window_s}, {"layer", ng.layer}, {"source", ng.source}};
  return encode_container(kMatrixMagic, header, payload);
}

inline Neuralogram decode_neuralogram(std::span<const unsigned char> bytes) {
  Container c = decode_container(kMatrixMagic, bytes);
  Neuralogram ng;
  try {
    const auto rows = c.header.at("rows").get<std::size_t>();
    const auto cols = c.header.at("cols").get<std::size_t>();
    if (rows * cols != c.payload.size())
      throw IntegrityError("matrix header declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                           " but payload holds " + std::to_string(c.payload.size()) + " values");
    ng.data = Matrix(rows, cols);
    ng.data.data.assign(c.payload.begin(), c.payload.end());
    ng.hop_s = c.header.at("hop_s").get<double>();
    ng.window_s = c.header.at("window_s").get<double>();
    ng.layer = c.header.value("layer", std::size_t{0});
    ng.source = c.header.value("source", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("matrix header: ") + e.what());
  }
  return ng;
}

inline void save_neuralogram(const Neuralogram& ng, const std::string& path) {
  write_bytes(path, encode_neuralogram(ng));
}

inline Neuralogram load_neuralogram(const std::string& path) { return decode_neuralogram(read_bytes(path)); }

}  // namespace nlg
