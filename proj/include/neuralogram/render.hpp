#pragma once

// Matrix -> 8-bit binary PGM (P5). Row 0 of the matrix is the top image row.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "neuralogram/binary_container.hpp"
#include "neuralogram/errors.hpp"
#include "neuralogram/matrix.hpp"

namespace nlg {

struct RenderSpec {
  enum class Scale { linear, log10_clamped } scale = Scale::linear;
  double floor_db = -80.0;  // log scale: values below max + floor_db (in dB of power) clip to black
  enum class Normalize { global, per_row } normalize = Normalize::global;
};

namespace detail {

// Maps a span of values to [0, 1]; a zero-width range maps to 0.
inline void normalize_range(std::vector<double>& v, std::size_t begin, std::size_t end) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  const double range = hi - lo;
  for (std::size_t i = begin; i < end; ++i) v[i] = range > 0.0 ? (v[i] - lo) / range : 0.0;
}

}  // namespace detail

/// Pixel intensities (row-major, rows x cols) for `m` under `spec`.
inline std::vector<unsigned char> render_pixels(const Matrix& m, const RenderSpec& spec) {
  if (m.empty()) throw InvalidArgument("cannot render an empty matrix");
  for (double v : m.data)
    if (!std::isfinite(v)) throw InvalidArgument("cannot render non-finite values");
  if (spec.scale == RenderSpec::Scale::log10_clamped && !(spec.floor_db < 0.0))
    throw InvalidArgument("floor_db must be negative for log scale");

  std::vector<double> v(m.data.begin(), m.data.end());
  auto to_log = [&](std::size_t begin, std::size_t end) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = begin; i < end; ++i) {
      v[i] = v[i] > 0.0 ? std::log10(v[i]) : -std::numeric_limits<double>::infinity();
      top = std::max(top, v[i]);
    }
    const double floor = std::isfinite(top) ? top + spec.floor_db / 10.0 : 0.0;
    for (std::size_t i = begin; i < end; ++i) v[i] = std::max(v[i], floor);
  };
  if (spec.normalize == RenderSpec::Normalize::global) {
    if (spec.scale == RenderSpec::Scale::log10_clamped) to_log(0, v.size());
    detail::normalize_range(v, 0, v.size());
  } else {
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (spec.scale == RenderSpec::Scale::log10_clamped) to_log(r * m.cols, (r + 1) * m.cols);
      detail::normalize_range(v, r * m.cols, (r + 1) * m.cols);
    }
  }
  std::vector<unsigned char> px(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) px[i] = static_cast<unsigned char>(std::lround(255.0 * v[i]));
  return px;
}

inline std::vector<unsigned char> encode_pgm(const Matrix& m, const RenderSpec& spec) {
  const auto px = render_pixels(m, spec);
  const std::string header = "P5\n" + std::to_string(m.cols) + " " + std::to_string(m.rows) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

inline void render_matrix(const Matrix& m, const RenderSpec& spec, const std::string& path) {
  write_bytes(path, encode_pgm(m, spec));
}

}  // namespace nlg
