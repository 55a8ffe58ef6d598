#pragma once

// Iterative radix-2 Cooley-Tukey FFT.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "neuralogram/errors.hpp"

namespace nlg {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place forward transform, X[k] = sum_n x[n] exp(-2 pi i k n / N).
inline void fft_inplace(std::span<std::complex<double>> a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw InvalidArgument("FFT size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const std::complex<double> w(std::cos(ang * k), std::sin(ang * k));
      for (std::size_t i = k; i < n; i += len) {
        const auto u = a[i];
        const auto v = a[i + half] * w;
        a[i] = u + v;
        a[i + half] = u - v;
      }
    }
  }
}

inline std::vector<std::complex<double>> fft(std::span<const double> x, std::size_t n) {
  std::vector<std::complex<double>> a(n);
  for (std::size_t i = 0; i < x.size() && i < n; ++i) a[i] = x[i];
  fft_inplace(a);
  return a;
}

}  // namespace nlg
