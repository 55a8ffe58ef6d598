#pragma once

// Spectrogram variants as explicit linear maps of the power spectrum, plus
// closed-form recovery of an unknown map from example pairs.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "neuralogram/errors.hpp"
#include "neuralogram/matrix.hpp"
#include "neuralogram/stft.hpp"

namespace nlg {

struct LinearTransform {
  Matrix matrix;  // M x n_bins
  std::string name;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular, un-normalized filters with peaks equally spaced in mel between 0 and Nyquist.
inline LinearTransform mel_filterbank(std::size_t n_mels, std::size_t n_bins, int sample_rate) {
  if (n_mels < 1) throw InvalidArgument("n_mels must be at least 1");
  if (n_bins < 2) throw InvalidArgument("n_bins must be at least 2");
  const double fft_size = 2.0 * static_cast<double>(n_bins - 1);
  const double mel_max = hz_to_mel(0.5 * sample_rate);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  LinearTransform t{Matrix(n_mels, n_bins), "mel" + std::to_string(n_mels)};
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      t.matrix(m, k) = w;
      any = any || w > 0.0;
    }
    if (!any)
      throw InvalidArgument("mel filter " + std::to_string(m) +
                            " covers no FFT bin; too many mel bands for this resolution");
  }
  return t;
}

/// 12 x n_bins pitch-class folding; the DC column is left empty.
inline LinearTransform chroma_matrix(std::size_t n_bins, int sample_rate, double ref_hz) {
  if (!(ref_hz > 0.0)) throw InvalidArgument("reference frequency must be positive");
  if (n_bins < 2) throw InvalidArgument("n_bins must be at least 2");
  const double fft_size = 2.0 * static_cast<double>(n_bins - 1);
  LinearTransform t{Matrix(12, n_bins), "chroma"};
  for (std::size_t k = 1; k < n_bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate / fft_size;
    long cls = std::lround(12.0 * std::log2(f / ref_hz)) % 12;
    if (cls < 0) cls += 12;
    t.matrix(static_cast<std::size_t>(cls), k) = 1.0;
  }
  return t;
}

inline Matrix apply_transform(const LinearTransform& t, const Matrix& spec) {
  if (t.matrix.cols != spec.rows)
    throw ShapeError("transform expects " + std::to_string(t.matrix.cols) + " bins, got " +
                     std::to_string(spec.rows));
  Matrix out(t.matrix.rows, spec.cols);
  out.eigen().noalias() = t.matrix.eigen() * spec.eigen();
  return out;
}

inline Matrix apply_transform(const LinearTransform& t, const Spectrogram& spec) {
  return apply_transform(t, spec.data);
}

/// Least-squares estimate of T from columns: minimizes sum ||T x - y||^2 + ridge ||T||_F^2.
///
/// `inputs` is n_bins x S and `targets` is M x S; column s is one example pair.
inline LinearTransform learn_transform(const Matrix& inputs, const Matrix& targets, double ridge,
                                       std::string name = "learned") {
  if (inputs.cols != targets.cols) throw ShapeError("inputs and targets differ in sample count");
  if (ridge < 0.0) throw InvalidArgument("ridge must be non-negative");
  if (inputs.cols == 0) throw InvalidArgument("no training columns");
  const auto x = inputs.eigen();
  const auto y = targets.eigen();
  const Eigen::Index n = x.rows();

  Eigen::MatrixXd gram = x * x.transpose();
  gram.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double max_ev = eig.eigenvalues().maxCoeff();
  const double min_ev = eig.eigenvalues().minCoeff();
  if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev * static_cast<double>(n))
    throw SingularMatrixError("normal matrix is singular (" + std::to_string(inputs.cols) +
                              " columns for " + std::to_string(n) + " bins); use ridge > 0");

  // T^T = gram^{-1} X Y^T
  const Eigen::MatrixXd rhs = x * y.transpose();
  const Eigen::MatrixXd tt = gram.ldlt().solve(rhs);
  return {Matrix::from_eigen(tt.transpose()), std::move(name)};
}

inline void write_transform_csv(std::ostream& os, const LinearTransform& t) {
  os << t.matrix.rows << ',' << t.matrix.cols << '\n';
  char buf[32];
  for (std::size_t r = 0; r < t.matrix.rows; ++r) {
    for (std::size_t c = 0; c < t.matrix.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", t.matrix(r, c));
      if (c) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

inline LinearTransform read_transform_csv(std::istream& is, std::string name = "loaded") {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty transform CSV");
  std::size_t rows = 0, cols = 0;
  char comma = 0;
  std::istringstream hdr(line);
  if (!(hdr >> rows >> comma >> cols) || comma != ',') throw FormatError("bad transform CSV header");
  LinearTransform t{Matrix(rows, cols), std::move(name)};
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(is, line)) throw TruncatedError("transform CSV has too few rows");
    std::istringstream ls(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ls, cell, ',')) {
      if (c >= cols) throw IntegrityError("transform CSV row too long");
      t.matrix(r, c++) = std::stod(cell);
    }
    if (c != cols) throw IntegrityError("transform CSV row too short");
  }
  return t;
}

}  // namespace nlg
