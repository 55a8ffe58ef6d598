#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "neuralogram/errors.hpp"
#include "neuralogram/tensor.hpp"

namespace nlg {

using RowMajorMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major real matrix; the common currency for spectrograms,
/// transforms and Neuralograms.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  AlignedVector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool empty() const { return data.empty(); }

  Eigen::Map<RowMajorMatrixXd> eigen() {
    return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
  Eigen::Map<const RowMajorMatrixXd> eigen() const {
    return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }

  static Matrix from_eigen(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    out.eigen() = m;
    return out;
  }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> v(rows);
    for (std::size_t r = 0; r < rows; ++r) v[r] = (*this)(r, c);
    return v;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace nlg
