#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neuralogram/errors.hpp"
#include "neuralogram/matrix.hpp"

namespace nlg {

struct PcaResult {
  Matrix coords;       // n x k
  Matrix components;   // k x d, unit rows
  std::vector<double> mean;
  std::vector<double> explained_ratio;  // k entries, non-increasing
};

/// Mean-centred PCA of the rows of `vectors` (n samples x d dims) via the
/// eigendecomposition of the sample covariance. Each component's sign is fixed
/// so that its largest-magnitude loading is positive.
inline PcaResult pca_project(const Matrix& vectors, std::size_t k) {
  const std::size_t n = vectors.rows, d = vectors.cols;
  if (k == 0) throw InvalidArgument("k must be positive");
  if (n < k + 1) throw InvalidArgument("need at least k + 1 vectors for " + std::to_string(k) + " components");
  const auto x = vectors.eigen();
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd ev = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vecs = eig.eigenvectors().rowwise().reverse();

  const double total = ev.sum();
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > 1e-12 * std::max(total, 1e-300)) ++rank;
  if (k > rank)
    throw InvalidArgument("k = " + std::to_string(k) + " exceeds the data rank " + std::to_string(rank));

  PcaResult r;
  r.mean.assign(mu.data(), mu.data() + d);
  r.components = Matrix(k, d);
  for (std::size_t c = 0; c < k; ++c) {
    Eigen::VectorXd v = vecs.col(static_cast<Eigen::Index>(c));
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
    for (std::size_t j = 0; j < d; ++j) r.components(c, j) = v(static_cast<Eigen::Index>(j));
    r.explained_ratio.push_back(ev(static_cast<Eigen::Index>(c)) / total);
  }
  r.coords = Matrix(n, k);
  r.coords.eigen() = centered * r.components.eigen().transpose();
  return r;
}

}  // namespace nlg
