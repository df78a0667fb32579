#pragma once

#include <random>

#include "fwl/core.hpp"

namespace fwl::testing {

/// Deterministic dense matrix of standard normals for test instances.
inline Matrix random_matrix(Index rows, Index cols, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      m(i, j) = dist(gen);
    }
  }
  return m;
}

inline Vector random_vector(Index n, unsigned seed) {
  return random_matrix(n, 1, seed).col(0);
}

inline double max_abs_diff(const Eigen::Ref<const Matrix>& a,
                           const Eigen::Ref<const Matrix>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace fwl::testing
