#include "fwl/linalg.hpp"

#include <cmath>
#include <limits>

namespace fwl {

Matrix cholesky_factor(const Eigen::Ref<const Matrix>& a) {
  const Index n = a.rows();
  if (n < 1 || a.cols() != n) {
    throw DimensionMismatch("cholesky_factor: matrix must be square and non-empty");
  }

  const double max_diag = a.diagonal().maxCoeff();
  const double pivot_tol =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;

  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= pivot_tol) {
      throw NotPositiveDefinite("cholesky_factor: pivot below rank tolerance at column " +
                                std::to_string(j));
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    if (j + 1 < n) {
      l.col(j).tail(n - j - 1) =
          (a.col(j).tail(n - j - 1) -
           l.bottomLeftCorner(n - j - 1, j) * l.row(j).head(j).transpose()) /
          ljj;
    }
  }
  return l;
}

Matrix cholesky_solve_factored(const Eigen::Ref<const Matrix>& l,
                               const Eigen::Ref<const Matrix>& b) {
  if (b.rows() != l.rows()) {
    throw DimensionMismatch("cholesky_solve: right-hand side row count mismatch");
  }
  Matrix x = l.triangularView<Eigen::Lower>().solve(b);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
  return x;
}

Matrix cholesky_solve(const Eigen::Ref<const Matrix>& a,
                      const Eigen::Ref<const Matrix>& b) {
  if (b.rows() != a.rows()) {
    throw DimensionMismatch("cholesky_solve: right-hand side row count mismatch");
  }
  return cholesky_solve_factored(cholesky_factor(a), b);
}

double gram_condition_estimate(const Eigen::Ref<const Matrix>& l) {
  const double dmax = l.diagonal().maxCoeff();
  const double dmin = l.diagonal().minCoeff();
  if (dmin <= 0.0) return std::numeric_limits<double>::infinity();
  const double r = dmax / dmin;
  return r * r;
}

Matrix GramInverseBlocks::assembled() const {
  const Index k2 = w11.rows();
  const Index k1 = w22.rows();
  Matrix full(k1 + k2, k1 + k2);
  full.topLeftCorner(k2, k2) = w11;
  full.topRightCorner(k2, k1) = w12;
  full.bottomLeftCorner(k1, k2) = w12.transpose();
  full.bottomRightCorner(k1, k1) = w22;
  return full;
}

GramInverseBlocks partitioned_gram_inverse(const Eigen::Ref<const Matrix>& w2,
                                           const Eigen::Ref<const Matrix>& w1) {
  if (w1.rows() != w2.rows()) {
    throw DimensionMismatch("partitioned_gram_inverse: blocks have different row counts");
  }
  const Index k1 = w1.cols();
  const Index k2 = w2.cols();
  if (k1 < 1 || k2 < 1) {
    throw DimensionMismatch("partitioned_gram_inverse: both blocks need columns");
  }

  const Matrix s22 = w2.transpose() * w2;  // k2 x k2
  const Matrix s21 = w2.transpose() * w1;  // k2 x k1
  const Matrix s11 = w1.transpose() * w1;  // k1 x k1

  // t = (W2'W2)^{-1} W2'W1; the Schur complement s11 - s21' t is the Gram
  // matrix of the focus block after residualizing on the controls.
  const Matrix l22 = cholesky_factor(s22);
  const Matrix t = cholesky_solve_factored(l22, s21);
  const Matrix schur_focus = s11 - s21.transpose() * t;

  GramInverseBlocks blocks;
  blocks.w22 = cholesky_solve(schur_focus, Matrix::Identity(k1, k1));

  // Mirror image for the control block: residualize W2 on W1.
  const Matrix u = cholesky_solve(s11, s21.transpose());
  const Matrix schur_controls = s22 - s21 * u;
  blocks.w11 = cholesky_solve(schur_controls, Matrix::Identity(k2, k2));

  blocks.w12 = -t * blocks.w22;
  return blocks;
}

GramInverseBlocks partitioned_gram_inverse(const PartitionedDesign& design) {
  return partitioned_gram_inverse(design.w2(), design.w1());
}

}  // namespace fwl
