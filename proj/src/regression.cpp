#include "fwl/regression.hpp"

namespace fwl {

RegressionFit ols_fit(const Eigen::Ref<const Matrix>& x,
                      const Eigen::Ref<const Vector>& y) {
  const Index n = x.rows();
  const Index k = x.cols();
  if (k < 1) {
    throw DimensionMismatch("ols_fit: design matrix has no columns");
  }
  if (y.size() != n) {
    throw DimensionMismatch("ols_fit: y length does not match design rows");
  }
  if (n <= k) {
    throw DimensionMismatch("ols_fit: need more observations than parameters");
  }

  const Matrix gram = x.transpose() * x;
  const Matrix l = cholesky_factor(gram);

  RegressionFit fit;
  fit.coefficients = cholesky_solve_factored(l, x.transpose() * y);
  fit.gram_inverse = cholesky_solve_factored(l, Matrix::Identity(k, k));
  fit.fitted = x * fit.coefficients;
  fit.residuals = y - fit.fitted;
  fit.design_matrix = x;
  fit.n_obs = n;
  fit.n_params = k;
  fit.gram_condition = gram_condition_estimate(l);
  return fit;
}

RegressionFit full_fit(const PartitionedDesign& design) {
  return ols_fit(design.stacked(), design.y());
}

Vector focus_coefficients(const RegressionFit& fit, Index k1) {
  if (k1 < 1 || k1 > fit.coefficients.size()) {
    throw DimensionMismatch("focus_coefficients: bad focus size");
  }
  return fit.coefficients.tail(k1);
}

Matrix focus_block(const Matrix& square, Index k1) {
  if (square.rows() != square.cols() || k1 < 1 || k1 > square.rows()) {
    throw DimensionMismatch("focus_block: bad focus size");
  }
  return square.bottomRightCorner(k1, k1);
}

Matrix residualize(const Eigen::Ref<const Matrix>& targets,
                   const Eigen::Ref<const Matrix>& z) {
  const Index n = z.rows();
  const Index p = z.cols();
  if (targets.rows() != n) {
    throw DimensionMismatch("residualize: row counts differ");
  }
  if (p < 1 || n <= p) {
    throw DimensionMismatch("residualize: need more rows than z columns");
  }
  return targets - z * cholesky_solve(z.transpose() * z, z.transpose() * targets);
}

PartialFit fwl_fit(const PartitionedDesign& design) {
  const Index n = design.n();
  const Index k1 = design.k1();

  // One factorization of W2'W2 residualizes the focus block and the outcome.
  Matrix targets(n, k1 + 1);
  targets.leftCols(k1) = design.w1();
  targets.col(k1) = design.y();
  const Matrix resid = residualize(targets, design.w2());

  PartialFit partial;
  partial.w1_star = resid.leftCols(k1);
  partial.y_star = resid.col(k1);

  const Matrix gram = partial.w1_star.transpose() * partial.w1_star;
  const Matrix l = cholesky_factor(gram);
  partial.b1_tilde =
      cholesky_solve_factored(l, partial.w1_star.transpose() * partial.y_star);
  partial.gram22 = cholesky_solve_factored(l, Matrix::Identity(k1, k1));
  partial.u_tilde = partial.y_star - partial.w1_star * partial.b1_tilde;
  partial.gram_condition = gram_condition_estimate(l);
  return partial;
}

Vector leverages(const PartitionedDesign& design, const GramInverseBlocks& blocks) {
  const Matrix& w2 = design.w2();
  const Matrix& w1 = design.w1();
  if (blocks.w11.rows() != design.k2() || blocks.w22.rows() != design.k1() ||
      blocks.w12.rows() != design.k2() || blocks.w12.cols() != design.k1()) {
    throw DimensionMismatch("leverages: block shapes do not match the design");
  }

  // h_i = [w2_i ; w1_i]' (W'W)^{-1} [w2_i ; w1_i], expanded over the blocks.
  Vector h = ((w2 * blocks.w11).cwiseProduct(w2)).rowwise().sum();
  h += 2.0 * ((w2 * blocks.w12).cwiseProduct(w1)).rowwise().sum();
  h += ((w1 * blocks.w22).cwiseProduct(w1)).rowwise().sum();
  return h;
}

Vector hat_diagonal(const Eigen::Ref<const Matrix>& x) {
  const Matrix g_inv_xt = cholesky_solve(x.transpose() * x, x.transpose());
  return (x.cwiseProduct(g_inv_xt.transpose())).rowwise().sum();
}

Matrix detrend_linear(const Eigen::Ref<const Matrix>& series) {
  const Index n = series.rows();
  Matrix z(n, 2);
  z.col(0).setOnes();
  z.col(1) = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
  return residualize(series, z);
}

}  // namespace fwl
