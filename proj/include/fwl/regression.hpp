#pragma once

#include "fwl/core.hpp"
#include "fwl/design.hpp"
#include "fwl/linalg.hpp"

namespace fwl {

/// One least-squares fit. `fitted + residuals == y` exactly by construction;
/// the normal equations X'residuals = 0 hold to rounding.
struct RegressionFit {
  Vector coefficients;     // k
  Vector residuals;        // N
  Vector fitted;           // N
  Matrix gram_inverse;     // (X'X)^{-1}, k x k
  Matrix design_matrix;    // X, kept for the sandwich estimators
  Index n_obs = 0;
  Index n_params = 0;
  // Estimate of cond_2(X'X); callers warn when sqrt of this tops ~1e8.
  double gram_condition = 1.0;
};

/// The partial (residualized) regression: y* on W1*, both residualized
/// against the controls.
struct PartialFit {
  Vector b1_tilde;   // k1 coefficients
  Vector u_tilde;    // N residuals
  Vector y_star;     // outcome residualized on W2
  Matrix w1_star;    // focus block residualized on W2, N x k1
  Matrix gram22;     // (W1*'W1*)^{-1}, k1 x k1
  double gram_condition = 1.0;
};

/// Ordinary least squares of y on X via the normal equations.
/// Requires N > k >= 1 and X of full column rank.
RegressionFit ols_fit(const Eigen::Ref<const Matrix>& x,
                      const Eigen::Ref<const Vector>& y);

/// Fit of y on the stacked design [W2 : W1].
RegressionFit full_fit(const PartitionedDesign& design);

/// Focus-block slice helpers for a full fit on [W2 : W1].
Vector focus_coefficients(const RegressionFit& fit, Index k1);
Matrix focus_block(const Matrix& square, Index k1);

/// Applies the annihilator of z to each column of `targets`, i.e. returns
/// targets - z (z'z)^{-1} z' targets, without ever forming the N x N
/// projector.
Matrix residualize(const Eigen::Ref<const Matrix>& targets,
                   const Eigen::Ref<const Matrix>& z);

/// The partial-regression path: residualize y and W1 on W2, then regress.
PartialFit fwl_fit(const PartitionedDesign& design);

/// Leverage h_ii of each observation in the full design, assembled from the
/// partitioned inverse blocks; no k x k inverse is formed.
Vector leverages(const PartitionedDesign& design, const GramInverseBlocks& blocks);

/// Leverage diagonal diag(X (X'X)^{-1} X') of a plain design matrix.
Vector hat_diagonal(const Eigen::Ref<const Matrix>& x);

/// Residuals from regressing each column of `series` on an intercept and a
/// linear trend 1..N.
Matrix detrend_linear(const Eigen::Ref<const Matrix>& series);

}  // namespace fwl
