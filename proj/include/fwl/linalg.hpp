#pragma once

#include "fwl/core.hpp"
#include "fwl/design.hpp"

namespace fwl {

/// Lower Cholesky factor L of a symmetric positive definite A (lower triangle
/// of A is read; the strict upper triangle is ignored). Throws
/// NotPositiveDefinite when a pivot falls to or below n*eps*max(diag(A)),
/// which is how collinear regressors surface from Gram matrices.
Matrix cholesky_factor(const Eigen::Ref<const Matrix>& a);

/// Solves A*X = B given the lower factor L from cholesky_factor.
Matrix cholesky_solve_factored(const Eigen::Ref<const Matrix>& l,
                               const Eigen::Ref<const Matrix>& b);

/// Solves A*X = B for symmetric positive definite A. Inputs are not modified.
Matrix cholesky_solve(const Eigen::Ref<const Matrix>& a,
                      const Eigen::Ref<const Matrix>& b);

/// Rough estimate of cond_2(A) for A = L*L', from the extreme diagonal
/// entries of L. Cheap lower-bound style estimate, good enough to flag
/// ill-conditioned Gram matrices.
double gram_condition_estimate(const Eigen::Ref<const Matrix>& l);

/// Blocks of (W'W)^{-1} for W = [W2 : W1], in the same block order:
///   [ w11  w12 ]
///   [ w12' w22 ]
/// w11 is the inverse Gram of the controls residualized on the focus block,
/// w22 the inverse Gram of the focus block residualized on the controls, and
/// w12 = -(W2'W2)^{-1} W2'W1 w22.
struct GramInverseBlocks {
  Matrix w11;  // k2 x k2
  Matrix w12;  // k2 x k1
  Matrix w22;  // k1 x k1

  /// Stacks the blocks into the full k x k inverse.
  Matrix assembled() const;
};

/// Computes GramInverseBlocks from the two blocks directly. Only k1-sized and
/// k2-sized factorizations are performed; the k x k Gram matrix is never
/// inverted as a whole.
GramInverseBlocks partitioned_gram_inverse(const Eigen::Ref<const Matrix>& w2,
                                           const Eigen::Ref<const Matrix>& w1);

GramInverseBlocks partitioned_gram_inverse(const PartitionedDesign& design);

}  // namespace fwl
