#pragma once

#include <string>

#include "fwl/core.hpp"

namespace fwl {

// Where the column of ones sits, if anywhere. Inference usually targets the
// slopes, so the constant defaults to the control block in callers.
enum class InterceptBlock { InControls, InFocus, Absent };

inline std::string to_string(InterceptBlock b) {
  switch (b) {
    case InterceptBlock::InControls: return "controls";
    case InterceptBlock::InFocus: return "focus";
    case InterceptBlock::Absent: return "none";
  }
  return "?";
}

/// Outcome vector plus the regressor matrix split into a focus block W1
/// (the k1 columns whose coefficients the caller cares about) and a control
/// block W2 (the k2 columns conditioned on). Immutable after construction.
class PartitionedDesign {
 public:
  /// Validates: equal row counts, N > k1 + k2, both blocks non-empty, all
  /// entries finite, and exactly one column of ones located in the block
  /// named by `intercept` (when not Absent).
  PartitionedDesign(Matrix y, Matrix w1, Matrix w2,
                    InterceptBlock intercept = InterceptBlock::InControls);

  const Vector& y() const { return y_; }
  const Matrix& w1() const { return w1_; }
  const Matrix& w2() const { return w2_; }
  InterceptBlock intercept_block() const { return intercept_; }

  Index n() const { return y_.size(); }
  Index k1() const { return w1_.cols(); }
  Index k2() const { return w2_.cols(); }
  Index k() const { return k1() + k2(); }

  /// Full regressor matrix [W2 : W1]; focus coefficients are the trailing k1
  /// entries of a fit on this matrix.
  Matrix stacked() const;

 private:
  Vector y_;
  Matrix w1_;
  Matrix w2_;
  InterceptBlock intercept_;
};

}  // namespace fwl
