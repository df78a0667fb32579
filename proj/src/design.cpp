#include "fwl/design.hpp"

namespace fwl {

namespace {

bool is_ones_column(const Matrix& m, Index j) {
  return (m.col(j).array() == 1.0).all();
}

Index count_ones_columns(const Matrix& m) {
  Index count = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    if (is_ones_column(m, j)) ++count;
  }
  return count;
}

}  // namespace

PartitionedDesign::PartitionedDesign(Matrix y, Matrix w1, Matrix w2,
                                     InterceptBlock intercept)
    : w1_(std::move(w1)), w2_(std::move(w2)), intercept_(intercept) {
  if (y.cols() != 1) {
    throw DimensionMismatch("PartitionedDesign: y must be a single column");
  }
  y_ = y.col(0);
  const Index n = y_.rows();
  if (w1_.rows() != n || w2_.rows() != n) {
    throw DimensionMismatch("PartitionedDesign: row counts differ across y/w1/w2");
  }
  if (w1_.cols() < 1 || w2_.cols() < 1) {
    throw DimensionMismatch("PartitionedDesign: both blocks need at least one column");
  }
  if (n <= w1_.cols() + w2_.cols()) {
    throw DimensionMismatch("PartitionedDesign: need more observations than regressors");
  }
  require_finite(y_, "PartitionedDesign y");
  require_finite(w1_, "PartitionedDesign w1");
  require_finite(w2_, "PartitionedDesign w2");

  if (intercept_ != InterceptBlock::Absent) {
    const Index ones_w1 = count_ones_columns(w1_);
    const Index ones_w2 = count_ones_columns(w2_);
    if (ones_w1 + ones_w2 != 1) {
      throw DimensionMismatch(
          "PartitionedDesign: expected exactly one column of ones across the blocks");
    }
    const bool in_expected_block =
        (intercept_ == InterceptBlock::InControls) ? ones_w2 == 1 : ones_w1 == 1;
    if (!in_expected_block) {
      throw DimensionMismatch(
          "PartitionedDesign: intercept column is not in the block the tag names");
    }
  }
}

Matrix PartitionedDesign::stacked() const {
  Matrix w(n(), k());
  w << w2_, w1_;
  return w;
}

}  // namespace fwl
