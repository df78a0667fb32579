#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fwl {

// All numeric data lives in dense column-major double matrices.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of the inputs are inconsistent with each other or with the operation.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A Cholesky pivot fell below the rank tolerance; regressors are collinear
// (or the matrix is not a Gram matrix at all).
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class ZeroDegreesOfFreedom : public Error {
 public:
  using Error::Error;
};

// Some leverage h_ii is numerically 1, so 1/(1-h_ii) weights blow up.
class SaturatedLeverage : public Error {
 public:
  using Error::Error;
};

class BandwidthTooLarge : public Error {
 public:
  using Error::Error;
};

class SingleCluster : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

class OracleSizeExceeded : public Error {
 public:
  using Error::Error;
};

// Residualized focus column has (numerically) zero variation left.
class DegenerateResidual : public Error {
 public:
  using Error::Error;
};

class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

inline void require_finite(const Eigen::Ref<const Matrix>& m, const std::string& what) {
  if (!m.allFinite()) {
    throw Error(what + ": non-finite entries");
  }
}

}  // namespace fwl
