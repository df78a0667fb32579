#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fwl/core.hpp"
#include "fwl/design.hpp"
#include "fwl/linalg.hpp"
#include "fwl/regression.hpp"

namespace fwl {

enum class Estimator { Classical, HC0, HC1, HC2, HC3, HC4, HAC, Cluster };
enum class DofMode { None, NMinusK, ClusterG, ClusterGN };
enum class Scope { FullRegression, PartialRegression };

std::string to_string(Estimator e);

/// HC4 leverage exponent delta_i = f(4, N*h_ii/k). The default keeps f = max;
/// the switch selects the min form common elsewhere in the HCCM literature.
enum class Hc4Delta { MaxForm, MinForm };

/// A symmetric coefficient covariance matrix plus how it was produced.
struct CovarianceEstimate {
  Matrix matrix;
  Estimator estimator = Estimator::Classical;
  DofMode dof_mode = DofMode::None;
  Scope scope = Scope::FullRegression;
};

/// Lag weights for the banded autocorrelation estimator: omega_0..omega_L,
/// omega_0 = 1, entries in [0,1], non-increasing.
class HacSpec {
 public:
  explicit HacSpec(std::vector<double> weights);

  /// Bartlett kernel weights omega_l = 1 - l/(L+1).
  static HacSpec bartlett(Index bandwidth);

  /// Plug-in bandwidth floor(4*(N/100)^{2/9}).
  static Index default_bandwidth(Index n_obs);

  Index bandwidth() const { return static_cast<Index>(weights_.size()) - 1; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

/// Cluster membership for N observations, densified to ids 0..G-1.
/// Construction rejects fewer than two clusters.
class ClusterMap {
 public:
  explicit ClusterMap(std::vector<Index> assignment);

  /// Builds from arbitrary labels; observations sharing a label share a
  /// cluster.
  static ClusterMap from_labels(const std::vector<std::string>& labels);

  Index n_obs() const { return static_cast<Index>(assignment_.size()); }
  Index n_clusters() const { return n_clusters_; }
  const std::vector<Index>& assignment() const { return assignment_; }

 private:
  std::vector<Index> assignment_;
  Index n_clusters_ = 0;
};

/// Estimator selection plus whatever parameters it needs; used by the
/// dispatch entry points and the CLI.
struct EstimatorSpec {
  Estimator kind = Estimator::Classical;
  std::optional<HacSpec> hac;           // required for HAC
  std::optional<ClusterMap> clusters;   // required for Cluster
  DofMode cluster_dof = DofMode::None;  // None | ClusterG | ClusterGN
  Hc4Delta hc4_delta = Hc4Delta::MaxForm;
};

/// sigma^2 (X'X)^{-1} with sigma^2 = RSS/(N-k).
CovarianceEstimate cov_classical(const RegressionFit& fit);

/// Heteroskedasticity-robust sandwich. h (full-design leverages) is required
/// for HC2/HC3/HC4 and must satisfy h_ii < 1 for those variants.
CovarianceEstimate cov_hc(const RegressionFit& fit, Estimator variant,
                          const Vector& h = Vector(),
                          Hc4Delta hc4_delta = Hc4Delta::MaxForm);

/// Banded autocorrelation-robust sandwich; the N x N middle matrix is never
/// materialized.
CovarianceEstimate cov_hac(const RegressionFit& fit, const HacSpec& spec);

/// Cluster-robust sandwich with per-cluster score outer products.
CovarianceEstimate cov_cluster(const RegressionFit& fit, const ClusterMap& clusters,
                               DofMode dof_mode);

/// Dispatches to the full-regression estimator named by `spec`, computing
/// leverages internally when the variant needs them.
CovarianceEstimate cov_full(const RegressionFit& fit, const EstimatorSpec& spec);

/// Covariance of the partial-regression coefficients, computed only from
/// partial-regression quantities plus (for HC2/HC3/HC4) the full-design
/// leverages recovered from the partitioned inverse blocks. Degree-of-freedom
/// factors are the partial regression's own (denominators use k1); HC4's
/// exponent uses the full-regression k as its scale.
CovarianceEstimate partial_cov(const PartialFit& partial,
                               const PartitionedDesign& design,
                               const GramInverseBlocks& blocks,
                               const EstimatorSpec& spec);

/// Same, computing the partitioned inverse blocks internally, and only for
/// the estimators that consume them.
CovarianceEstimate partial_cov(const PartialFit& partial,
                               const PartitionedDesign& design,
                               const EstimatorSpec& spec);

}  // namespace fwl
