#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "fwl/core.hpp"
#include "fwl/covariance.hpp"
#include "fwl/design.hpp"
#include "fwl/regression.hpp"

namespace fwl::verify {

/// Outcome of one identity check on one concrete instance.
/// passed <=> max_abs_err <= tolerance_used.
struct EquivalenceReport {
  std::string identity_name;
  bool passed = false;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  double tolerance_used = 0.0;
  std::string instance_descriptor;
};

/// One JSON object per report, newline-free; this is the wire format the CLI
/// streams in verify mode.
std::string to_json_line(const EquivalenceReport& report);

struct CheckOptions {
  double rtol = 1e-9;
  // Widen the tolerance to cond(X'X)*eps*10 when that exceeds rtol, so
  // theorem checks degrade with rounding rather than failing on
  // ill-conditioned but legitimate instances. Relaxation is noted in the
  // report descriptor.
  bool condition_relax = true;
  // Replaces the shape-derived instance descriptor (e.g. with one that
  // carries the generator seed); relaxation flags are appended to it.
  std::string descriptor;
};

/// Least squares by Cramer's rule with determinants expanded recursively by
/// minors. Deliberately shares nothing with the Cholesky path; k is capped at
/// 8 because of the factorial cost.
Vector cramer_oracle_fit(const Matrix& x, const Vector& y);

/// Bivariate slope of residualized y on the residualized (single) focus
/// column versus the multiple-regression coefficient.
EquivalenceReport check_yule_identity(const PartitionedDesign& design,
                                      const CheckOptions& opts = {});

/// Coefficient identity (b1 vs b1-tilde) and residual identity (u vs u-tilde).
std::pair<EquivalenceReport, EquivalenceReport> check_lovell_identities(
    const PartitionedDesign& design, const CheckOptions& opts = {});

/// Dense-projector decomposition P_W = P_W2 + P_W1*, orthogonality of the two
/// parts, and idempotence/symmetry of each projector. Builds N x N matrices,
/// so N is capped at 200.
EquivalenceReport check_projection_decomposition(const PartitionedDesign& design,
                                                 const CheckOptions& opts = {});

/// Focus rows of (W'W)^{-1} W' assembled from the partitioned blocks versus
/// the partial-regression form (W1*'W1*)^{-1} W1*'.
EquivalenceReport check_block_relation(const PartitionedDesign& design,
                                       const CheckOptions& opts = {});

/// Full-path focus-block covariance versus the partial-path estimate, under
/// the relation the estimator obeys: exact equality, or matching after
/// scaling both sides by their degree-of-freedom denominators.
EquivalenceReport check_cov_equivalence(const PartitionedDesign& design,
                                        const EstimatorSpec& spec,
                                        const CheckOptions& opts = {});

// ---------------------------------------------------------------------------
// Random instances

enum class ErrorProcess { IID, HeteroQuadratic, AR1, ClusterEffects };

std::string to_string(ErrorProcess p);

struct InstanceSpec {
  Index n = 200;
  Index k1 = 2;
  Index k2 = 3;
  double rho = 0.0;  // inter-block correlation of the stochastic columns
  ErrorProcess errors = ErrorProcess::IID;
  InterceptBlock intercept = InterceptBlock::InControls;
  Index n_clusters = 5;
  std::uint64_t seed = 0;
};

struct Instance {
  PartitionedDesign design;
  ClusterMap clusters;
  std::string descriptor;
};

/// Deterministic instance: standard-normal regressors with the requested
/// inter-block correlation, outcome from a drawn coefficient vector plus the
/// requested error process. Identical InstanceSpec -> bit-identical data.
Instance make_instance(const InstanceSpec& spec);

// ---------------------------------------------------------------------------
// Suite

struct SuiteConfig {
  std::uint64_t seed = 42;
  int instances = 100;
  double rho_max = 0.9;
  std::optional<double> tolerance;  // overrides every check's rtol when set
};

/// Runs every identity over seeded random instances, forwarding each report
/// to `sink`. Returns the number of failed reports.
int run_identity_suite(const SuiteConfig& config,
                       const std::function<void(const EquivalenceReport&)>& sink);

}  // namespace fwl::verify
