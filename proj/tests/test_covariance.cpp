#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "fwl/covariance.hpp"
#include "fwl/verify.hpp"

using namespace fwl;
using testing::max_abs_diff;
using testing::random_matrix;
using testing::random_vector;

namespace {

RegressionFit intercept_only_fit() {
  Vector y(3);
  y << 1, 2, 3;
  return ols_fit(Matrix::Ones(3, 1), y);
}

/// Fit with residuals of unit magnitude and balanced leverage: X is a lone
/// intercept, y alternates around its mean.
RegressionFit balanced_unit_residual_fit() {
  Vector y(4);
  y << 6, 4, 6, 4;
  return ols_fit(Matrix::Ones(4, 1), y);
}

RegressionFit heteroskedastic_fit(Index n, Index k, unsigned seed) {
  const Matrix x = random_matrix(n, k, seed);
  Vector y = random_vector(n, seed + 1);
  y.array() *= (1.0 + x.col(0).array().square());  // noise scales with x
  return ols_fit(x, y);
}

/// Plain-LU inverse sandwich with an explicitly materialized N x N middle
/// matrix; shares nothing with the production path.
Matrix dense_sandwich_oracle(const Matrix& x, const Matrix& omega) {
  const Matrix bread = (x.transpose() * x).inverse();
  return bread * x.transpose() * omega * x * bread;
}

}  // namespace

TEST_CASE("cov_classical: zero residuals give a zero matrix") {
  Matrix x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3;
  Vector y(4);
  y << 1, 3, 5, 7;  // exact line
  const CovarianceEstimate est = cov_classical(ols_fit(x, y));
  CHECK(est.matrix.cwiseAbs().maxCoeff() <= 1e-24);
  CHECK(est.dof_mode == DofMode::NMinusK);
  CHECK(est.scope == Scope::FullRegression);
}

TEST_CASE("cov_classical: variance of a sample mean") {
  const CovarianceEstimate est = cov_classical(intercept_only_fit());
  // sigma^2 = (1+0+1)/2 = 1, Var(mean) = sigma^2/N = 1/3.
  CHECK(est.matrix(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("cov_classical: equals the sigma^2-weighted sandwich") {
  const RegressionFit fit = heteroskedastic_fit(30, 3, 201);
  const double sigma2 = fit.residuals.squaredNorm() / (30.0 - 3.0);
  const Matrix oracle = dense_sandwich_oracle(
      fit.design_matrix, sigma2 * Matrix::Identity(30, 30));
  CHECK(max_abs_diff(cov_classical(fit).matrix, oracle) <=
        1e-12 * (1.0 + oracle.cwiseAbs().maxCoeff()));
}

TEST_CASE("cov_classical and cov_hc reject exhausted degrees of freedom") {
  // ols_fit always keeps N > k, so exercise the guard on a hand-built fit.
  RegressionFit fit;
  fit.design_matrix = Matrix::Identity(2, 2);
  fit.gram_inverse = Matrix::Identity(2, 2);
  fit.coefficients = Vector::Zero(2);
  fit.residuals = Vector::Zero(2);
  fit.fitted = Vector::Zero(2);
  fit.n_obs = 2;
  fit.n_params = 2;
  CHECK_THROWS_AS(cov_classical(fit), ZeroDegreesOfFreedom);
  CHECK_THROWS_AS(cov_hc(fit, Estimator::HC1), ZeroDegreesOfFreedom);
}

TEST_CASE("cov_hc: closed forms under balanced leverage") {
  const RegressionFit fit = balanced_unit_residual_fit();
  const Vector h = hat_diagonal(fit.design_matrix);

  // Unit residuals: HC0 = (X'X)^{-1} = 1/4; HC2 inflates by 1/(1-k/N).
  const CovarianceEstimate hc0 = cov_hc(fit, Estimator::HC0);
  CHECK(hc0.matrix(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  const CovarianceEstimate hc2 = cov_hc(fit, Estimator::HC2, h);
  CHECK(hc2.matrix(0, 0) ==
        doctest::Approx(0.25 / (1.0 - 0.25)).epsilon(1e-14));
}

TEST_CASE("cov_hc: HC1 is the definitional rescale of HC0") {
  const RegressionFit fit = heteroskedastic_fit(20, 3, 211);
  const Matrix hc0 = cov_hc(fit, Estimator::HC0).matrix;
  const Matrix hc1 = cov_hc(fit, Estimator::HC1).matrix;
  CHECK(max_abs_diff(hc1, (20.0 / 17.0) * hc0) <=
        1e-14 * hc0.cwiseAbs().maxCoeff());
}

TEST_CASE("cov_hc: HC3 matches the literal dense sandwich") {
  const RegressionFit fit = heteroskedastic_fit(20, 3, 221);
  const Vector h = hat_diagonal(fit.design_matrix);

  Matrix omega = Matrix::Zero(20, 20);
  for (Index i = 0; i < 20; ++i) {
    omega(i, i) = fit.residuals(i) * fit.residuals(i) / ((1 - h(i)) * (1 - h(i)));
  }
  const Matrix oracle = dense_sandwich_oracle(fit.design_matrix, omega);
  CHECK(max_abs_diff(cov_hc(fit, Estimator::HC3, h).matrix, oracle) <=
        1e-11 * (1.0 + oracle.cwiseAbs().maxCoeff()));
}

TEST_CASE("cov_hc: HC4 exponent forms") {
  // Lone intercept at N=8: every ratio N*h/k = 1, so the max form pins
  // delta = 4 while the min form pins delta = 1.
  Vector y(8);
  y << 2, 0, 2, 0, 2, 0, 2, 0;
  const RegressionFit fit = ols_fit(Matrix::Ones(8, 1), y);
  const Vector h = hat_diagonal(fit.design_matrix);

  const double bread = 1.0 / 8.0;
  const double max_form = bread * (8.0 / std::pow(1.0 - 0.125, 4.0)) * bread;
  const double min_form = bread * (8.0 / (1.0 - 0.125)) * bread;
  CHECK(cov_hc(fit, Estimator::HC4, h).matrix(0, 0) ==
        doctest::Approx(max_form).epsilon(1e-13));
  CHECK(cov_hc(fit, Estimator::HC4, h, Hc4Delta::MinForm).matrix(0, 0) ==
        doctest::Approx(min_form).epsilon(1e-13));
}

TEST_CASE("cov_hc: guards") {
  const RegressionFit fit = heteroskedastic_fit(10, 2, 231);
  CHECK_THROWS_AS(cov_hc(fit, Estimator::HC2), DimensionMismatch);

  // A zero row makes two observations carry the whole fit: h_ii = 1 there.
  Matrix x(3, 2);
  x << 1, 0, 0, 1, 0, 0;
  Vector y(3);
  y << 1, 2, 3;
  const RegressionFit saturated = ols_fit(x, y);
  const Vector h = hat_diagonal(x);
  CHECK(h(0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cov_hc(saturated, Estimator::HC2, h), SaturatedLeverage);
  CHECK_THROWS_AS(cov_hc(saturated, Estimator::Classical, h), DimensionMismatch);
}

TEST_CASE("HacSpec: validation and defaults") {
  CHECK_THROWS_AS(HacSpec({0.5}), Error);
  CHECK_THROWS_AS(HacSpec({1.0, 0.5, 0.7}), Error);
  CHECK_THROWS_AS(HacSpec({1.0, 1.5}), Error);
  CHECK_THROWS_AS(HacSpec(std::vector<double>{}), Error);

  const HacSpec bartlett = HacSpec::bartlett(2);
  CHECK(bartlett.bandwidth() == 2);
  CHECK(bartlett.weights()[0] == doctest::Approx(1.0));
  CHECK(bartlett.weights()[1] == doctest::Approx(2.0 / 3.0));
  CHECK(bartlett.weights()[2] == doctest::Approx(1.0 / 3.0));

  CHECK(HacSpec::default_bandwidth(100) == 4);
  CHECK(HacSpec::default_bandwidth(50) == 3);
}

TEST_CASE("cov_hac: zero bandwidth collapses to HC0") {
  const RegressionFit fit = heteroskedastic_fit(15, 2, 241);
  const Matrix hac = cov_hac(fit, HacSpec::bartlett(0)).matrix;
  const Matrix hc0 = cov_hc(fit, Estimator::HC0).matrix;
  CHECK(max_abs_diff(hac, hc0) <= 1e-14 * (1.0 + hc0.cwiseAbs().maxCoeff()));
}

TEST_CASE("cov_hac: Bartlett L=2 matches the dense banded oracle") {
  const Index n = 8;
  const RegressionFit fit = heteroskedastic_fit(n, 2, 251);
  const HacSpec spec = HacSpec::bartlett(2);

  Matrix omega = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Index lag = std::abs(i - j);
      if (lag <= 2) {
        omega(i, j) = spec.weights()[static_cast<std::size_t>(lag)] *
                      fit.residuals(i) * fit.residuals(j);
      }
    }
  }
  const Matrix oracle = dense_sandwich_oracle(fit.design_matrix, omega);
  CHECK(max_abs_diff(cov_hac(fit, spec).matrix, oracle) <=
        1e-12 * (1.0 + oracle.cwiseAbs().maxCoeff()));
}

TEST_CASE("cov_hac: zero residuals and oversized bandwidth") {
  Matrix x(4, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3;
  Vector y(4);
  y << 1, 3, 5, 7;
  const RegressionFit fit = ols_fit(x, y);
  CHECK(cov_hac(fit, HacSpec::bartlett(1)).matrix.cwiseAbs().maxCoeff() <= 1e-24);
  CHECK_THROWS_AS(cov_hac(fit, HacSpec::bartlett(4)), BandwidthTooLarge);
}

TEST_CASE("ClusterMap: label mapping and guards") {
  const ClusterMap map = ClusterMap::from_labels({"b", "a", "b", "c", "a"});
  CHECK(map.n_clusters() == 3);
  CHECK(map.assignment() == std::vector<Index>{0, 1, 0, 2, 1});
  CHECK_THROWS_AS(ClusterMap::from_labels({"x", "x", "x"}), SingleCluster);
  CHECK_THROWS_AS(ClusterMap({0, 2, 2}), Error);  // id 1 unused
}

TEST_CASE("cov_cluster: singleton clusters reduce to HC0") {
  const RegressionFit fit = heteroskedastic_fit(12, 2, 261);
  std::vector<Index> ids(12);
  for (Index i = 0; i < 12; ++i) ids[static_cast<std::size_t>(i)] = i;
  const ClusterMap singletons(std::move(ids));

  const Matrix crve = cov_cluster(fit, singletons, DofMode::None).matrix;
  const Matrix hc0 = cov_hc(fit, Estimator::HC0).matrix;
  CHECK(max_abs_diff(crve, hc0) <= 1e-13 * (1.0 + hc0.cwiseAbs().maxCoeff()));
}

TEST_CASE("cov_cluster: G/(G-1) is a pure rescale") {
  const RegressionFit fit = heteroskedastic_fit(16, 2, 271);
  const ClusterMap map({0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3});
  const Matrix plain = cov_cluster(fit, map, DofMode::None).matrix;
  const Matrix scaled = cov_cluster(fit, map, DofMode::ClusterG).matrix;
  CHECK(max_abs_diff(scaled, (4.0 / 3.0) * plain) <=
        1e-14 * (1.0 + plain.cwiseAbs().maxCoeff()));
}

TEST_CASE("cov_cluster: matches the per-cluster outer-product oracle") {
  const Index n = 16;
  const RegressionFit fit = heteroskedastic_fit(n, 2, 281);
  const ClusterMap map({0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3});

  Matrix meat = Matrix::Zero(2, 2);
  for (Index g = 0; g < 4; ++g) {
    Vector score = Vector::Zero(2);
    for (Index i = 0; i < n; ++i) {
      if (map.assignment()[static_cast<std::size_t>(i)] == g) {
        score += fit.residuals(i) * fit.design_matrix.row(i).transpose();
      }
    }
    meat += score * score.transpose();
  }
  const Matrix bread = (fit.design_matrix.transpose() * fit.design_matrix).inverse();
  const double scale = 4.0 * (n - 1.0) / (3.0 * (n - 2.0));
  const Matrix oracle = scale * bread * meat * bread;

  const Matrix crve = cov_cluster(fit, map, DofMode::ClusterGN).matrix;
  CHECK(max_abs_diff(crve, oracle) <= 1e-11 * (1.0 + oracle.cwiseAbs().maxCoeff()));
}

TEST_CASE("cov_cluster: single cluster is rejected at map construction") {
  CHECK_THROWS_AS(ClusterMap(std::vector<Index>(5, 0)), SingleCluster);
}

TEST_CASE("partial_cov: exact equivalences with the full-regression focus block") {
  const auto instance =
      verify::make_instance({40, 2, 3, 0.5, verify::ErrorProcess::HeteroQuadratic,
                             InterceptBlock::InControls, 4, 301});
  const PartitionedDesign& design = instance.design;
  const RegressionFit fit = full_fit(design);
  const PartialFit partial = fwl_fit(design);
  const GramInverseBlocks blocks = partitioned_gram_inverse(design);

  for (Estimator kind : {Estimator::HC0, Estimator::HC2, Estimator::HC3,
                         Estimator::HC4}) {
    EstimatorSpec spec;
    spec.kind = kind;
    const Matrix v_partial = partial_cov(partial, design, blocks, spec).matrix;
    const Matrix v_full = focus_block(cov_full(fit, spec).matrix, design.k1());
    CHECK(max_abs_diff(v_partial, v_full) <=
          1e-10 * (1.0 + v_full.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("partial_cov: classical obeys the degree-of-freedom relation") {
  const auto instance =
      verify::make_instance({35, 2, 4, 0.4, verify::ErrorProcess::IID,
                             InterceptBlock::InControls, 4, 311});
  const PartitionedDesign& design = instance.design;
  const RegressionFit fit = full_fit(design);
  const PartialFit partial = fwl_fit(design);
  const GramInverseBlocks blocks = partitioned_gram_inverse(design);

  EstimatorSpec spec;
  const Matrix v_partial = partial_cov(partial, design, blocks, spec).matrix;
  const Matrix v_full = focus_block(cov_classical(fit).matrix, design.k1());

  const double n = static_cast<double>(design.n());
  const Matrix lhs = (n - design.k1()) * v_partial;
  const Matrix rhs = (n - design.k()) * v_full;
  CHECK(max_abs_diff(lhs, rhs) <= 1e-10 * (1.0 + rhs.cwiseAbs().maxCoeff()));
}

TEST_CASE("partial_cov: HAC and cluster paths agree with the full regression") {
  const auto instance =
      verify::make_instance({48, 2, 3, 0.3, verify::ErrorProcess::AR1,
                             InterceptBlock::InControls, 6, 321});
  const PartitionedDesign& design = instance.design;
  const RegressionFit fit = full_fit(design);
  const PartialFit partial = fwl_fit(design);
  const GramInverseBlocks blocks = partitioned_gram_inverse(design);

  EstimatorSpec hac;
  hac.kind = Estimator::HAC;
  hac.hac = HacSpec::bartlett(3);
  const Matrix v_p = partial_cov(partial, design, blocks, hac).matrix;
  const Matrix v_f = focus_block(cov_full(fit, hac).matrix, design.k1());
  CHECK(max_abs_diff(v_p, v_f) <= 1e-11 * (1.0 + v_f.cwiseAbs().maxCoeff()));

  for (DofMode mode : {DofMode::None, DofMode::ClusterG}) {
    EstimatorSpec cl;
    cl.kind = Estimator::Cluster;
    cl.clusters = instance.clusters;
    cl.cluster_dof = mode;
    const Matrix p = partial_cov(partial, design, blocks, cl).matrix;
    const Matrix f = focus_block(cov_full(fit, cl).matrix, design.k1());
    CHECK(max_abs_diff(p, f) <= 1e-11 * (1.0 + f.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("covariance outputs are symmetric positive semidefinite") {
  const auto instance =
      verify::make_instance({60, 3, 4, 0.6, verify::ErrorProcess::HeteroQuadratic,
                             InterceptBlock::InControls, 6, 331});
  const RegressionFit fit = full_fit(instance.design);

  std::vector<EstimatorSpec> specs(6);
  specs[0].kind = Estimator::Classical;
  specs[1].kind = Estimator::HC1;
  specs[2].kind = Estimator::HC3;
  specs[3].kind = Estimator::HC4;
  specs[4].kind = Estimator::HAC;
  specs[4].hac = HacSpec::bartlett(2);
  specs[5].kind = Estimator::Cluster;
  specs[5].clusters = instance.clusters;
  specs[5].cluster_dof = DofMode::ClusterG;

  const PartialFit partial = fwl_fit(instance.design);
  for (const auto& spec : specs) {
    for (const Matrix& v :
         {cov_full(fit, spec).matrix,
          partial_cov(partial, instance.design, spec).matrix}) {
      CHECK(max_abs_diff(v, v.transpose()) <=
            1e-12 * (1.0 + v.cwiseAbs().maxCoeff()));
      CHECK((v.diagonal().array() >= 0.0).all());
      const Eigen::SelfAdjointEigenSolver<Matrix> eigen(v);
      CHECK(eigen.eigenvalues().minCoeff() >= -1e-9 * v.trace());
    }
  }
}

TEST_CASE("partial_cov: tags record estimator, scope and dof mode") {
  const auto instance =
      verify::make_instance({30, 1, 2, 0.0, verify::ErrorProcess::IID,
                             InterceptBlock::InControls, 3, 341});
  const PartialFit partial = fwl_fit(instance.design);
  const GramInverseBlocks blocks = partitioned_gram_inverse(instance.design);

  EstimatorSpec spec;
  spec.kind = Estimator::HC1;
  const CovarianceEstimate est = partial_cov(partial, instance.design, blocks, spec);
  CHECK(est.estimator == Estimator::HC1);
  CHECK(est.scope == Scope::PartialRegression);
  CHECK(est.dof_mode == DofMode::NMinusK);
}
