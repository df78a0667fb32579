#include "fwl/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace fwl {

namespace {

constexpr double kSaturationTol = 1e-12;

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// bread * (X' diag(w) X) * bread for a diagonal middle matrix.
Matrix diagonal_sandwich(const Matrix& bread, const Eigen::Ref<const Matrix>& x,
                         const Vector& w) {
  const Matrix meat = x.transpose() * w.asDiagonal() * x;
  return symmetrized(bread * meat * bread);
}

/// Squared-residual weights for the HC family. `dof_k` drives the HC1
/// N/(N-k) factor (the fitted regression's own parameter count); `delta_k`
/// is the regressor count entering HC4's exponent.
Vector hc_diag_weights(Estimator variant, const Vector& u, const Vector& h,
                       Index dof_k, Index delta_k, Hc4Delta hc4_delta) {
  const Index n = u.size();
  const bool needs_h = variant == Estimator::HC2 || variant == Estimator::HC3 ||
                       variant == Estimator::HC4;
  if (needs_h) {
    if (h.size() != n) {
      throw DimensionMismatch("cov_hc: leverages required for HC2/HC3/HC4");
    }
    if ((h.array() >= 1.0 - kSaturationTol).any()) {
      throw SaturatedLeverage("cov_hc: some leverage is numerically 1");
    }
  }

  Vector w = u.array().square();
  switch (variant) {
    case Estimator::HC0:
      break;
    case Estimator::HC1:
      if (n == dof_k) {
        throw ZeroDegreesOfFreedom("cov_hc: HC1 needs N > k");
      }
      w *= static_cast<double>(n) / static_cast<double>(n - dof_k);
      break;
    case Estimator::HC2:
      w.array() /= (1.0 - h.array());
      break;
    case Estimator::HC3:
      w.array() /= (1.0 - h.array()).square();
      break;
    case Estimator::HC4: {
      const double scale = static_cast<double>(n) / static_cast<double>(delta_k);
      for (Index i = 0; i < n; ++i) {
        const double ratio = scale * h(i);
        const double delta = hc4_delta == Hc4Delta::MaxForm ? std::max(4.0, ratio)
                                                            : std::min(4.0, ratio);
        w(i) /= std::pow(1.0 - h(i), delta);
      }
      break;
    }
    default:
      throw DimensionMismatch("cov_hc: not an HC variant");
  }
  return w;
}

/// Banded score covariance sum_t s_t s_t' + sum_l w_l sum_t (s_t s_{t-l}' + ...),
/// with scores s_t = u_t x_t.
Matrix hac_meat(const Eigen::Ref<const Matrix>& x, const Vector& u,
                const HacSpec& spec) {
  const Index n = x.rows();
  if (spec.bandwidth() >= n) {
    throw BandwidthTooLarge("cov_hac: bandwidth must be below the sample size");
  }
  const Matrix scores = u.asDiagonal() * x;  // N x k
  Matrix meat = scores.transpose() * scores;
  for (Index lag = 1; lag <= spec.bandwidth(); ++lag) {
    const Matrix gamma =
        scores.bottomRows(n - lag).transpose() * scores.topRows(n - lag);
    meat += spec.weights()[static_cast<std::size_t>(lag)] *
            (gamma + gamma.transpose());
  }
  return meat;
}

Matrix cluster_meat(const Eigen::Ref<const Matrix>& x, const Vector& u,
                    const ClusterMap& clusters) {
  if (clusters.n_obs() != x.rows()) {
    throw DimensionMismatch("cov_cluster: cluster map length does not match N");
  }
  const Index k = x.cols();
  Matrix scores = Matrix::Zero(clusters.n_clusters(), k);
  for (Index i = 0; i < x.rows(); ++i) {
    scores.row(clusters.assignment()[static_cast<std::size_t>(i)]) += u(i) * x.row(i);
  }
  return scores.transpose() * scores;
}

double cluster_scale(DofMode mode, Index g, Index n, Index dof_k) {
  switch (mode) {
    case DofMode::None:
      return 1.0;
    case DofMode::ClusterG:
      return static_cast<double>(g) / static_cast<double>(g - 1);
    case DofMode::ClusterGN:
      if (n == dof_k) {
        throw ZeroDegreesOfFreedom("cov_cluster: GN correction needs N > k");
      }
      return static_cast<double>(g) * static_cast<double>(n - 1) /
             (static_cast<double>(g - 1) * static_cast<double>(n - dof_k));
    default:
      throw DimensionMismatch("cov_cluster: invalid dof mode");
  }
}

}  // namespace

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::Classical: return "classical";
    case Estimator::HC0: return "hc0";
    case Estimator::HC1: return "hc1";
    case Estimator::HC2: return "hc2";
    case Estimator::HC3: return "hc3";
    case Estimator::HC4: return "hc4";
    case Estimator::HAC: return "hac";
    case Estimator::Cluster: return "cluster";
  }
  return "?";
}

HacSpec::HacSpec(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty() || weights_.front() != 1.0) {
    throw Error("HacSpec: weights must start at omega_0 = 1");
  }
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0 && weights_[i] <= 1.0)) {
      throw Error("HacSpec: weights must lie in [0,1]");
    }
    if (i > 0 && weights_[i] > weights_[i - 1]) {
      throw Error("HacSpec: weights must be non-increasing");
    }
  }
}

HacSpec HacSpec::bartlett(Index bandwidth) {
  if (bandwidth < 0) {
    throw Error("HacSpec: bandwidth must be non-negative");
  }
  std::vector<double> w(static_cast<std::size_t>(bandwidth) + 1);
  for (Index l = 0; l <= bandwidth; ++l) {
    w[static_cast<std::size_t>(l)] =
        1.0 - static_cast<double>(l) / static_cast<double>(bandwidth + 1);
  }
  return HacSpec(std::move(w));
}

Index HacSpec::default_bandwidth(Index n_obs) {
  return static_cast<Index>(
      std::floor(4.0 * std::pow(static_cast<double>(n_obs) / 100.0, 2.0 / 9.0)));
}

ClusterMap::ClusterMap(std::vector<Index> assignment)
    : assignment_(std::move(assignment)) {
  Index max_id = -1;
  std::vector<Index> counts;
  for (Index id : assignment_) {
    if (id < 0) {
      throw Error("ClusterMap: cluster ids must be non-negative");
    }
    if (id > max_id) {
      max_id = id;
      counts.resize(static_cast<std::size_t>(max_id) + 1, 0);
    }
    ++counts[static_cast<std::size_t>(id)];
  }
  for (Index c : counts) {
    if (c == 0) {
      throw Error("ClusterMap: every cluster id up to G-1 must be used");
    }
  }
  n_clusters_ = max_id + 1;
  if (n_clusters_ < 2) {
    throw SingleCluster("ClusterMap: need at least two clusters");
  }
}

ClusterMap ClusterMap::from_labels(const std::vector<std::string>& labels) {
  std::unordered_map<std::string, Index> ids;
  std::vector<Index> assignment;
  assignment.reserve(labels.size());
  for (const auto& label : labels) {
    auto [it, inserted] = ids.emplace(label, static_cast<Index>(ids.size()));
    assignment.push_back(it->second);
  }
  return ClusterMap(std::move(assignment));
}

CovarianceEstimate cov_classical(const RegressionFit& fit) {
  if (fit.n_obs <= fit.n_params) {
    throw ZeroDegreesOfFreedom("cov_classical: needs N > k");
  }
  const double sigma2 = fit.residuals.squaredNorm() /
                        static_cast<double>(fit.n_obs - fit.n_params);
  return {symmetrized(sigma2 * fit.gram_inverse), Estimator::Classical,
          DofMode::NMinusK, Scope::FullRegression};
}

CovarianceEstimate cov_hc(const RegressionFit& fit, Estimator variant,
                          const Vector& h, Hc4Delta hc4_delta) {
  const Vector w = hc_diag_weights(variant, fit.residuals, h, fit.n_params,
                                   fit.n_params, hc4_delta);
  const DofMode mode =
      variant == Estimator::HC1 ? DofMode::NMinusK : DofMode::None;
  return {diagonal_sandwich(fit.gram_inverse, fit.design_matrix, w), variant, mode,
          Scope::FullRegression};
}

CovarianceEstimate cov_hac(const RegressionFit& fit, const HacSpec& spec) {
  const Matrix meat = hac_meat(fit.design_matrix, fit.residuals, spec);
  return {symmetrized(fit.gram_inverse * meat * fit.gram_inverse), Estimator::HAC,
          DofMode::None, Scope::FullRegression};
}

CovarianceEstimate cov_cluster(const RegressionFit& fit, const ClusterMap& clusters,
                               DofMode dof_mode) {
  const Matrix meat = cluster_meat(fit.design_matrix, fit.residuals, clusters);
  const double scale =
      cluster_scale(dof_mode, clusters.n_clusters(), fit.n_obs, fit.n_params);
  return {symmetrized(scale * fit.gram_inverse * meat * fit.gram_inverse),
          Estimator::Cluster, dof_mode, Scope::FullRegression};
}

CovarianceEstimate cov_full(const RegressionFit& fit, const EstimatorSpec& spec) {
  switch (spec.kind) {
    case Estimator::Classical:
      return cov_classical(fit);
    case Estimator::HC0:
    case Estimator::HC1:
      return cov_hc(fit, spec.kind);
    case Estimator::HC2:
    case Estimator::HC3:
    case Estimator::HC4:
      return cov_hc(fit, spec.kind, hat_diagonal(fit.design_matrix), spec.hc4_delta);
    case Estimator::HAC:
      if (!spec.hac) throw Error("cov_full: HAC weights not provided");
      return cov_hac(fit, *spec.hac);
    case Estimator::Cluster:
      if (!spec.clusters) throw Error("cov_full: cluster map not provided");
      return cov_cluster(fit, *spec.clusters, spec.cluster_dof);
  }
  throw Error("cov_full: unknown estimator");
}

CovarianceEstimate partial_cov(const PartialFit& partial,
                               const PartitionedDesign& design,
                               const GramInverseBlocks& blocks,
                               const EstimatorSpec& spec) {
  const Index n = design.n();
  const Index k1 = design.k1();
  if (partial.w1_star.rows() != n || partial.w1_star.cols() != k1) {
    throw DimensionMismatch("partial_cov: partial fit does not match the design");
  }

  CovarianceEstimate est;
  est.estimator = spec.kind;
  est.scope = Scope::PartialRegression;

  switch (spec.kind) {
    case Estimator::Classical: {
      const double sigma2 =
          partial.u_tilde.squaredNorm() / static_cast<double>(n - k1);
      est.matrix = symmetrized(sigma2 * partial.gram22);
      est.dof_mode = DofMode::NMinusK;
      break;
    }
    case Estimator::HC0:
    case Estimator::HC1:
    case Estimator::HC2:
    case Estimator::HC3:
    case Estimator::HC4: {
      Vector h;
      if (spec.kind == Estimator::HC2 || spec.kind == Estimator::HC3 ||
          spec.kind == Estimator::HC4) {
        h = leverages(design, blocks);
      }
      // dof factor is the partial regression's own (k1); HC4's exponent
      // scales by the full k.
      const Vector w = hc_diag_weights(spec.kind, partial.u_tilde, h, k1,
                                       design.k(), spec.hc4_delta);
      est.matrix = diagonal_sandwich(partial.gram22, partial.w1_star, w);
      est.dof_mode =
          spec.kind == Estimator::HC1 ? DofMode::NMinusK : DofMode::None;
      break;
    }
    case Estimator::HAC: {
      if (!spec.hac) throw Error("partial_cov: HAC weights not provided");
      const Matrix meat = hac_meat(partial.w1_star, partial.u_tilde, *spec.hac);
      est.matrix = symmetrized(partial.gram22 * meat * partial.gram22);
      est.dof_mode = DofMode::None;
      break;
    }
    case Estimator::Cluster: {
      if (!spec.clusters) throw Error("partial_cov: cluster map not provided");
      const Matrix meat =
          cluster_meat(partial.w1_star, partial.u_tilde, *spec.clusters);
      const double scale =
          cluster_scale(spec.cluster_dof, spec.clusters->n_clusters(), n, k1);
      est.matrix = symmetrized(scale * partial.gram22 * meat * partial.gram22);
      est.dof_mode = spec.cluster_dof;
      break;
    }
    default:
      throw Error("partial_cov: unknown estimator");
  }
  return est;
}

CovarianceEstimate partial_cov(const PartialFit& partial,
                               const PartitionedDesign& design,
                               const EstimatorSpec& spec) {
  const bool needs_blocks = spec.kind == Estimator::HC2 ||
                            spec.kind == Estimator::HC3 ||
                            spec.kind == Estimator::HC4;
  if (needs_blocks) {
    return partial_cov(partial, design, partitioned_gram_inverse(design), spec);
  }
  // Blocks are untouched for the remaining estimators.
  return partial_cov(partial, design, GramInverseBlocks{}, spec);
}

}  // namespace fwl
