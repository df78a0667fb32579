#include "fwl/verify.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

namespace fwl::verify {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Builds a report from a raw max-abs discrepancy and the magnitude scale of
/// the compared quantity. The effective tolerance is rtol*(1+scale), widened
/// to cond*eps*10 when condition relaxation is on and the instance is bad
/// enough to warrant it.
EquivalenceReport make_report(std::string name, double max_abs, double scale,
                              const CheckOptions& opts, double cond,
                              std::string descriptor) {
  double rtol_eff = opts.rtol;
  if (opts.condition_relax) {
    const double rounding_floor = cond * std::numeric_limits<double>::epsilon() * 10.0;
    if (rounding_floor > rtol_eff) {
      rtol_eff = rounding_floor;
      descriptor += ";rtol_relaxed=" + format_double(rtol_eff);
    }
  }
  EquivalenceReport report;
  report.identity_name = std::move(name);
  report.max_abs_err = max_abs;
  report.max_rel_err = max_abs / (1.0 + scale);
  report.tolerance_used = rtol_eff * (1.0 + scale);
  report.passed = max_abs <= report.tolerance_used;
  report.instance_descriptor = std::move(descriptor);
  return report;
}

std::string describe(const PartitionedDesign& d) {
  std::ostringstream os;
  os << "n=" << d.n() << ";k1=" << d.k1() << ";k2=" << d.k2()
     << ";intercept=" << to_string(d.intercept_block());
  return os.str();
}

std::string base_descriptor(const CheckOptions& opts, const PartitionedDesign& d) {
  return opts.descriptor.empty() ? describe(d) : opts.descriptor;
}

double max_abs_diff(const Eigen::Ref<const Matrix>& a,
                    const Eigen::Ref<const Matrix>& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

double max_abs(const Eigen::Ref<const Matrix>& a) {
  return a.cwiseAbs().maxCoeff();
}

/// Hat matrix Z (Z'Z)^{-1} Z', built densely. Only for desk-scale checks.
Matrix dense_projector(const Eigen::Ref<const Matrix>& z) {
  return z * cholesky_solve(z.transpose() * z, z.transpose());
}

// --- determinant by recursive expansion in minors (row-major storage) ------

double det_by_minors(const std::vector<double>& m, int n) {
  if (n == 1) return m[0];
  if (n == 2) return m[0] * m[3] - m[1] * m[2];
  std::vector<double> minor(static_cast<std::size_t>(n - 1) * (n - 1));
  double det = 0.0;
  double sign = 1.0;
  for (int j = 0; j < n; ++j) {
    std::size_t w = 0;
    for (int r = 1; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if (c == j) continue;
        minor[w++] = m[static_cast<std::size_t>(r) * n + c];
      }
    }
    det += sign * m[static_cast<std::size_t>(j)] * det_by_minors(minor, n - 1);
    sign = -sign;
  }
  return det;
}

}  // namespace

std::string to_json_line(const EquivalenceReport& report) {
  nlohmann::ordered_json j;
  j["identity"] = report.identity_name;
  j["passed"] = report.passed;
  j["max_abs_err"] = report.max_abs_err;
  j["max_rel_err"] = report.max_rel_err;
  j["tolerance"] = report.tolerance_used;
  j["instance"] = report.instance_descriptor;
  return j.dump();
}

Vector cramer_oracle_fit(const Matrix& x, const Vector& y) {
  const int n = static_cast<int>(x.rows());
  const int k = static_cast<int>(x.cols());
  if (k < 1 || y.size() != n) {
    throw DimensionMismatch("cramer_oracle_fit: shape mismatch");
  }
  if (k > 8) {
    throw OracleSizeExceeded("cramer_oracle_fit: k capped at 8");
  }
  if (n < k) {
    throw DimensionMismatch("cramer_oracle_fit: need at least k observations");
  }

  // Plain-loop normal equations; nothing here shares code with the
  // factorization path it cross-checks.
  std::vector<double> gram(static_cast<std::size_t>(k) * k, 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(k), 0.0);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += x(r, i) * x(r, j);
      gram[static_cast<std::size_t>(i) * k + j] = s;
    }
    double s = 0.0;
    for (int r = 0; r < n; ++r) s += x(r, i) * y(r);
    rhs[static_cast<std::size_t>(i)] = s;
  }

  const double det_gram = det_by_minors(gram, k);

  // Hadamard bound as the magnitude scale for the singularity cutoff.
  double scale = 1.0;
  for (int j = 0; j < k; ++j) {
    double col = 0.0;
    for (int i = 0; i < k; ++i) {
      const double v = gram[static_cast<std::size_t>(i) * k + j];
      col += v * v;
    }
    scale *= std::sqrt(col);
  }
  if (std::abs(det_gram) <= 1e-12 * scale) {
    throw SingularSystem("cramer_oracle_fit: determinant vanishes");
  }

  Vector b(k);
  std::vector<double> modified(gram);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      modified[static_cast<std::size_t>(i) * k + j] = rhs[static_cast<std::size_t>(i)];
    }
    b(j) = det_by_minors(modified, k) / det_gram;
    for (int i = 0; i < k; ++i) {
      modified[static_cast<std::size_t>(i) * k + j] =
          gram[static_cast<std::size_t>(i) * k + j];
    }
  }
  return b;
}

EquivalenceReport check_yule_identity(const PartitionedDesign& design,
                                      const CheckOptions& opts) {
  if (design.k1() != 1) {
    throw DimensionMismatch("check_yule_identity: needs exactly one focus column");
  }
  const Vector x_res = residualize(design.w1(), design.w2());
  const Vector y_res = residualize(design.y(), design.w2());
  const double denom = x_res.squaredNorm();
  if (denom <= 1e-14 * design.w1().squaredNorm()) {
    throw DegenerateResidual("check_yule_identity: focus column in span of controls");
  }
  const double slope = y_res.dot(x_res) / denom;

  const RegressionFit fit = full_fit(design);
  const double coef = fit.coefficients(fit.coefficients.size() - 1);

  return make_report("yule-bivariate", std::abs(slope - coef), std::abs(coef), opts,
                     fit.gram_condition, base_descriptor(opts, design));
}

std::pair<EquivalenceReport, EquivalenceReport> check_lovell_identities(
    const PartitionedDesign& design, const CheckOptions& opts) {
  const RegressionFit fit = full_fit(design);
  const PartialFit partial = fwl_fit(design);

  const Vector b1 = focus_coefficients(fit, design.k1());
  EquivalenceReport coef =
      make_report("lovell-coefficient", max_abs_diff(b1, partial.b1_tilde),
                  max_abs(b1), opts, fit.gram_condition, base_descriptor(opts, design));
  EquivalenceReport resid = make_report(
      "lovell-residual", max_abs_diff(fit.residuals, partial.u_tilde),
      max_abs(fit.residuals), opts, fit.gram_condition, base_descriptor(opts, design));
  return {std::move(coef), std::move(resid)};
}

EquivalenceReport check_projection_decomposition(const PartitionedDesign& design,
                                                 const CheckOptions& opts) {
  if (design.n() > 200) {
    throw InstanceTooLarge("check_projection_decomposition: N capped at 200");
  }
  const Matrix p_w = dense_projector(design.stacked());
  const Matrix p_w2 = dense_projector(design.w2());
  const Matrix w1_star = residualize(design.w1(), design.w2());
  const Matrix p_w1s = dense_projector(w1_star);

  double worst = max_abs(p_w - p_w2 - p_w1s);
  worst = std::max(worst, max_abs(p_w2 * p_w1s));
  for (const Matrix* p : {&p_w, &p_w2, &p_w1s}) {
    worst = std::max(worst, max_abs(*p * *p - *p));
    worst = std::max(worst, max_abs(*p - p->transpose()));
  }

  const double cond =
      gram_condition_estimate(cholesky_factor(design.stacked().transpose() * design.stacked()));
  return make_report("projection-decomposition", worst, 1.0, opts, cond,
                     base_descriptor(opts, design));
}

EquivalenceReport check_block_relation(const PartitionedDesign& design,
                                       const CheckOptions& opts) {
  const GramInverseBlocks blocks = partitioned_gram_inverse(design);
  const Matrix lhs = blocks.w12.transpose() * design.w2().transpose() +
                     blocks.w22 * design.w1().transpose();

  const Matrix w1_star = residualize(design.w1(), design.w2());
  const Matrix rhs =
      cholesky_solve(w1_star.transpose() * w1_star, w1_star.transpose());

  const double cond =
      gram_condition_estimate(cholesky_factor(design.stacked().transpose() * design.stacked()));
  return make_report("block-relation", max_abs_diff(lhs, rhs), max_abs(rhs), opts,
                     cond, base_descriptor(opts, design));
}

EquivalenceReport check_cov_equivalence(const PartitionedDesign& design,
                                        const EstimatorSpec& spec,
                                        const CheckOptions& opts) {
  const RegressionFit fit = full_fit(design);
  const CovarianceEstimate full_est = cov_full(fit, spec);
  const Matrix v_full = focus_block(full_est.matrix, design.k1());

  const PartialFit partial = fwl_fit(design);
  const GramInverseBlocks blocks = partitioned_gram_inverse(design);
  const CovarianceEstimate partial_est = partial_cov(partial, design, blocks, spec);

  // Classical, HC1 and the G(N-1)/((G-1)(N-k)) cluster correction divide by
  // their own regression's degrees of freedom, so the two paths agree after
  // scaling each side by its denominator. Everything else matches exactly.
  const bool dof_scaled =
      spec.kind == Estimator::Classical || spec.kind == Estimator::HC1 ||
      (spec.kind == Estimator::Cluster && spec.cluster_dof == DofMode::ClusterGN);

  std::string name = "cov-equivalence/" + to_string(spec.kind);
  if (spec.kind == Estimator::HAC) {
    name += "-L" + std::to_string(spec.hac ? spec.hac->bandwidth() : -1);
  }
  if (spec.kind == Estimator::Cluster) {
    switch (spec.cluster_dof) {
      case DofMode::None: name += "-none"; break;
      case DofMode::ClusterG: name += "-g"; break;
      case DofMode::ClusterGN: name += "-gn"; break;
      default: break;
    }
  }

  Matrix lhs = partial_est.matrix;
  Matrix rhs = v_full;
  std::string descriptor =
      base_descriptor(opts, design) + ";mode=" + (dof_scaled ? "dof" : "exact");
  if (dof_scaled) {
    lhs *= static_cast<double>(design.n() - design.k1());
    rhs *= static_cast<double>(design.n() - design.k());
  }
  return make_report(std::move(name), max_abs_diff(lhs, rhs), max_abs(rhs), opts,
                     fit.gram_condition, std::move(descriptor));
}

// ---------------------------------------------------------------------------
// Random instances

namespace {

/// Normal deviates via Box-Muller over a 53-bit uniform, so streams are
/// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {
    for (;;) {
      const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(angle);
    have_spare_ = true;
    return r * std::cos(angle);
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::string to_string(ErrorProcess p) {
  switch (p) {
    case ErrorProcess::IID: return "iid";
    case ErrorProcess::HeteroQuadratic: return "hetero";
    case ErrorProcess::AR1: return "ar1";
    case ErrorProcess::ClusterEffects: return "cluster";
  }
  return "?";
}

Instance make_instance(const InstanceSpec& spec) {
  if (spec.k1 < 1 || spec.k2 < 1 || spec.n <= spec.k1 + spec.k2) {
    throw DimensionMismatch("make_instance: invalid shape");
  }
  if (!(spec.rho >= 0.0 && spec.rho <= 0.999)) {
    throw Error("make_instance: rho must lie in [0, 0.999]");
  }
  if (spec.n_clusters < 2 || spec.n_clusters > spec.n) {
    throw Error("make_instance: need 2 <= n_clusters <= n");
  }

  Rng rng(spec.seed);
  const Index n = spec.n;

  Matrix w2(n, spec.k2);
  Index first_stochastic_w2 = 0;
  if (spec.intercept == InterceptBlock::InControls) {
    w2.col(0).setOnes();
    first_stochastic_w2 = 1;
  }
  for (Index j = first_stochastic_w2; j < spec.k2; ++j) {
    w2.col(j) = rng.normal_vector(n);
  }
  const Index n_stochastic_w2 = spec.k2 - first_stochastic_w2;

  Matrix w1(n, spec.k1);
  Index first_stochastic_w1 = 0;
  if (spec.intercept == InterceptBlock::InFocus) {
    w1.col(0).setOnes();
    first_stochastic_w1 = 1;
  }
  for (Index j = first_stochastic_w1; j < spec.k1; ++j) {
    Vector fresh = rng.normal_vector(n);
    if (spec.rho > 0.0 && n_stochastic_w2 > 0) {
      const Index src =
          first_stochastic_w2 + (j - first_stochastic_w1) % n_stochastic_w2;
      w1.col(j) = spec.rho * w2.col(src) +
                  std::sqrt(1.0 - spec.rho * spec.rho) * fresh;
    } else {
      w1.col(j) = fresh;
    }
  }

  const Vector beta2 = rng.normal_vector(spec.k2);
  const Vector beta1 = rng.normal_vector(spec.k1);

  // Contiguous cluster blocks; every id in 0..G-1 occupied since G <= N.
  std::vector<Index> assignment(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    assignment[static_cast<std::size_t>(i)] = (i * spec.n_clusters) / n;
  }
  ClusterMap clusters(std::move(assignment));

  Vector noise = rng.normal_vector(n);
  Vector errors(n);
  switch (spec.errors) {
    case ErrorProcess::IID:
      errors = noise;
      break;
    case ErrorProcess::HeteroQuadratic: {
      // Variance grows with the first stochastic focus column (or the first
      // focus column when the block is just the intercept).
      const Index driver = std::min(first_stochastic_w1, spec.k1 - 1);
      errors =
          ((1.0 + w1.col(driver).array().square()).sqrt() * noise.array()).matrix();
      break;
    }
    case ErrorProcess::AR1: {
      errors(0) = noise(0);
      for (Index t = 1; t < n; ++t) {
        errors(t) = 0.5 * errors(t - 1) + noise(t);
      }
      break;
    }
    case ErrorProcess::ClusterEffects: {
      const Vector effects = rng.normal_vector(spec.n_clusters);
      for (Index i = 0; i < n; ++i) {
        errors(i) =
            effects(clusters.assignment()[static_cast<std::size_t>(i)]) + noise(i);
      }
      break;
    }
  }

  const Vector y = w2 * beta2 + w1 * beta1 + errors;

  std::ostringstream os;
  os << "seed=" << spec.seed << ";n=" << n << ";k1=" << spec.k1
     << ";k2=" << spec.k2 << ";rho=" << format_double(spec.rho)
     << ";err=" << to_string(spec.errors)
     << ";intercept=" << to_string(spec.intercept);

  return Instance{PartitionedDesign(y, std::move(w1), std::move(w2), spec.intercept),
                  std::move(clusters), os.str()};
}

// ---------------------------------------------------------------------------
// Suite

int run_identity_suite(const SuiteConfig& config,
                       const std::function<void(const EquivalenceReport&)>& sink) {
  int failures = 0;
  const auto emit = [&](const EquivalenceReport& report) {
    if (!report.passed) ++failures;
    sink(report);
  };

  const auto opts_with = [&](double rtol, const std::string& descriptor) {
    CheckOptions opts;
    if (config.tolerance) {
      // A forced tolerance is exactly what runs; no condition fallback.
      opts.rtol = *config.tolerance;
      opts.condition_relax = false;
    } else {
      opts.rtol = rtol;
    }
    opts.descriptor = descriptor;
    return opts;
  };

  const ErrorProcess processes[] = {ErrorProcess::IID, ErrorProcess::HeteroQuadratic,
                                    ErrorProcess::AR1, ErrorProcess::ClusterEffects};

  for (int i = 0; i < config.instances; ++i) {
    const std::uint64_t s = mix_seed(config.seed, static_cast<std::uint64_t>(i));
    const Index k1 = 1 + (i % 5);
    const Index k2 = 1 + ((i * 3) % 10);
    const double rho = config.rho_max * static_cast<double>(i % 7) / 6.0;
    const InterceptBlock intercept =
        (i % 4 == 3) ? InterceptBlock::InFocus : InterceptBlock::InControls;

    // Coefficient and residual identities on the headline-size instance.
    {
      InstanceSpec ispec{200, k1, k2, rho, processes[i % 4], intercept, 8, s};
      const Instance inst = make_instance(ispec);
      const auto [coef, resid] =
          check_lovell_identities(inst.design, opts_with(1e-9, inst.descriptor));
      emit(coef);
      emit(resid);
    }

    // Bivariate identity needs a single focus column.
    {
      InstanceSpec ispec{120, 1, k2, rho, ErrorProcess::HeteroQuadratic,
                         InterceptBlock::InControls, 8, mix_seed(s, 1)};
      const Instance inst = make_instance(ispec);
      emit(check_yule_identity(inst.design, opts_with(1e-9, inst.descriptor)));
    }

    // Dense projector decomposition at small N.
    {
      InstanceSpec ispec{50, std::min<Index>(k1, 3), std::min<Index>(k2, 4), rho,
                         ErrorProcess::IID, intercept, 4, mix_seed(s, 2)};
      const Instance inst = make_instance(ispec);
      emit(check_projection_decomposition(inst.design,
                                          opts_with(1e-10, inst.descriptor)));
    }

    // Focus rows of the partitioned inverse.
    {
      InstanceSpec ispec{40, k1, k2, rho, ErrorProcess::IID,
                         InterceptBlock::InControls, 4, mix_seed(s, 3)};
      const Instance inst = make_instance(ispec);
      emit(check_block_relation(inst.design, opts_with(1e-9, inst.descriptor)));
    }

    // Cramer oracle against the factorization path, small k only.
    {
      InstanceSpec ispec{30, 1 + (i % 2), 1 + (i % 4), rho, ErrorProcess::IID,
                         InterceptBlock::InControls, 4, mix_seed(s, 4)};
      const Instance inst = make_instance(ispec);
      const Matrix x = inst.design.stacked();
      const RegressionFit fit = ols_fit(x, inst.design.y());
      const Vector oracle = cramer_oracle_fit(x, inst.design.y());
      emit(make_report("cross-oracle/cramer",
                       (fit.coefficients - oracle).cwiseAbs().maxCoeff(),
                       fit.coefficients.cwiseAbs().maxCoeff(),
                       opts_with(1e-8, inst.descriptor), fit.gram_condition,
                       inst.descriptor));
    }

    // Covariance equivalences, one instance per error flavor.
    {
      InstanceSpec ispec{60, k1, k2, rho, ErrorProcess::HeteroQuadratic, intercept,
                         6, mix_seed(s, 5)};
      const Instance inst = make_instance(ispec);
      for (Estimator e : {Estimator::Classical, Estimator::HC0, Estimator::HC1}) {
        EstimatorSpec espec;
        espec.kind = e;
        emit(check_cov_equivalence(inst.design, espec,
                                   opts_with(1e-9, inst.descriptor)));
      }
      for (Estimator e : {Estimator::HC2, Estimator::HC3, Estimator::HC4}) {
        EstimatorSpec espec;
        espec.kind = e;
        emit(check_cov_equivalence(inst.design, espec,
                                   opts_with(1e-10, inst.descriptor)));
      }
    }
    {
      InstanceSpec ispec{80, k1, k2, rho, ErrorProcess::AR1,
                         InterceptBlock::InControls, 6, mix_seed(s, 6)};
      const Instance inst = make_instance(ispec);
      for (Index bandwidth : {0, 1, 3}) {
        EstimatorSpec espec;
        espec.kind = Estimator::HAC;
        espec.hac = HacSpec::bartlett(bandwidth);
        emit(check_cov_equivalence(inst.design, espec,
                                   opts_with(1e-9, inst.descriptor)));
      }
    }
    {
      InstanceSpec ispec{90, k1, k2, rho, ErrorProcess::ClusterEffects,
                         InterceptBlock::InControls, 6, mix_seed(s, 7)};
      const Instance inst = make_instance(ispec);
      for (DofMode mode : {DofMode::None, DofMode::ClusterG, DofMode::ClusterGN}) {
        EstimatorSpec espec;
        espec.kind = Estimator::Cluster;
        espec.clusters = inst.clusters;
        espec.cluster_dof = mode;
        emit(check_cov_equivalence(inst.design, espec,
                                   opts_with(1e-9, inst.descriptor)));
      }
    }
  }
  return failures;
}

}  // namespace fwl::verify
