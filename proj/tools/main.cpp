// Command-line front end: partitioned least-squares fits from CSV data,
// the identity verification suite, and the full-vs-partial benchmark.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "csv.hpp"
#include "fwl/covariance.hpp"
#include "fwl/regression.hpp"
#include "fwl/verify.hpp"

namespace {

using namespace fwl;

// Exit codes: 0 ok, 2 input error, 3 numeric error, 4 equivalence check failed.
constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCheckFailed = 4;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string vector_json(const Vector& v) {
  std::string out = "[";
  for (Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += num(v(i));
  }
  return out + "]";
}

std::string matrix_json(const Matrix& m) {
  std::string out = "[";
  for (Index i = 0; i < m.rows(); ++i) {
    if (i > 0) out += ",";
    out += vector_json(m.row(i).transpose());
  }
  return out + "]";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "classical") return Estimator::Classical;
  if (name == "hc0") return Estimator::HC0;
  if (name == "hc1") return Estimator::HC1;
  if (name == "hc2") return Estimator::HC2;
  if (name == "hc3") return Estimator::HC3;
  if (name == "hc4") return Estimator::HC4;
  if (name == "hac") return Estimator::HAC;
  if (name == "cluster") return Estimator::Cluster;
  throw cli::ParseError("unknown estimator '" + name + "'");
}

DofMode parse_cluster_dof(const std::string& name) {
  if (name == "none") return DofMode::None;
  if (name == "g") return DofMode::ClusterG;
  return DofMode::ClusterGN;  // "gn", enforced by the option validator
}

InterceptBlock parse_intercept(const std::string& name) {
  if (name == "controls") return InterceptBlock::InControls;
  if (name == "focus") return InterceptBlock::InFocus;
  return InterceptBlock::Absent;  // "none"
}

/// Estimators whose partial and full covariances differ by the
/// (N-k1)/(N-k) degree-of-freedom ratio rather than matching exactly.
bool dof_scaled(const EstimatorSpec& spec) {
  return spec.kind == Estimator::Classical || spec.kind == Estimator::HC1 ||
         (spec.kind == Estimator::Cluster && spec.cluster_dof == DofMode::ClusterGN);
}

// ---------------------------------------------------------------------------
// fit

struct FitConfig {
  std::string input_path;
  std::string outcome;  // empty: first CSV column
  std::vector<std::string> focus;
  std::vector<std::string> controls;
  std::string intercept = "controls";
  std::string estimator = "classical";
  long hac_bandwidth = -1;  // negative: plug-in rule
  std::string cluster_col;
  std::string cluster_dof = "none";
  bool hc4_min_delta = false;
  bool check = false;
  std::string format = "json";
};

struct AssembledProblem {
  PartitionedDesign design;
  EstimatorSpec spec;
  std::vector<std::string> focus_names;  // aligned with design.w1() columns
};

AssembledProblem assemble_problem(const cli::CsvTable& table, const FitConfig& cfg) {
  if (table.n_rows() == 0) {
    throw cli::ParseError("no data rows in '" + cfg.input_path + "'");
  }
  if (cfg.focus.empty()) {
    throw cli::ParseError("--focus needs at least one column");
  }
  const std::string outcome = cfg.outcome.empty() ? table.header().front() : cfg.outcome;
  for (const auto& name : cfg.focus) {
    if (name == outcome) {
      throw cli::ParseError("outcome column '" + name + "' cannot be a focus column");
    }
    for (const auto& other : cfg.controls) {
      if (name == other) {
        throw cli::ParseError("column '" + name + "' is listed as focus and control");
      }
    }
  }
  for (const auto& name : cfg.controls) {
    if (name == outcome) {
      throw cli::ParseError("outcome column '" + name + "' cannot be a control column");
    }
  }

  const InterceptBlock intercept = parse_intercept(cfg.intercept);
  const Index n = table.n_rows();
  const Index k1 = static_cast<Index>(cfg.focus.size()) +
                   (intercept == InterceptBlock::InFocus ? 1 : 0);
  const Index k2 = static_cast<Index>(cfg.controls.size()) +
                   (intercept == InterceptBlock::InControls ? 1 : 0);
  if (k2 == 0) {
    throw cli::ParseError(
        "need --controls columns or --intercept controls so the conditioning "
        "block is non-empty");
  }
  if (n <= k1 + k2) {
    throw cli::ParseError("only " + std::to_string(n) + " rows for " +
                          std::to_string(k1 + k2) + " regressors");
  }

  std::vector<std::string> focus_names;
  Matrix w1(n, k1);
  Index col = 0;
  if (intercept == InterceptBlock::InFocus) {
    w1.col(col++).setOnes();
    focus_names.push_back("(intercept)");
  }
  for (const auto& name : cfg.focus) {
    w1.col(col++) = table.numeric_column(name);
    focus_names.push_back(name);
  }

  Matrix w2(n, k2);
  col = 0;
  if (intercept == InterceptBlock::InControls) w2.col(col++).setOnes();
  for (const auto& name : cfg.controls) w2.col(col++) = table.numeric_column(name);

  // A constant column in the data plus the implicit intercept would be
  // collinear; surface it as an input problem with a hint.
  if (intercept != InterceptBlock::Absent) {
    Index ones = 0;
    for (Index j = 0; j < k1; ++j) ones += (w1.col(j).array() == 1.0).all() ? 1 : 0;
    for (Index j = 0; j < k2; ++j) ones += (w2.col(j).array() == 1.0).all() ? 1 : 0;
    if (ones != 1) {
      throw cli::ParseError(
          "the selected columns already contain a column of ones; rerun with "
          "--intercept none or drop that column");
    }
  }

  std::optional<ClusterMap> clusters;
  if (parse_estimator(cfg.estimator) == Estimator::Cluster) {
    if (cfg.cluster_col.empty()) {
      throw cli::ParseError("cluster estimator needs --cluster-col");
    }
    clusters = ClusterMap::from_labels(table.string_column(cfg.cluster_col));
  }

  EstimatorSpec spec;
  spec.kind = parse_estimator(cfg.estimator);
  spec.hc4_delta = cfg.hc4_min_delta ? Hc4Delta::MinForm : Hc4Delta::MaxForm;
  if (spec.kind == Estimator::HAC) {
    const Index bw = cfg.hac_bandwidth >= 0 ? static_cast<Index>(cfg.hac_bandwidth)
                                            : HacSpec::default_bandwidth(n);
    spec.hac = HacSpec::bartlett(bw);
  }
  if (spec.kind == Estimator::Cluster) {
    spec.clusters = std::move(clusters);
    spec.cluster_dof = parse_cluster_dof(cfg.cluster_dof);
  }

  return AssembledProblem{
      PartitionedDesign(table.numeric_column(outcome), std::move(w1), std::move(w2),
                        intercept),
      std::move(spec), std::move(focus_names)};
}

void warn_if_ill_conditioned(const PartitionedDesign& design,
                             const PartialFit& partial) {
  double gram_cond = partial.gram_condition;
  const Matrix& w2 = design.w2();
  gram_cond = std::max(
      gram_cond, gram_condition_estimate(cholesky_factor(w2.transpose() * w2)));
  if (std::sqrt(gram_cond) > 1e8) {
    std::cerr << "warning: design condition number estimate "
              << num(std::sqrt(gram_cond))
              << " exceeds 1e8; estimates may be unreliable\n";
  }
}

int run_fit(const FitConfig& cfg) {
  const cli::CsvTable table = cli::read_csv(cfg.input_path);
  AssembledProblem problem = assemble_problem(table, cfg);
  const PartitionedDesign& design = problem.design;

  const PartialFit partial = fwl_fit(design);
  warn_if_ill_conditioned(design, partial);

  const CovarianceEstimate estimate = partial_cov(partial, design, problem.spec);

  // Report the covariance of the multiple-regression coefficients: for the
  // degree-of-freedom-scaled estimators that means rescaling the partial
  // estimate by (N-k1)/(N-k).
  Matrix vcov = estimate.matrix;
  if (dof_scaled(problem.spec)) {
    vcov *= static_cast<double>(design.n() - design.k1()) /
            static_cast<double>(design.n() - design.k());
  }
  const Vector se = vcov.diagonal().cwiseSqrt();

  std::string check_json = "null";
  bool check_passed = true;
  std::optional<verify::EquivalenceReport> check_report;
  if (cfg.check) {
    check_report = verify::check_cov_equivalence(design, problem.spec);
    check_passed = check_report->passed;
    check_json = verify::to_json_line(*check_report);
  }

  if (cfg.format == "json") {
    std::string out = "{";
    out += "\"coefficients\":" + vector_json(partial.b1_tilde);
    out += ",\"standard_errors\":" + vector_json(se);
    out += ",\"covariance\":" + matrix_json(vcov);
    out += ",\"estimator\":\"" + cfg.estimator + "\"";
    out += ",\"n_obs\":" + std::to_string(design.n());
    out += ",\"k1\":" + std::to_string(design.k1());
    out += ",\"k2\":" + std::to_string(design.k2());
    out += ",\"check\":" + check_json;
    out += "}";
    std::cout << out << "\n";
  } else {
    std::printf("estimator: %s   N: %ld   k1: %ld   k2: %ld\n",
                cfg.estimator.c_str(), static_cast<long>(design.n()),
                static_cast<long>(design.k1()), static_cast<long>(design.k2()));
    std::printf("%-20s %16s %16s\n", "column", "coefficient", "std.error");
    for (Index i = 0; i < partial.b1_tilde.size(); ++i) {
      std::printf("%-20s %16.8g %16.8g\n",
                  problem.focus_names[static_cast<std::size_t>(i)].c_str(),
                  partial.b1_tilde(i), se(i));
    }
    if (check_report) {
      std::printf("check: %s (max_abs_err=%s, tolerance=%s)\n",
                  check_passed ? "PASS" : "FAIL",
                  num(check_report->max_abs_err).c_str(),
                  num(check_report->tolerance_used).c_str());
    }
  }
  return check_passed ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyConfig {
  std::uint64_t seed = 42;
  int instances = 100;
  double rho = 0.9;
  double tolerance = -1.0;  // negative: per-identity defaults
  std::string format = "json";
};

int run_verify(const VerifyConfig& cfg) {
  verify::SuiteConfig suite;
  suite.seed = cfg.seed;
  suite.instances = cfg.instances;
  suite.rho_max = cfg.rho;
  if (cfg.tolerance >= 0.0) suite.tolerance = cfg.tolerance;

  int reports = 0;
  const auto sink = [&](const verify::EquivalenceReport& report) {
    ++reports;
    if (cfg.format == "json") {
      std::cout << verify::to_json_line(report) << "\n";
    } else {
      std::printf("%-4s %-28s max_abs=%-12s tol=%-12s %s\n",
                  report.passed ? "PASS" : "FAIL", report.identity_name.c_str(),
                  num(report.max_abs_err).c_str(), num(report.tolerance_used).c_str(),
                  report.instance_descriptor.c_str());
    }
  };
  const int failures = verify::run_identity_suite(suite, sink);
  std::cerr << "checked " << reports << " identity reports, " << failures
            << " failed\n";
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// bench

struct BenchConfig {
  long n = 2000;
  long k1 = 500;
  long k2 = 500;
  std::uint64_t seed = 1;
  std::string estimator = "classical";
  long hac_bandwidth = -1;
  std::string cluster_dof = "none";
  std::string format = "json";
};

int run_bench(const BenchConfig& cfg) {
  verify::InstanceSpec ispec;
  ispec.n = cfg.n;
  ispec.k1 = cfg.k1;
  ispec.k2 = cfg.k2;
  ispec.rho = 0.3;
  ispec.errors = verify::ErrorProcess::IID;
  ispec.intercept = InterceptBlock::InControls;
  ispec.n_clusters = std::min<Index>(10, cfg.n / 2);
  ispec.seed = cfg.seed;
  const verify::Instance instance = verify::make_instance(ispec);
  const PartitionedDesign& design = instance.design;

  EstimatorSpec spec;
  spec.kind = parse_estimator(cfg.estimator);
  if (spec.kind == Estimator::HAC) {
    const Index bw = cfg.hac_bandwidth >= 0 ? static_cast<Index>(cfg.hac_bandwidth)
                                            : HacSpec::default_bandwidth(design.n());
    spec.hac = HacSpec::bartlett(bw);
  }
  if (spec.kind == Estimator::Cluster) {
    spec.clusters = instance.clusters;
    spec.cluster_dof = parse_cluster_dof(cfg.cluster_dof);
  }

  using Clock = std::chrono::steady_clock;

  const auto t0 = Clock::now();
  const RegressionFit fit = full_fit(design);
  const CovarianceEstimate full_est = cov_full(fit, spec);
  const auto t1 = Clock::now();

  const PartialFit partial = fwl_fit(design);
  const CovarianceEstimate partial_est = partial_cov(partial, design, spec);
  const auto t2 = Clock::now();

  const double full_seconds = std::chrono::duration<double>(t1 - t0).count();
  const double partial_seconds = std::chrono::duration<double>(t2 - t1).count();
  const Vector b1 = focus_coefficients(fit, design.k1());
  const double discrepancy = (b1 - partial.b1_tilde).cwiseAbs().maxCoeff();
  (void)full_est;
  (void)partial_est;

  if (cfg.format == "json") {
    std::string out = "{";
    out += "\"n\":" + std::to_string(design.n());
    out += ",\"k1\":" + std::to_string(design.k1());
    out += ",\"k2\":" + std::to_string(design.k2());
    out += ",\"estimator\":\"" + cfg.estimator + "\"";
    out += ",\"full_seconds\":" + num(full_seconds);
    out += ",\"partial_seconds\":" + num(partial_seconds);
    out += ",\"ratio\":" + num(partial_seconds / full_seconds);
    out += ",\"max_coef_discrepancy\":" + num(discrepancy);
    out += "}";
    std::cout << out << "\n";
  } else {
    std::printf("n=%ld k1=%ld k2=%ld estimator=%s\n", static_cast<long>(design.n()),
                static_cast<long>(design.k1()), static_cast<long>(design.k2()),
                cfg.estimator.c_str());
    std::printf("full path:    %.4f s\n", full_seconds);
    std::printf("partial path: %.4f s\n", partial_seconds);
    std::printf("ratio:        %.3f\n", partial_seconds / full_seconds);
    std::printf("max coefficient discrepancy: %s\n", num(discrepancy).c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Least-squares regression through partial (residualized) fits, "
               "with runtime equivalence checks against the full regression"};
  app.require_subcommand(1);

  const auto format_check = CLI::IsMember({"json", "table"});

  FitConfig fit_cfg;
  CLI::App* fit = app.add_subcommand(
      "fit", "Estimate focus coefficients and standard errors from a CSV file");
  fit->add_option("--input", fit_cfg.input_path, "CSV file (header row required)")
      ->required();
  fit->add_option("--focus", fit_cfg.focus, "focus columns (comma separated)")
      ->required()
      ->delimiter(',');
  fit->add_option("--controls", fit_cfg.controls, "control columns (comma separated)")
      ->delimiter(',');
  fit->add_option("--outcome", fit_cfg.outcome,
                  "outcome column (default: first CSV column)");
  fit->add_option("--intercept", fit_cfg.intercept,
                  "where the column of ones goes")
      ->check(CLI::IsMember({"controls", "focus", "none"}));
  fit->add_option("--estimator", fit_cfg.estimator, "covariance estimator")
      ->check(CLI::IsMember(
          {"classical", "hc0", "hc1", "hc2", "hc3", "hc4", "hac", "cluster"}));
  fit->add_option("--hac-bandwidth", fit_cfg.hac_bandwidth,
                  "HAC lag cutoff L (default: 4*(N/100)^(2/9))")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--cluster-col", fit_cfg.cluster_col,
                  "column with cluster labels (compared as strings)");
  fit->add_option("--cluster-dof", fit_cfg.cluster_dof,
                  "cluster correction: none, g, or gn")
      ->check(CLI::IsMember({"none", "g", "gn"}));
  fit->add_flag("--hc4-min-delta", fit_cfg.hc4_min_delta,
                "use the min-form HC4 leverage exponent");
  fit->add_flag("--check", fit_cfg.check,
                "also run the full regression and verify the estimates agree");
  fit->add_option("--format", fit_cfg.format, "json or table")->check(format_check);

  VerifyConfig verify_cfg;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "Run the identity suite over seeded random instances");
  verify_cmd->add_option("--seed", verify_cfg.seed, "base seed");
  verify_cmd->add_option("--instances", verify_cfg.instances, "instances per identity")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--rho", verify_cfg.rho, "maximum inter-block correlation")
      ->check(CLI::Range(0.0, 0.999));
  verify_cmd->add_option("--tolerance", verify_cfg.tolerance,
                         "override every identity's relative tolerance");
  verify_cmd->add_option("--format", verify_cfg.format, "json or table")
      ->check(format_check);

  BenchConfig bench_cfg;
  CLI::App* bench = app.add_subcommand(
      "bench", "Time the partial path against the direct full-Gram path");
  bench->add_option("--n", bench_cfg.n, "observations")->check(CLI::PositiveNumber);
  bench->add_option("--k1", bench_cfg.k1, "focus columns")->check(CLI::PositiveNumber);
  bench->add_option("--k2", bench_cfg.k2, "control columns")
      ->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_cfg.seed, "instance seed");
  bench->add_option("--estimator", bench_cfg.estimator, "covariance estimator")
      ->check(CLI::IsMember(
          {"classical", "hc0", "hc1", "hc2", "hc3", "hc4", "hac", "cluster"}));
  bench->add_option("--hac-bandwidth", bench_cfg.hac_bandwidth, "HAC lag cutoff")
      ->check(CLI::NonNegativeNumber);
  bench->add_option("--cluster-dof", bench_cfg.cluster_dof, "none, g, or gn")
      ->check(CLI::IsMember({"none", "g", "gn"}));
  bench->add_option("--format", bench_cfg.format, "json or table")
      ->check(format_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (fit->parsed()) return run_fit(fit_cfg);
    if (verify_cmd->parsed()) return run_verify(verify_cfg);
    if (bench->parsed()) return run_bench(bench_cfg);
  } catch (const cli::FileNotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const cli::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory for this problem size\n";
    return kExitNumeric;
  } catch (const NotPositiveDefinite& e) {
    std::cerr << "error: rank-deficient design (collinear regressors): " << e.what()
              << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
