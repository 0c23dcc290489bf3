#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sfdde/solver.hpp"

namespace sfdde {

/// A coupled comparison of the reference solution (jumps down to eps_ref)
/// against the substituted solutions X^eps for each eps in eps_list.
struct RobustnessSweep {
  double eps_ref = 0.01;
  std::vector<double> eps_list;  // strictly decreasing, all > eps_ref
  double p = 2.0;
  MonteCarloSetup setup;

  /// Throws InvalidArgument on an unsorted list or an eps <= eps_ref.
  void validate() const;
};

struct SweepPoint {
  double eps = 0.0;
  double bound_proxy = 0.0;  // ||lambda_eps||^p_{L^2} + ||lambda_eps||^p_{L^p} (+ |Lambda|^p when overridden)
  double error_est = 0.0;    // mean of sup |X - X^eps|^p
  double standard_error = 0.0;
  std::size_t n_paths = 0;
  bool degenerate = false;   // bound_proxy == 0, left out of the fit
};

struct SweepReport {
  double eps_ref = 0.0;
  double p = 2.0;
  std::vector<SweepPoint> points;
  std::size_t excluded_paths = 0;
  // log error_est = intercept + slope log bound_proxy over non-degenerate points
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  bool fitted = false;
  /// max error_est / bound_proxy over non-degenerate points
  double max_ratio = 0.0;
  /// bound proxy at eps_ref: the error committed by the reference itself, up to a constant
  double reference_bound = 0.0;
};

/// Treatment for X^eps: jumps with |z| >= eps, compensator over |z| >= eps and
/// Gaussian scale Lambda(eps) (or the override). Throws NotFactorized.
JumpTreatment build_approx_step(const SfddeModel& model, double eps);
JumpTreatment build_approx_step(const SfddeModel& model, double eps, const Eigen::MatrixXd& gaussian);

/// ||lambda 1_{|z|<eps}||^p_{L^2(nu)} + ||lambda 1_{|z|<eps}||^p_{L^p(nu)}.
double bound_proxy(const SfddeModel& model, double eps, double p);

using LambdaOverride = std::function<Eigen::MatrixXd(double eps)>;

SweepReport coupled_sweep(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                          const RobustnessSweep& sweep);

/// As coupled_sweep with Lambda(eps) replaced; the proxy gains |Lambda(eps)|^p (Frobenius norm).
SweepReport general_lambda_sweep(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                 const RobustnessSweep& sweep, const LambdaOverride& lambda);

/// True when error_est decreases along the sweep, allowing one inversion that
/// stays within twice the combined standard error.
bool decreasing_within_noise(const SweepReport& report);

struct VarianceEntry {
  int row = 0;
  int col = 0;
  double predicted = 0.0;       // T Lambda(eps)^2
  double omitted = 0.0;         // T Lambda(eps_ref)^2, the shell below the inner truncation
  double sample_variance = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool pass = false;
};

struct VarianceReport {
  double eps = 0.0;
  double eps_ref = 0.0;
  double horizon = 0.0;
  std::size_t samples = 0;
  std::vector<VarianceEntry> entries;
  bool pass() const;
};

/// Sample variance of int_0^T lambda^{i,j} 1_{eps_ref <= |z| < eps} dN~^j over
/// `samples` draws against T Lambda(eps)^2, with a 99% chi-square interval.
VarianceReport variance_preservation_check(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double eps,
                                           double eps_ref, double horizon, std::size_t samples, std::uint64_t seed,
                                           int threads = 1);

/// CSV with columns eps,bound_proxy,error_est,stderr,n_paths.
void write_sweep_csv(std::ostream& out, const SweepReport& report);
/// key: value summary of the regression and the degenerate points.
void write_sweep_summary(std::ostream& out, const SweepReport& report);

}  // namespace sfdde
