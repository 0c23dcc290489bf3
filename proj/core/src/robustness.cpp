#include "sfdde/robustness.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "sfdde/error.hpp"
#include "sfdde/parallel.hpp"

namespace sfdde {
namespace {

void require_factorized(const SfddeModel& model) {
  if (!model.factorized()) throw Error(ErrorCode::NotFactorized, "substitution needs h = h0 * lambda");
}

double path_gap(const CadlagPath& a, const CadlagPath& b, double p) {
  return std::pow((a.values() - b.values()).colwise().norm().maxCoeff(), p);
}

bool excludable(const Error& e) {
  return e.code() == ErrorCode::NonFinite || e.code() == ErrorCode::NonIntegrable;
}

SweepReport run_sweep(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                      const RobustnessSweep& sweep, const std::vector<JumpTreatment>& treatments,
                      const std::vector<double>& proxies) {
  sweep.validate();
  require_factorized(model);
  const NoiseGenerator generator(model, grid.horizon(), grid.dt(), sweep.eps_ref, true);
  const JumpTreatment reference = reference_treatment(model, sweep.eps_ref);
  const std::size_t n = sweep.setup.paths;
  const std::size_t variants = treatments.size();
  std::vector<double> gaps(n * variants, 0.0);
  std::vector<char> excluded(n, 0);
  SolveOptions options;
  options.record_jumps = false;

  parallel_for(n, sweep.setup.threads, [&](std::size_t i) {
    try {
      const NoiseRecord rec = generator.generate(sweep.setup.seed, i);
      const SolveReport x = euler_solve(model, eta, grid, rec, reference, options);
      for (std::size_t e = 0; e < variants; ++e) {
        const SolveReport xe = euler_solve(model, eta, grid, rec, treatments[e], options);
        gaps[i * variants + e] = path_gap(x.path, xe.path, sweep.p);
      }
    } catch (const Error& err) {
      if (!excludable(err)) throw;
      excluded[i] = 1;
    }
  });

  SweepReport report;
  report.eps_ref = sweep.eps_ref;
  report.p = sweep.p;
  for (char c : excluded) report.excluded_paths += static_cast<std::size_t>(c);
  if (report.excluded_paths * 1000 > n) {
    std::ostringstream msg;
    msg << report.excluded_paths << " of " << n << " paths failed (limit 0.1%)";
    throw Error(ErrorCode::TooManyFailures, msg.str());
  }
  std::vector<double> column;
  std::vector<double> lx, ly;
  for (std::size_t e = 0; e < variants; ++e) {
    column.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (!excluded[i]) column.push_back(gaps[i * variants + e]);
    }
    const auto m = stats::summarize(column);
    SweepPoint pt;
    pt.eps = sweep.eps_list[e];
    pt.bound_proxy = proxies[e];
    pt.error_est = m.mean;
    pt.standard_error = m.stderr_of_mean;
    pt.n_paths = m.count;
    pt.degenerate = !(pt.bound_proxy > 0.0);
    if (!pt.degenerate) {
      report.max_ratio = std::max(report.max_ratio, pt.error_est / pt.bound_proxy);
      if (pt.error_est > 0.0) {
        lx.push_back(std::log(pt.bound_proxy));
        ly.push_back(std::log(pt.error_est));
      }
    }
    report.points.push_back(pt);
  }
  if (lx.size() >= 2) {
    const auto fit = stats::fit_line(lx, ly);
    report.slope = fit.slope;
    report.intercept = fit.intercept;
    report.r_squared = fit.r_squared;
    report.fitted = true;
  }
  report.reference_bound = sweep.eps_ref > 0.0 ? bound_proxy(model, sweep.eps_ref, sweep.p) : 0.0;
  return report;
}

}  // namespace

void RobustnessSweep::validate() const {
  if (eps_list.empty()) throw Error(ErrorCode::InvalidArgument, "eps_list is empty");
  if (!(eps_ref >= 0.0)) throw Error(ErrorCode::InvalidArgument, "eps_ref must be nonnegative");
  if (!(p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "p must be at least 1");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    if (!(eps_list[i] > eps_ref)) {
      std::ostringstream msg;
      msg << "eps = " << eps_list[i] << " must exceed eps_ref = " << eps_ref;
      throw Error(ErrorCode::InvalidArgument, msg.str());
    }
    if (i > 0 && !(eps_list[i] < eps_list[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "eps_list must be strictly decreasing");
    }
  }
}

JumpTreatment build_approx_step(const SfddeModel& model, double eps) {
  require_factorized(model);
  Eigen::MatrixXd gaussian = Eigen::MatrixXd::Zero(model.k, model.n);
  if (!model.scaling.empty() && model.n > 0) gaussian = sigma_eps(model.scaling, model.nu, eps);
  return build_approx_step(model, eps, gaussian);
}

JumpTreatment build_approx_step(const SfddeModel& model, double eps, const Eigen::MatrixXd& gaussian) {
  require_factorized(model);
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "substitution threshold must be positive");
  if (gaussian.rows() != model.k || gaussian.cols() != model.n) {
    throw Error(ErrorCode::DimensionMismatch, "Gaussian scale must be k x n");
  }
  JumpTreatment t;
  t.eps_cut = eps;
  t.compensator = Eigen::MatrixXd::Zero(model.k, model.n);
  if (!model.scaling.empty() && model.n > 0) t.compensator = compensator_integral(model.scaling, model.nu, eps);
  t.gaussian = gaussian;
  return t;
}

double bound_proxy(const SfddeModel& model, double eps, double p) {
  require_factorized(model);
  if (model.scaling.empty() || model.n == 0) return 0.0;
  const auto band = MagnitudeBand::below(eps);
  const double l2 = lp_nu_norm(model.scaling, model.nu, 2.0, band);
  const double lp = lp_nu_norm(model.scaling, model.nu, p, band);
  return std::pow(l2, p) + std::pow(lp, p);
}

SweepReport coupled_sweep(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                          const RobustnessSweep& sweep) {
  sweep.validate();
  std::vector<JumpTreatment> treatments;
  std::vector<double> proxies;
  for (double eps : sweep.eps_list) {
    treatments.push_back(build_approx_step(model, eps));
    proxies.push_back(bound_proxy(model, eps, sweep.p));
  }
  return run_sweep(model, eta, grid, sweep, treatments, proxies);
}

SweepReport general_lambda_sweep(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                 const RobustnessSweep& sweep, const LambdaOverride& lambda) {
  sweep.validate();
  std::vector<JumpTreatment> treatments;
  std::vector<double> proxies;
  for (double eps : sweep.eps_list) {
    const Eigen::MatrixXd scale = lambda(eps);
    if (!scale.allFinite()) throw Error(ErrorCode::NonFinite, "Lambda override is not finite");
    treatments.push_back(build_approx_step(model, eps, scale));
    proxies.push_back(bound_proxy(model, eps, sweep.p) + std::pow(scale.norm(), sweep.p));
  }
  return run_sweep(model, eta, grid, sweep, treatments, proxies);
}

bool decreasing_within_noise(const SweepReport& report) {
  int inversions = 0;
  for (std::size_t i = 1; i < report.points.size(); ++i) {
    const auto& a = report.points[i - 1];
    const auto& b = report.points[i];
    if (b.error_est <= a.error_est) continue;
    ++inversions;
    const double combined = std::hypot(a.standard_error, b.standard_error);
    if (b.error_est - a.error_est > 2.0 * combined) return false;
  }
  return inversions <= 1;
}

bool VarianceReport::pass() const {
  for (const auto& e : entries) {
    if (!e.pass) return false;
  }
  return !entries.empty();
}

VarianceReport variance_preservation_check(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double eps,
                                           double eps_ref, double horizon, std::size_t samples, std::uint64_t seed,
                                           int threads) {
  if (!(eps > eps_ref) || !(eps_ref >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "variance check needs 0 <= eps_ref < eps");
  }
  if (samples < 2) throw Error(ErrorCode::InvalidArgument, "variance check needs at least two samples");
  if (scaling.cols() != static_cast<int>(nu.size())) {
    throw Error(ErrorCode::DimensionMismatch, "scaling columns differ from the number of measures");
  }
  const int rows = scaling.rows();
  const int cols = scaling.cols();
  const MagnitudeBand shell{eps_ref, eps};
  Eigen::MatrixXd drift(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      drift(i, j) = horizon * nu[static_cast<std::size_t>(j)].integrate([&](double z) { return scaling(i, j, z); }, shell);
    }
  }
  std::vector<JumpSampler> samplers;
  for (const auto& measure : nu) samplers.emplace_back(measure, eps_ref);

  std::vector<Eigen::MatrixXd> values(samples);
  parallel_for(samples, threads, [&](std::size_t s) {
    Eigen::MatrixXd v = -drift;
    for (const JumpEvent& e : sample_large_jumps(samplers, horizon, seed, s)) {
      if (std::abs(e.mark) >= eps) continue;
      for (int i = 0; i < rows; ++i) v(i, e.component) += scaling(i, e.component, e.mark);
    }
    values[s] = std::move(v);
  });

  const Eigen::MatrixXd full = sigma_eps(scaling, nu, eps);
  const Eigen::MatrixXd inner = eps_ref > 0.0 ? sigma_eps(scaling, nu, eps_ref) : Eigen::MatrixXd::Zero(rows, cols);
  VarianceReport report{eps, eps_ref, horizon, samples, {}};
  std::vector<double> column(samples);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      for (std::size_t s = 0; s < samples; ++s) column[s] = values[s](i, j);
      const auto m = stats::summarize(column);
      VarianceEntry e;
      e.row = i;
      e.col = j;
      e.predicted = horizon * full(i, j) * full(i, j);
      e.omitted = horizon * inner(i, j) * inner(i, j);
      e.sample_variance = m.sample_variance;
      std::tie(e.ci_low, e.ci_high) = stats::variance_interval(m.sample_variance, samples, 0.99);
      e.pass = e.ci_low <= e.predicted && e.ci_high >= e.predicted - e.omitted;
      report.entries.push_back(e);
    }
  }
  return report;
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "eps,bound_proxy,error_est,stderr,n_paths\n";
  for (const auto& pt : report.points) {
    out << format_number(pt.eps) << ',' << format_number(pt.bound_proxy) << ',' << format_number(pt.error_est) << ','
        << format_number(pt.standard_error) << ',' << pt.n_paths << '\n';
  }
}

void write_sweep_summary(std::ostream& out, const SweepReport& report) {
  out << "eps_ref: " << format_number(report.eps_ref) << '\n';
  out << "p: " << format_number(report.p) << '\n';
  out << "reference_bound_proxy: " << format_number(report.reference_bound) << '\n';
  out << "fitted: " << (report.fitted ? "true" : "false") << '\n';
  out << "slope: " << format_number(report.slope) << '\n';
  out << "intercept: " << format_number(report.intercept) << '\n';
  out << "r_squared: " << format_number(report.r_squared) << '\n';
  out << "max_error_over_bound: " << format_number(report.max_ratio) << '\n';
  out << "excluded_paths: " << report.excluded_paths << '\n';
  out << "degenerate_eps: [";
  bool first = true;
  for (const auto& pt : report.points) {
    if (!pt.degenerate) continue;
    out << (first ? "" : ", ") << format_number(pt.eps);
    first = false;
  }
  out << "]\n";
  out << "decreasing: " << (decreasing_within_noise(report) ? "true" : "false") << '\n';
}

}  // namespace sfdde
