#include "sfdde/feynman_kac.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "sfdde/error.hpp"
#include "sfdde/parallel.hpp"

namespace sfdde {

double TerminalPayoff::value(const Segment& eta, const Eigen::VectorXd& x) const {
  switch (kind) {
    case Kind::Linear:
      return v.dot(x);
    case Kind::Quadratic: {
      const double y = v.dot(x);
      return y * y;
    }
    case Kind::Distributed:
      return v.dot(eval_distributed(eta, alpha));
    case Kind::Call:
      return std::max(v.dot(x) - strike, 0.0);
  }
  return 0.0;
}

TerminalPayoff TerminalPayoff::linear(Eigen::VectorXd v) { return {Kind::Linear, std::move(v), {}, 0.0, 1}; }

TerminalPayoff TerminalPayoff::quadratic(Eigen::VectorXd v) { return {Kind::Quadratic, std::move(v), {}, 0.0, 2}; }

TerminalPayoff TerminalPayoff::distributed(Eigen::VectorXd v, Distributed alpha) {
  return {Kind::Distributed, std::move(v), std::move(alpha), 0.0, 1};
}

TerminalPayoff TerminalPayoff::call(Eigen::VectorXd v, double strike) {
  return {Kind::Call, std::move(v), {}, strike, 1};
}

namespace {

// Phi at the end of a restarted solve, NaN when the path failed numerically.
double terminal_value(const SfddeModel& model, const TerminalPayoff& payoff, const Segment& eta,
                      const TimeGrid& grid, const NoiseRecord& noise, const JumpTreatment& treatment,
                      const SolveOptions& options) {
  try {
    const auto r = euler_solve(model, eta, grid, noise, treatment, options);
    const int last = grid.node_count() - 1;
    return payoff.value(r.path.segment(last), r.path.value(last));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFinite || e.code() == ErrorCode::NonIntegrable) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    throw;
  }
}

FkEstimate reduce(std::vector<double>& values, double t, double horizon, double dt, std::uint64_t seed) {
  std::vector<double> kept;
  kept.reserve(values.size());
  for (double v : values) {
    if (std::isfinite(v)) kept.push_back(v);
  }
  FkEstimate out;
  out.excluded = values.size() - kept.size();
  if (out.excluded * 1000 > values.size()) {
    std::ostringstream msg;
    msg << out.excluded << " of " << values.size() << " paths failed (limit 0.1%)";
    throw Error(ErrorCode::TooManyFailures, msg.str());
  }
  const auto m = stats::summarize(kept);
  out.value = m.mean;
  out.standard_error = m.stderr_of_mean;
  out.paths = kept.size();
  out.t = t;
  out.horizon = horizon;
  out.dt = dt;
  out.seed = seed;
  return out;
}

}  // namespace

FkEstimate fk_estimate(const SfddeModel& model, const TerminalPayoff& payoff, double t, const Segment& eta,
                       double horizon, double eps_ref, const MonteCarloSetup& setup, const AuxiliaryState* aux) {
  if (setup.paths == 0) throw Error(ErrorCode::EmptyEnsemble, "Monte Carlo estimate needs paths");
  const TimeGrid grid(model.delay, horizon, eta.dt(), t);
  const NoiseGenerator generator(model, horizon, eta.dt(), eps_ref);
  const JumpTreatment treatment = reference_treatment(model, eps_ref);
  SolveOptions options;
  options.record_jumps = false;
  options.initial_aux = aux;
  std::vector<double> values(setup.paths);
  parallel_for(setup.paths, setup.threads, [&](std::size_t i) {
    values[i] = terminal_value(model, payoff, eta, grid, generator.generate(setup.seed, i), treatment, options);
  });
  return reduce(values, t, horizon, eta.dt(), setup.seed);
}

SmoothSegment SmoothSegment::from_path(const CadlagPath& path, double t) {
  const double from = t - path.grid().delay();
  for (const auto& j : path.jump_log()) {
    if (j.time > from && j.time <= t) throw Error(ErrorCode::JumpDetected, "segment window contains a jump");
  }
  return SmoothSegment(SegmentBuffer::copy_of(path.segment_at(t)));
}

double ppide_residual(const TestFunctional& F, const SfddeModel& model, double t, const SmoothSegment& smooth,
                      const Eigen::VectorXd& x, const QuadratureOptions& options) {
  if (x.size() != model.d || F.dim() != model.d) throw Error(ErrorCode::DimensionMismatch, "state dimension differs from d");
  SegmentBuffer state = smooth.buffer();
  if (state.values.rows() != model.d) throw Error(ErrorCode::DimensionMismatch, "segment dimension differs from d");
  state.values.col(state.window()) = x;
  const Segment eta = state.view();
  const int w = eta.window();
  const double dt = eta.dt();

  EvalContext ctx;
  ctx.t = t;
  const AuxiliaryState none;
  evaluate_kernels(model, eta, none, 0, ctx);
  Eigen::MatrixXd f, g, h0;
  model.f.evaluate(t, ctx.present, ctx.kernels, f);
  model.g.evaluate(t, ctx.present, ctx.kernels, g);
  model.h0.evaluate(t, ctx.present, ctx.kernels, h0);

  Eigen::MatrixXd forward = Eigen::MatrixXd::Zero(model.d, w + 1);
  for (int k = -w; k < 0; ++k) forward.col(k + w) = (eta.at_step(k + 1) - eta.at_step(k)) / dt;

  const double value = F.value(t, eta, x);
  const Eigen::VectorXd grad = F.grad_x(t, eta, x);
  double residual = F.partial_t(t, eta, x);
  residual += F.frechet_pairing(t, eta, x, forward);
  residual += grad.dot(f.col(0));
  residual += 0.5 * (g * g.transpose() * F.hess_x(t, eta, x)).trace();
  if (model.has_jumps()) {
    for (int j = 0; j < model.n; ++j) {
      const auto jump = [&](double z) -> Eigen::VectorXd {
        if (model.factorized()) return h0 * model.scaling.column(j, z);
        return model.general_jump(ctx, z, j);
      };
      residual += model.nu[static_cast<std::size_t>(j)].integrate(
          [&](double z) {
            const Eigen::VectorXd h = jump(z);
            return F.value(t, eta, x + h) - value - grad.dot(h);
          },
          MagnitudeBand::all(), options);
    }
  }
  return residual;
}

double flow_check(const SfddeModel& model, const Segment& eta, const NoiseRecord& noise,
                  const JumpTreatment& treatment, double t1, double t2) {
  const double dt = eta.dt();
  grid_multiple(t1, dt, "t1");
  grid_multiple(t2, dt, "t2");
  if (!(0.0 <= t1 && t1 <= t2)) throw Error(ErrorCode::GridMisaligned, "flow check needs 0 <= t1 <= t2");
  if (model.mean_field()) throw Error(ErrorCode::ModeViolation, "the flow of a mean-field model lives on the ensemble");
  SolveOptions options;
  const auto full = euler_solve(model, eta, TimeGrid(model.delay, t2, dt), noise, treatment, options);
  const auto head = euler_solve(model, eta, TimeGrid(model.delay, t1, dt), noise, treatment, options);
  const SegmentBuffer restart = SegmentBuffer::copy_of(head.path.segment_at(t1));
  SolveOptions tail_options;
  tail_options.initial_aux = &head.aux;
  const TimeGrid tail_grid(model.delay, t2, dt, t1);
  const auto tail = euler_solve(model, restart.view(), tail_grid, noise, treatment, tail_options);
  double deviation = 0.0;
  for (int i = 0; i < tail_grid.node_count(); ++i) {
    const int node = full.path.grid().node_of(tail_grid.time(i));
    deviation = std::max(deviation, (tail.path.value(i) - full.path.value(node)).cwiseAbs().maxCoeff());
  }
  return deviation;
}

double flow_check(const SfddeModel& model, const Segment& eta, double t1, double t2, double eps_ref,
                  std::uint64_t seed, std::uint64_t path) {
  const NoiseGenerator generator(model, t2, eta.dt(), eps_ref);
  return flow_check(model, eta, generator.generate(seed, path), reference_treatment(model, eps_ref), t1, t2);
}

TowerReport tower_check(const SfddeModel& model, const TerminalPayoff& payoff, const Segment& eta, double t1,
                        double horizon, double eps_ref, const MonteCarloSetup& setup) {
  TowerReport report;
  report.direct = fk_estimate(model, payoff, 0.0, eta, horizon, eps_ref, setup);

  const double dt = eta.dt();
  const NoiseGenerator generator(model, horizon, dt, eps_ref);
  const JumpTreatment treatment = reference_treatment(model, eps_ref);
  const TimeGrid head_grid(model.delay, t1, dt);
  const TimeGrid tail_grid(model.delay, horizon, dt, t1);
  std::vector<double> values(setup.paths);
  parallel_for(setup.paths, setup.threads, [&](std::size_t i) {
    SolveOptions options;
    options.record_jumps = false;
    try {
      const auto head = euler_solve(model, eta, head_grid, generator.generate(setup.seed + 1, i), treatment, options);
      const SegmentBuffer restart = SegmentBuffer::copy_of(head.path.segment_at(t1));
      options.initial_aux = &head.aux;
      values[i] = terminal_value(model, payoff, restart.view(), tail_grid, generator.generate(setup.seed + 2, i),
                                 treatment, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite && e.code() != ErrorCode::NonIntegrable) throw;
      values[i] = std::numeric_limits<double>::quiet_NaN();
    }
  });
  report.two_stage = reduce(values, 0.0, horizon, dt, setup.seed + 1);
  stats::MeanStderr a{report.direct.value, report.direct.standard_error, 0.0, report.direct.paths};
  stats::MeanStderr b{report.two_stage.value, report.two_stage.standard_error, 0.0, report.two_stage.paths};
  std::tie(report.t_statistic, report.p_value) = stats::welch_t_test(a, b);
  return report;
}

void write_fk_record(std::ostream& out, const FkEstimate& estimate, const std::string& model_hash) {
  out << "value: " << format_number(estimate.value) << '\n';
  out << "stderr: " << format_number(estimate.standard_error) << '\n';
  out << "N: " << estimate.paths << '\n';
  out << "excluded: " << estimate.excluded << '\n';
  out << "t: " << format_number(estimate.t) << '\n';
  out << "T: " << format_number(estimate.horizon) << '\n';
  out << "dt: " << format_number(estimate.dt) << '\n';
  out << "seed: " << estimate.seed << '\n';
  out << "model_hash: " << model_hash << '\n';
}

}  // namespace sfdde
