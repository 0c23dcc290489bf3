#include "sfdde/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "sfdde/error.hpp"
#include "sfdde/parallel.hpp"
#include "sfdde/random.hpp"

namespace sfdde {
namespace {

struct StepWork {
  EvalContext ctx;
  Eigen::MatrixXd f, g, h0;
  Eigen::VectorXd incr;
  Eigen::VectorXd kvec;
};

void check_finite(const Eigen::MatrixXd& value, const char* name, long step) {
  if (!value.allFinite()) {
    std::ostringstream msg;
    msg << name << " is not finite at step " << step;
    throw Error(ErrorCode::NonFinite, msg.str());
  }
}

void evaluate_coefficients(const SfddeModel& model, StepWork& w, long step) {
  model.f.evaluate(w.ctx.t, w.ctx.present, w.ctx.kernels, w.f);
  check_finite(w.f, "drift f", step);
  model.g.evaluate(w.ctx.t, w.ctx.present, w.ctx.kernels, w.g);
  check_finite(w.g, "diffusion g", step);
  model.h0.evaluate(w.ctx.t, w.ctx.present, w.ctx.kernels, w.h0);
  check_finite(w.h0, "jump factor h0", step);
}

// One Euler step from the left node: continuous part, then each jump of the
// cell in time order with the coefficients frozen at the left node.
void advance(const SfddeModel& model, const JumpTreatment& treatment, const NoiseRecord& noise, long s, StepWork& w,
             Eigen::VectorXd& x, std::vector<JumpRecord>* log) {
  const double dt = noise.dt;
  const bool jumps = model.has_jumps();
  w.incr = w.f.col(0) * dt;
  w.incr.noalias() += w.g * noise.dW.col(s);
  if (jumps && model.factorized()) {
    w.kvec = treatment.compensator.rowwise().sum() * (-dt);
    if (treatment.gaussian.size() > 0 && noise.dB.cols() > s && !treatment.gaussian.isZero(0.0)) {
      w.kvec.noalias() += treatment.gaussian * noise.dB.col(s);
    }
    w.incr.noalias() += w.h0 * w.kvec;
  } else if (jumps) {
    for (int j = 0; j < model.n; ++j) {
      for (int i = 0; i < model.d; ++i) {
        w.incr[i] -= dt * model.nu[static_cast<std::size_t>(j)].integrate(
                              [&](double z) { return model.general_jump(w.ctx, z, j)[i]; },
                              MagnitudeBand::at_or_above(treatment.eps_cut));
      }
    }
  }
  x += w.incr;
  if (jumps) {
    for (const JumpEvent& e : noise.cell(s)) {
      if (std::abs(e.mark) < treatment.eps_cut) continue;
      Eigen::VectorXd delta = model.factorized() ? Eigen::VectorXd(w.h0 * model.scaling.column(e.component, e.mark))
                                                 : model.general_jump(w.ctx, e.mark, e.component);
      if (log) {
        JumpRecord rec{s, e.time, e.component, e.mark, x, {}};
        x += delta;
        rec.post = x;
        log->push_back(std::move(rec));
      } else {
        x += delta;
      }
    }
  }
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "state is not finite after step " << s;
    throw Error(ErrorCode::NonFinite, msg.str());
  }
}

void update_aux(const SfddeModel& model, const NoiseRecord& noise, long s, const Eigen::VectorXd& left,
                AuxiliaryState& aux) {
  if (!aux.maintained()) return;
  for (std::size_t i = 0; i < model.kernels.size(); ++i) {
    const auto& kernel = model.kernels[i];
    double dy = 0.0;
    bool unit = false;
    if (const auto* b = std::get_if<BrownianDelay>(&kernel)) {
      dy = noise.dW(b->noise_component, s);
      unit = b->unit_integrand;
    } else if (const auto* l = std::get_if<LevyDelay>(&kernel)) {
      for (const JumpEvent& e : noise.cell(s)) {
        if (e.component == l->noise_component) dy += e.mark;
      }
      dy -= noise.dt * noise.mark_mean[l->noise_component];
      unit = l->unit_integrand;
    } else {
      continue;
    }
    const Eigen::VectorXd& previous = aux.value(static_cast<int>(i), s);
    if (unit) {
      aux.push(static_cast<int>(i), (previous.array() + dy).matrix());
    } else {
      aux.push(static_cast<int>(i), previous + dy * left);
    }
  }
  aux.commit();
}

AuxiliaryState initial_aux(const SfddeModel& model, const TimeGrid& grid, const AuxiliaryState* given) {
  if (!model.has_noisy_kernels()) return {};
  if (grid.start_step() == 0) return AuxiliaryState(static_cast<int>(model.kernels.size()), model.d);
  if (!given || given->size() < grid.start_step() + 1) {
    throw Error(ErrorCode::StateNotMaintained, "restart of a noisy-delay model needs the auxiliary integrals");
  }
  return given->truncated(grid.start_step());
}

void check_inputs(const SfddeModel& model, const Segment& eta, const TimeGrid& grid, const NoiseRecord& noise) {
  if (eta.dim() != model.d) throw Error(ErrorCode::DimensionMismatch, "initial segment dimension differs from d");
  if (eta.window() != grid.window()) throw Error(ErrorCode::GridMisaligned, "initial segment does not span [-r, 0]");
  if (std::abs(eta.dt() - grid.dt()) > 1e-15 * grid.dt() || std::abs(noise.dt - grid.dt()) > 1e-15 * grid.dt()) {
    throw Error(ErrorCode::GridMisaligned, "segment, noise and grid steps differ");
  }
  if (noise.steps() < grid.start_step() + grid.steps()) {
    throw Error(ErrorCode::InvalidArgument, "noise record is shorter than the grid");
  }
  if (noise.dW.rows() != model.m) throw Error(ErrorCode::DimensionMismatch, "noise W dimension differs from m");
}

void load_segment(CadlagPath& path, const Segment& eta) {
  for (int k = 0; k <= eta.window(); ++k) path.value(k) = eta.at_step(k - eta.window());
}

}  // namespace

std::span<const JumpEvent> NoiseRecord::cell(long step) const {
  if (cell_begin.empty()) return {};
  const auto b = cell_begin[static_cast<std::size_t>(step)];
  const auto e = cell_begin[static_cast<std::size_t>(step + 1)];
  return std::span<const JumpEvent>(jumps.data() + b, e - b);
}

NoiseGenerator::NoiseGenerator(const SfddeModel& model, double horizon, double dt, double eps_ref, bool substitute)
    : m_(model.m), n_(model.n), dt_(dt), horizon_(horizon), eps_ref_(eps_ref), substitute_(substitute) {
  steps_ = grid_multiple(horizon, dt, "T");
  mark_mean_ = Eigen::VectorXd::Zero(n_);
  if (model.n > 0 && !(eps_ref > 0.0)) {
    // Finite measures may be simulated without truncation.
    for (const auto& nu : model.nu) {
      if (std::holds_alternative<TemperedStable>(nu.spec())) {
        throw Error(ErrorCode::InfiniteRate, "reference truncation must be positive for infinite-activity measures");
      }
    }
  }
  for (int j = 0; j < n_; ++j) {
    const auto& nu = model.nu[static_cast<std::size_t>(j)];
    samplers_.emplace_back(nu, eps_ref);
    mark_mean_[j] = nu.integrate([](double z) { return z; }, MagnitudeBand::at_or_above(eps_ref));
  }
}

NoiseRecord NoiseGenerator::generate(std::uint64_t seed, std::uint64_t path) const {
  NoiseRecord rec;
  rec.dt = dt_;
  rec.eps_ref = eps_ref_;
  rec.seed = seed;
  rec.path = path;
  rec.mark_mean = mark_mean_;
  const double sd = std::sqrt(dt_);
  rec.dW.resize(m_, steps_);
  RandomStream w(seed, path, StreamPurpose::Brownian);
  for (long s = 0; s < steps_; ++s) {
    for (int i = 0; i < m_; ++i) rec.dW(i, s) = sd * w.normal();
  }
  if (substitute_ && n_ > 0) {
    rec.dB.resize(n_, steps_);
    RandomStream b(seed, path, StreamPurpose::Substitute);
    for (long s = 0; s < steps_; ++s) {
      for (int j = 0; j < n_; ++j) rec.dB(j, s) = sd * b.normal();
    }
  }
  rec.jumps = sample_large_jumps(samplers_, horizon_, seed, path);
  rec.cell_begin.assign(static_cast<std::size_t>(steps_ + 1), 0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(steps_), 0);
  for (const auto& e : rec.jumps) {
    long cell = static_cast<long>(std::ceil(e.time / dt_)) - 1;
    cell = std::clamp(cell, 0L, steps_ - 1);
    ++counts[static_cast<std::size_t>(cell)];
  }
  for (long s = 0; s < steps_; ++s) {
    rec.cell_begin[static_cast<std::size_t>(s + 1)] = rec.cell_begin[static_cast<std::size_t>(s)] + counts[static_cast<std::size_t>(s)];
  }
  return rec;
}

double choose_reference_truncation(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double ratio) {
  if (scaling.empty() || nu.empty()) return 1.0;
  Eigen::MatrixXd full(scaling.rows(), scaling.cols());
  for (int i = 0; i < scaling.rows(); ++i) {
    for (int j = 0; j < scaling.cols(); ++j) {
      full(i, j) = nu[static_cast<std::size_t>(j)].integrate([&](double z) { return std::pow(scaling(i, j, z), 2); });
    }
  }
  double eps = 1.0;
  for (int iter = 0; iter < 60; ++iter) {
    const Eigen::MatrixXd s = sigma_eps(scaling, nu, eps);
    if ((s.array().square() <= ratio * full.array()).all()) return eps;
    eps *= 0.5;
  }
  return eps;
}

JumpTreatment reference_treatment(const SfddeModel& model, double eps_ref) {
  JumpTreatment t;
  t.eps_cut = eps_ref;
  t.compensator = Eigen::MatrixXd::Zero(model.k, model.n);
  t.gaussian = Eigen::MatrixXd::Zero(model.k, model.n);
  if (!model.scaling.empty() && model.n > 0 && model.factorized()) {
    if (eps_ref > 0.0) {
      t.compensator = compensator_integral(model.scaling, model.nu, eps_ref);
    } else {
      for (int i = 0; i < model.k; ++i) {
        for (int j = 0; j < model.n; ++j) {
          t.compensator(i, j) = model.nu[static_cast<std::size_t>(j)].integrate(
              [&](double z) { return model.scaling(i, j, z); });
        }
      }
    }
  }
  return t;
}

SolveReport euler_solve(const SfddeModel& model, const Segment& eta, const TimeGrid& grid, const NoiseRecord& noise,
                        const JumpTreatment& treatment, const SolveOptions& options) {
  if (model.mean_field()) throw Error(ErrorCode::ModeViolation, "mean-field models are solved as an ensemble");
  check_inputs(model, eta, grid, noise);
  const auto started = std::chrono::steady_clock::now();
  SolveReport report{CadlagPath(grid, model.d), {}, {}, {}, initial_aux(model, grid, options.initial_aux), 0.0};
  CadlagPath& path = report.path;
  path.set_has_jump_log(options.record_jumps);
  load_segment(path, eta);
  if (options.cache_coefficients) {
    report.f_cache.reserve(static_cast<std::size_t>(grid.steps()));
    report.g_cache.reserve(static_cast<std::size_t>(grid.steps()));
    report.h0_cache.reserve(static_cast<std::size_t>(grid.steps()));
  }
  StepWork w;
  Eigen::VectorXd x;
  auto* log = options.record_jumps ? &path.jump_log() : nullptr;
  for (int i = 0; i < grid.steps(); ++i) {
    const long s = grid.start_step() + i;
    const int node = grid.start_node() + i;
    w.ctx.t = grid.time(node);
    evaluate_kernels(model, path.segment(node), report.aux, s, w.ctx);
    evaluate_coefficients(model, w, s);
    if (options.cache_coefficients) {
      report.f_cache.push_back(w.f);
      report.g_cache.push_back(w.g);
      report.h0_cache.push_back(w.h0);
    }
    x = path.value(node);
    advance(model, treatment, noise, s, w, x, log);
    path.value(node + 1) = x;
    update_aux(model, noise, s, path.value(node), report.aux);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::vector<SolveReport> euler_solve_ensemble(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                              std::span<const NoiseRecord> noises, const JumpTreatment& treatment,
                                              int threads, const SolveOptions& options) {
  if (noises.empty()) throw Error(ErrorCode::EmptyEnsemble, "ensemble solve needs at least one noise record");
  for (const auto& noise : noises) check_inputs(model, eta, grid, noise);
  const auto started = std::chrono::steady_clock::now();
  std::vector<SolveReport> reports;
  reports.reserve(noises.size());
  for (std::size_t p = 0; p < noises.size(); ++p) {
    reports.push_back({CadlagPath(grid, model.d), {}, {}, {}, initial_aux(model, grid, options.initial_aux), 0.0});
    reports.back().path.set_has_jump_log(options.record_jumps);
    load_segment(reports.back().path, eta);
  }
  std::vector<StepWork> work(noises.size());
  std::vector<Eigen::VectorXd> mean_field(model.kernels.size());
  std::vector<Segment> segments;
  for (int i = 0; i < grid.steps(); ++i) {
    const long s = grid.start_step() + i;
    const int node = grid.start_node() + i;
    segments.clear();
    for (const auto& r : reports) segments.push_back(r.path.segment(node));
    for (std::size_t q = 0; q < model.kernels.size(); ++q) {
      if (const auto* mf = std::get_if<MeanField>(&model.kernels[q])) {
        mean_field[q] = eval_meanfield(segments, mf->inner, model.mode);
      }
    }
    parallel_for(noises.size(), threads, [&](std::size_t p) {
      SolveReport& r = reports[p];
      StepWork& w = work[p];
      w.ctx.t = grid.time(node);
      evaluate_kernels(model, segments[p], r.aux, s, w.ctx, &mean_field);
      evaluate_coefficients(model, w, s);
      if (options.cache_coefficients) {
        r.f_cache.push_back(w.f);
        r.g_cache.push_back(w.g);
        r.h0_cache.push_back(w.h0);
      }
      Eigen::VectorXd x = r.path.value(node);
      advance(model, treatment, noises[p], s, w, x, options.record_jumps ? &r.path.jump_log() : nullptr);
      r.path.value(node + 1) = x;
      update_aux(model, noises[p], s, r.path.value(node), r.aux);
    });
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  for (auto& r : reports) r.wall_seconds = seconds;
  return reports;
}

std::vector<CadlagPath> picard_solve(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                     const NoiseRecord& noise, const JumpTreatment& treatment, int kmax) {
  if (kmax < 1) throw Error(ErrorCode::InsufficientIterates, "picard_solve needs kmax >= 1");
  if (model.mean_field()) throw Error(ErrorCode::ModeViolation, "Picard iteration of a mean-field model is not supported");
  check_inputs(model, eta, grid, noise);
  std::vector<CadlagPath> iterates;
  iterates.reserve(static_cast<std::size_t>(kmax));
  iterates.emplace_back(grid, model.d);
  load_segment(iterates.front(), eta);
  for (int node = grid.start_node() + 1; node < grid.node_count(); ++node) {
    iterates.front().value(node) = eta.present();
  }
  StepWork w;
  Eigen::VectorXd x;
  for (int k = 1; k < kmax; ++k) {
    const CadlagPath& previous = iterates.back();
    CadlagPath next(grid, model.d);
    load_segment(next, eta);
    AuxiliaryState aux = initial_aux(model, grid, nullptr);
    x = eta.present();
    for (int i = 0; i < grid.steps(); ++i) {
      const long s = grid.start_step() + i;
      const int node = grid.start_node() + i;
      w.ctx.t = grid.time(node);
      evaluate_kernels(model, previous.segment(node), aux, s, w.ctx);
      evaluate_coefficients(model, w, s);
      advance(model, treatment, noise, s, w, x, nullptr);
      next.value(node + 1) = x;
      update_aux(model, noise, s, previous.value(node), aux);
    }
    iterates.push_back(std::move(next));
  }
  return iterates;
}

std::vector<double> picard_path_gaps(std::span<const CadlagPath> iterates, double p) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < iterates.size(); ++k) {
    const Eigen::MatrixXd diff = iterates[k + 1].values() - iterates[k].values();
    out.push_back(std::pow(diff.colwise().norm().maxCoeff(), p));
  }
  return out;
}

void fit_picard_decay(PicardGapReport& report) {
  std::vector<int> ks;
  for (int k = report.fit_first; k <= report.fit_last; ++k) {
    if (k >= 1 && k <= static_cast<int>(report.gap.size()) && report.gap[static_cast<std::size_t>(k - 1)] > 0.0) {
      ks.push_back(k);
    }
  }
  report.fitted = ks.size() >= 4;
  if (!report.fitted) return;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(ks.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(ks.size()));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const int k = ks[i];
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    design(static_cast<Eigen::Index>(i), 1) = k - 1.0;
    design(static_cast<Eigen::Index>(i), 2) = std::lgamma(static_cast<double>(k));
    y[static_cast<Eigen::Index>(i)] = std::log(report.gap[static_cast<std::size_t>(k - 1)]);
  }
  const Eigen::VectorXd beta = stats::least_squares(design, y);
  report.intercept = beta[0];
  report.log_ct = beta[1];
  report.factorial_slope = beta[2];
}

PicardGapReport picard_gap(std::span<const std::vector<CadlagPath>> iterates, double p, int fit_first, int fit_last) {
  if (iterates.empty()) throw Error(ErrorCode::EmptyEnsemble, "picard_gap needs at least one path");
  const std::size_t kmax = iterates.front().size();
  if (kmax < 3) throw Error(ErrorCode::InsufficientIterates, "picard_gap needs at least three iterates");
  std::vector<std::vector<double>> per_k(kmax - 1);
  for (const auto& path_iterates : iterates) {
    if (path_iterates.size() != kmax) throw Error(ErrorCode::InvalidArgument, "paths carry different iterate counts");
    const auto gaps = picard_path_gaps(path_iterates, p);
    for (std::size_t k = 0; k < gaps.size(); ++k) per_k[k].push_back(gaps[k]);
  }
  PicardGapReport report;
  report.paths = iterates.size();
  report.fit_first = fit_first;
  report.fit_last = fit_last;
  for (const auto& samples : per_k) {
    const auto m = stats::summarize(samples);
    report.gap.push_back(m.mean);
    report.standard_error.push_back(m.stderr_of_mean);
  }
  fit_picard_decay(report);
  return report;
}

PicardGapReport picard_experiment(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                  const NoiseGenerator& noise, const JumpTreatment& treatment, int kmax,
                                  const MonteCarloSetup& setup, int fit_first, int fit_last) {
  if (kmax < 3) throw Error(ErrorCode::InsufficientIterates, "picard experiment needs kmax >= 3");
  if (setup.paths == 0) throw Error(ErrorCode::EmptyEnsemble, "picard experiment needs at least one path");
  std::vector<std::vector<double>> gaps(setup.paths);
  parallel_for(setup.paths, setup.threads, [&](std::size_t i) {
    const NoiseRecord rec = noise.generate(setup.seed, i);
    const auto iterates = picard_solve(model, eta, grid, rec, treatment, kmax);
    gaps[i] = picard_path_gaps(iterates, model.p);
  });
  PicardGapReport report;
  report.paths = setup.paths;
  report.fit_first = fit_first;
  report.fit_last = fit_last;
  for (int k = 0; k + 1 < kmax; ++k) {
    std::vector<double> samples(setup.paths);
    for (std::size_t i = 0; i < setup.paths; ++i) samples[i] = gaps[i][static_cast<std::size_t>(k)];
    const auto m = stats::summarize(samples);
    report.gap.push_back(m.mean);
    report.standard_error.push_back(m.stderr_of_mean);
  }
  fit_picard_decay(report);
  return report;
}

std::vector<MomentPoint> moment_estimate(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                         const NoiseGenerator& noise, const JumpTreatment& treatment, double p,
                                         std::span<const double> times, const MonteCarloSetup& setup) {
  if (setup.paths == 0) throw Error(ErrorCode::EmptyEnsemble, "moment estimate needs at least one path");
  std::vector<int> nodes;
  for (double t : times) {
    if (t < grid.start()) throw Error(ErrorCode::OffsetOutOfRange, "moment time before the grid start");
    nodes.push_back(grid.node_of(t));
  }
  std::vector<std::vector<double>> values(setup.paths);
  parallel_for(setup.paths, setup.threads, [&](std::size_t i) {
    const NoiseRecord rec = noise.generate(setup.seed, i);
    const SolveReport r = euler_solve(model, eta, grid, rec, treatment, {.record_jumps = false});
    auto& out = values[i];
    for (int node : nodes) out.push_back(std::pow(sup_norm(r.path, 0, node), p));
  });
  std::vector<MomentPoint> points;
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    std::vector<double> samples(setup.paths);
    for (std::size_t i = 0; i < setup.paths; ++i) samples[i] = values[i][q];
    points.push_back({times[q], stats::summarize(samples)});
  }
  return points;
}

double fit_growth_constant(std::span<const MomentPoint> points, double eta_norm_p) {
  auto holds = [&](double d) {
    for (const auto& pt : points) {
      const double bound = std::exp(d * pt.t) * (d * pt.t + eta_norm_p);
      if (bound < pt.estimate.mean) return false;
    }
    return true;
  };
  if (holds(0.0)) return 0.0;
  double hi = 1.0;
  while (!holds(hi)) {
    hi *= 2.0;
    if (hi > 1e6) return std::numeric_limits<double>::infinity();
  }
  double lo = 0.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-12 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::vector<double> kunita_ratio(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                 const NoiseGenerator& noise, const JumpTreatment& treatment, double q,
                                 std::span<const double> times, const MonteCarloSetup& setup) {
  if (model.k != 1 || !model.factorized()) {
    throw Error(ErrorCode::InvalidArgument, "kunita_ratio supports factorized models with k = 1");
  }
  double lambda_q = 0.0, lambda_2 = 0.0;
  if (!model.scaling.empty() && model.n > 0) {
    lambda_q = std::pow(lp_nu_norm(model.scaling, model.nu, q), q);
    lambda_2 = std::pow(lp_nu_norm(model.scaling, model.nu, 2.0), q);
  }
  std::vector<int> nodes;
  for (double t : times) nodes.push_back(grid.node_of(t));
  std::vector<std::vector<double>> sup(setup.paths), integral(setup.paths);
  parallel_for(setup.paths, setup.threads, [&](std::size_t i) {
    const NoiseRecord rec = noise.generate(setup.seed, i);
    const SolveReport r =
        euler_solve(model, eta, grid, rec, treatment, {.record_jumps = false, .cache_coefficients = true});
    std::vector<double> running(static_cast<std::size_t>(grid.steps()) + 1, 0.0);
    for (int s = 0; s < grid.steps(); ++s) {
      const double h = r.h0_cache[static_cast<std::size_t>(s)].norm();
      const double density = std::pow(r.f_cache[static_cast<std::size_t>(s)].norm(), q) +
                             std::pow(r.g_cache[static_cast<std::size_t>(s)].norm(), q) +
                             std::pow(h, q) * (lambda_q + lambda_2);
      running[static_cast<std::size_t>(s) + 1] = running[static_cast<std::size_t>(s)] + density * grid.dt();
    }
    for (int node : nodes) {
      sup[i].push_back(std::pow(sup_norm(r.path, grid.start_node(), node), q));
      integral[i].push_back(running[static_cast<std::size_t>(node - grid.start_node())]);
    }
  });
  const double y0 = std::pow(eta.present().norm(), q);
  std::vector<double> ratios;
  for (std::size_t t = 0; t < nodes.size(); ++t) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < setup.paths; ++i) {
      num += sup[i][t];
      den += integral[i][t];
    }
    const double n = static_cast<double>(setup.paths);
    ratios.push_back((num / n) / (y0 + den / n));
  }
  return ratios;
}

void write_moment_csv(std::ostream& out, std::span<const MomentPoint> points) {
  out << "k_or_t,estimate,stderr\n";
  for (const auto& pt : points) {
    out << format_number(pt.t) << ',' << format_number(pt.estimate.mean) << ','
        << format_number(pt.estimate.stderr_of_mean) << '\n';
  }
}

void write_gap_csv(std::ostream& out, const PicardGapReport& report) {
  out << "k_or_t,estimate,stderr\n";
  for (std::size_t k = 0; k < report.gap.size(); ++k) {
    out << (k + 1) << ',' << format_number(report.gap[k]) << ',' << format_number(report.standard_error[k]) << '\n';
  }
}

}  // namespace sfdde
