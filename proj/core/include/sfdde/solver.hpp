#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sfdde/functionals.hpp"
#include "sfdde/levy_noise.hpp"
#include "sfdde/paths.hpp"
#include "sfdde/stats.hpp"

namespace sfdde {

/// Per-path noise on [0, T]: Brownian increments W, the substitute Brownian
/// increments B, and all jumps with |z| >= eps_ref. Indexed by absolute step.
struct NoiseRecord {
  double dt = 0.0;
  double eps_ref = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  Eigen::MatrixXd dW;  // m x steps
  Eigen::MatrixXd dB;  // n x steps (empty when not requested)
  std::vector<JumpEvent> jumps;
  std::vector<std::size_t> cell_begin;  // steps + 1 offsets into jumps
  Eigen::VectorXd mark_mean;            // int_{|z| >= eps_ref} z nu_j(dz)

  long steps() const { return static_cast<long>(dW.cols()); }
  std::span<const JumpEvent> cell(long step) const;
};

/// Builds NoiseRecords for one model and grid. Samplers are prepared once and
/// shared; generate() is safe to call concurrently.
class NoiseGenerator {
 public:
  NoiseGenerator(const SfddeModel& model, double horizon, double dt, double eps_ref, bool substitute = true);

  NoiseRecord generate(std::uint64_t seed, std::uint64_t path) const;
  double eps_ref() const { return eps_ref_; }

 private:
  int m_;
  int n_;
  double dt_;
  long steps_;
  double horizon_;
  double eps_ref_;
  bool substitute_;
  std::vector<JumpSampler> samplers_;
  Eigen::VectorXd mark_mean_;
};

/// Smallest power-of-two fraction eps with Lambda(eps)^2 < ratio * Lambda(inf)^2 entrywise.
double choose_reference_truncation(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double ratio = 1e-4);

/// Which recorded jumps enter and how the remainder is compensated: jumps with
/// |z| >= eps_cut are applied, the drift subtracts h0 * compensator * 1 dt and
/// h0 * gaussian * dB is added.
struct JumpTreatment {
  double eps_cut = 0.0;
  Eigen::MatrixXd compensator;  // k x n
  Eigen::MatrixXd gaussian;     // k x n
};

/// All recorded jumps, compensated at eps_ref, no Gaussian part.
JumpTreatment reference_treatment(const SfddeModel& model, double eps_ref);

struct SolveOptions {
  bool record_jumps = true;
  bool cache_coefficients = false;
  /// Noisy-kernel integrals up to the restart step (needed when grid.start() > 0).
  const AuxiliaryState* initial_aux = nullptr;
};

struct SolveReport {
  CadlagPath path;
  std::vector<Eigen::MatrixXd> f_cache;   // per local step, when cached
  std::vector<Eigen::MatrixXd> g_cache;
  std::vector<Eigen::MatrixXd> h0_cache;
  AuxiliaryState aux;
  double wall_seconds = 0.0;
};

/// Euler-Maruyama with coefficients frozen at the left node and exact
/// sequential application of the jumps in each cell. Starts from `eta` at
/// grid.start(); the noise is read at absolute steps.
SolveReport euler_solve(const SfddeModel& model, const Segment& eta, const TimeGrid& grid, const NoiseRecord& noise,
                        const JumpTreatment& treatment, const SolveOptions& options = {});

/// Lockstep solve of an ensemble; required for mean-field kernels.
std::vector<SolveReport> euler_solve_ensemble(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                              std::span<const NoiseRecord> noises, const JumpTreatment& treatment,
                                              int threads, const SolveOptions& options = {});

/// Picard iterates X^1 .. X^kmax on the grid with the same noise.
std::vector<CadlagPath> picard_solve(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                     const NoiseRecord& noise, const JumpTreatment& treatment, int kmax);

struct PicardGapReport {
  std::vector<double> gap;     // e_k for k = 1 .. kmax - 1
  std::vector<double> standard_error;
  std::size_t paths = 0;
  // log e_k = intercept + (k - 1) log(C T) + slope log((k - 1)!) over [fit_first, fit_last]
  int fit_first = 2;
  int fit_last = 8;
  double intercept = 0.0;
  double log_ct = 0.0;
  double factorial_slope = 0.0;
  bool fitted = false;
};

/// e_k = mean over paths of sup_{[-r,T]} |X^{k+1} - X^k|^p.
PicardGapReport picard_gap(std::span<const std::vector<CadlagPath>> iterates, double p, int fit_first = 2,
                           int fit_last = 8);

/// Per-path sup |X^{k+1} - X^k|^p for k = 1 .. kmax - 1.
std::vector<double> picard_path_gaps(std::span<const CadlagPath> iterates, double p);
/// Fills the factorial-decay fit of a report whose gap/stderr are set.
void fit_picard_decay(PicardGapReport& report);

struct MonteCarloSetup {
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Runs picard_solve on `setup.paths` noise draws and reduces the gaps.
PicardGapReport picard_experiment(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                  const NoiseGenerator& noise, const JumpTreatment& treatment, int kmax,
                                  const MonteCarloSetup& setup, int fit_first = 2, int fit_last = 8);

struct MomentPoint {
  double t = 0.0;
  stats::MeanStderr estimate;
};

/// E[sup_{[-r,t]} |X|^p] at each requested t (grid-aligned, within [0, T]).
std::vector<MomentPoint> moment_estimate(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                         const NoiseGenerator& noise, const JumpTreatment& treatment, double p,
                                         std::span<const double> times, const MonteCarloSetup& setup);

/// Smallest D >= 0 with e^{Dt}(Dt + eta_norm_p) >= estimate at every point.
double fit_growth_constant(std::span<const MomentPoint> points, double eta_norm_p);

/// E[sup_{[0,t]}|Y|^q] / (|Y(0)|^q + E int_0^t (|F|^q + |G|^q + ||H||^q_{L^q} + ||H||^q_{L^2}) ds)
/// for models with k = 1 and a factorized jump part.
std::vector<double> kunita_ratio(const SfddeModel& model, const Segment& eta, const TimeGrid& grid,
                                 const NoiseGenerator& noise, const JumpTreatment& treatment, double q,
                                 std::span<const double> times, const MonteCarloSetup& setup);

/// CSV with columns k_or_t,estimate,stderr.
void write_moment_csv(std::ostream& out, std::span<const MomentPoint> points);
void write_gap_csv(std::ostream& out, const PicardGapReport& report);

}  // namespace sfdde
