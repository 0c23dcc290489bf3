#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace sfdde {

class RandomStream;

/// Relative tolerance and panel limits for integrals against a Levy measure.
struct QuadratureOptions {
  double relative_tolerance = 1e-9;
  int max_panels = 240;
  unsigned max_depth = 12;
};

/// The set {lower <= |z| < upper}.
struct MagnitudeBand {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();

  static MagnitudeBand all() { return {}; }
  static MagnitudeBand below(double eps) { return {0.0, eps}; }
  static MagnitudeBand at_or_above(double eps) { return {eps, std::numeric_limits<double>::infinity()}; }
  bool contains(double z) const;
};

struct AtomList {
  std::vector<std::pair<double, double>> atoms;  // (position, mass)
};

struct DensityMeasure {
  std::function<double(double)> density;  // on R \ {0}
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Symmetric tempered stable density c e^{-beta|z|} / |z|^{1+alpha}.
struct TemperedStable {
  double alpha = 0.5;
  double c = 1.0;
  double beta = 1.0;
};

/// One-dimensional Levy measure. Immutable after construction; construction
/// checks that atoms avoid the origin and that the integral of min(1, z^2)
/// is finite.
class LevyMeasure {
 public:
  using Spec = std::variant<AtomList, DensityMeasure, TemperedStable>;

  explicit LevyMeasure(Spec spec);

  static LevyMeasure atoms(std::vector<std::pair<double, double>> atoms);
  static LevyMeasure tempered_stable(double alpha, double c, double beta);
  static LevyMeasure density(std::function<double(double)> rho, double lower, double upper);

  const Spec& spec() const { return spec_; }

  /// Integral of g over the band, g(z) nu(dz).
  double integrate(const std::function<double(double)>& g, MagnitudeBand band = MagnitudeBand::all(),
                   const QuadratureOptions& options = {}) const;

  /// nu(band); throws InfiniteRate when the band touches an infinite-activity origin.
  double mass(MagnitudeBand band, const QuadratureOptions& options = {}) const;

  /// Density value (zero for atom lists).
  double density_at(double z) const;

  /// Largest |z| that carries non-negligible mass (tail cut for sampling tables).
  double magnitude_cutoff(int side) const;

 private:
  double integrate_side(const std::function<double(double)>& g, int side, MagnitudeBand band,
                        const QuadratureOptions& options) const;

  Spec spec_;
};

/// Jump scaling lambda: R\{0} -> R^{k x n}, one callable per entry.
class JumpScaling {
 public:
  using Entry = std::function<double(double)>;

  JumpScaling() = default;
  /// entries in row-major order, rows * cols of them.
  JumpScaling(int rows, int cols, std::vector<Entry> entries);

  /// k x n scaling with every entry equal to `entry`.
  static JumpScaling uniform(int rows, int cols, Entry entry);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return entries_.empty(); }

  double operator()(int i, int j, double z) const { return entries_[static_cast<std::size_t>(i * cols_ + j)](z); }
  Eigen::VectorXd column(int j, double z) const;
  Eigen::MatrixXd operator()(double z) const;

  /// Fails with NonIntegrable unless every column lies in L^2(nu_j) and L^p(nu_j).
  void validate(std::span<const LevyMeasure> nu, double p) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Entry> entries_;
};

using MatrixFunction = std::function<Eigen::MatrixXd(double)>;

/// (sum_j int |H^{.,j}(z)|^p nu_j(dz))^{1/p}, restricted to the band.
double lp_nu_norm(const MatrixFunction& h, int rows, int cols, std::span<const LevyMeasure> nu, double p,
                  MagnitudeBand band = MagnitudeBand::all(), const QuadratureOptions& options = {});

double lp_nu_norm(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double p,
                  MagnitudeBand band = MagnitudeBand::all(), const QuadratureOptions& options = {});

/// Gaussian substitution scale: entry (i,j) is the L^2(nu_j) norm of
/// lambda^{i,j} restricted to |z| < eps.
Eigen::MatrixXd sigma_eps(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double eps,
                          const QuadratureOptions& options = {});

/// Entry (i,j) is the integral of lambda^{i,j} over |z| >= eps against nu_j.
Eigen::MatrixXd compensator_integral(const JumpScaling& scaling, std::span<const LevyMeasure> nu, double eps,
                                     const QuadratureOptions& options = {});

struct JumpEvent {
  double time = 0.0;
  int component = 0;
  double mark = 0.0;
};

/// Samples events with |z| >= eps for one measure: Poisson arrival times of
/// rate nu({|z| >= eps}) and marks from the normalized restriction. Marks use
/// an inverse-CDF table (2048 nodes per side, monotone cubic interpolation)
/// for densities and exact categorical draws for atoms.
class JumpSampler {
 public:
  static constexpr int kTableNodes = 2048;

  JumpSampler(const LevyMeasure& measure, double eps, const QuadratureOptions& options = {});

  double rate() const { return rate_; }
  double eps() const { return eps_; }
  double sample_mark(RandomStream& stream) const;

  /// CDF of the normalized restricted mark distribution (table based).
  double mark_cdf(double z) const;

  /// Appends events on (0, horizon] for this component.
  void sample(double horizon, int component, RandomStream& stream, std::vector<JumpEvent>& out) const;

 private:
  struct SideTable {
    double mass = 0.0;
    std::vector<double> cumulative;  // strictly increasing, starts at 0
    std::vector<double> magnitude;   // |z| at each node
    std::vector<double> slope;       // d|z| / dF at each node (monotone Hermite)
    double invert(double u) const;
    double cdf(double magnitude) const;
  };

  double eps_ = 0.0;
  double rate_ = 0.0;
  bool atoms_ = false;
  std::vector<double> atom_cumulative_;
  std::vector<double> atom_position_;
  SideTable positive_;
  SideTable negative_;
};

/// All large jumps (|z| >= eps) of the n components on (0, horizon], sorted by
/// time. Each component draws from its own substream of (seed, path).
std::vector<JumpEvent> sample_large_jumps(std::span<const LevyMeasure> nu, double eps, double horizon,
                                          std::uint64_t seed, std::uint64_t path);

std::vector<JumpEvent> sample_large_jumps(std::span<const JumpSampler> samplers, double horizon,
                                          std::uint64_t seed, std::uint64_t path);

}  // namespace sfdde
