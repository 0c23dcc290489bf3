#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sfdde/levy_noise.hpp"
#include "sfdde/paths.hpp"

namespace sfdde {

/// How coefficients may look at the past. In the D mode point evaluations of
/// the segment are allowed; in the M^p mode only integral functionals of the
/// L^p part and the present value are.
enum class EvalMode { Cadlag, Mp };

/// alpha(d theta) on [-r, 0]: grid atoms plus an optional density sampled at nodes.
struct Distributed {
  std::vector<std::pair<double, double>> atoms;  // (theta, weight)
  std::function<double(double)> density;         // kappa(theta), may be empty
};

/// S(t + tau), tau in [-r, 0].
struct Discrete {
  double tau = 0.0;
};

/// int_{t-r}^t S(u) dW^j(u), with S the solution (or S = 1).
struct BrownianDelay {
  int noise_component = 0;
  bool unit_integrand = false;
};

/// int_{t-r}^t S(u-) dL^j(u), L^j(t) = int z N~^j(ds, dz) at the reference truncation.
struct LevyDelay {
  int noise_component = 0;
  bool unit_integrand = false;
};

/// E[int S(t + theta) alpha(d theta)] over the lockstep ensemble.
struct MeanField {
  Distributed inner;
};

using DelayKernel = std::variant<Distributed, Discrete, BrownianDelay, LevyDelay, MeanField>;

bool is_noisy(const DelayKernel& kernel);
bool is_mean_field(const DelayKernel& kernel);

/// Running integrals I(t) = int_0^t S dY for the noisy kernels of a model,
/// stored by absolute step so the lagged value I(t - r) is available.
class AuxiliaryState {
 public:
  AuxiliaryState() = default;
  AuxiliaryState(int kernels, int dim);

  bool maintained() const { return maintained_; }
  /// Number of recorded absolute steps (I is known at steps 0 .. size-1).
  long size() const { return steps_; }
  const Eigen::VectorXd& value(int kernel, long step) const;
  /// Appends I at the next step for one kernel; commit() closes the step.
  void push(int kernel, Eigen::VectorXd value) { history_[static_cast<std::size_t>(kernel)].push_back(std::move(value)); }
  void commit() { ++steps_; }
  /// Keeps the values for steps 0 .. step.
  AuxiliaryState truncated(long step) const;

 private:
  std::vector<std::vector<Eigen::VectorXd>> history_;
  long steps_ = 0;
  bool maintained_ = false;
};

/// Sum of atoms times segment values plus a left-Riemann sum of the density part.
Eigen::VectorXd eval_distributed(const Segment& seg, const Distributed& alpha, EvalMode mode = EvalMode::Cadlag);
Eigen::VectorXd eval_discrete(const Segment& seg, double tau, EvalMode mode = EvalMode::Cadlag);
/// I(step) - I(step - window) for noisy kernel `kernel`; I vanishes before step 0.
Eigen::VectorXd eval_noisy_delay(const AuxiliaryState& state, int kernel, long step, int window);
Eigen::VectorXd eval_meanfield(std::span<const Segment> ensemble, const Distributed& alpha,
                               EvalMode mode = EvalMode::Cadlag);

/// Feature source for the affine coefficient catalog.
struct Feature {
  enum class Source { Time, Present, Kernel };
  enum class Transform { Identity, Sin, Cos, Tanh, Exp };
  Source source = Source::Present;
  int kernel = 0;     // index into SfddeModel::kernels for Source::Kernel
  int component = 0;  // component of the present value / kernel output
  Transform transform = Transform::Identity;

  double apply(double x) const;
};

/// out = constant + sum_terms coefficient * phi(feature); out has a fixed shape.
struct AffineForm {
  Eigen::MatrixXd constant;
  std::vector<std::pair<Eigen::MatrixXd, Feature>> terms;

  static AffineForm zero(int rows, int cols);
  AffineForm& add(Eigen::MatrixXd coefficient, Feature feature);
  int rows() const { return static_cast<int>(constant.rows()); }
  int cols() const { return static_cast<int>(constant.cols()); }
  bool is_zero() const;
  /// Uniform bound on the sup-Lipschitz constant of the form (identity, sin,
  /// cos, tanh are 1-Lipschitz; exp is unbounded and yields infinity).
  double lipschitz_bound() const;

  void evaluate(double t, const Eigen::VectorXd& present, std::span<const Eigen::VectorXd> kernels,
                Eigen::MatrixXd& out) const;
};

/// Values of every kernel of a model at one (t, segment).
struct EvalContext {
  double t = 0.0;
  Eigen::VectorXd present;
  std::vector<Eigen::VectorXd> kernels;
};

/// Non-factorized jump coefficient h(t, eta)(z), column j; optional.
using GeneralJump = std::function<Eigen::VectorXd(const EvalContext&, double z, int component)>;

struct SfddeModel {
  int d = 1, m = 1, n = 1, k = 1;
  double delay = 0.0;
  EvalMode mode = EvalMode::Cadlag;
  std::vector<DelayKernel> kernels;
  AffineForm f;   // d x 1
  AffineForm g;   // d x m
  AffineForm h0;  // d x k
  JumpScaling scaling;  // k x n
  std::vector<LevyMeasure> nu;
  GeneralJump general_jump;  // when set, replaces h0 * lambda
  double lipschitz = 0.0;
  double growth = 0.0;
  double p = 2.0;

  bool factorized() const { return !general_jump; }
  bool mean_field() const;
  bool has_noisy_kernels() const;
  bool has_jumps() const;
  /// Checks shapes, kernel placement on the grid, evaluation-mode rules and
  /// lambda integrability.
  void validate(double dt) const;
};

/// Fills ctx.present and ctx.kernels at absolute step `step`. Mean-field
/// kernel values must be supplied by the ensemble driver (indexed by kernel).
void evaluate_kernels(const SfddeModel& model, const Segment& seg, const AuxiliaryState& aux, long step,
                      EvalContext& ctx, const std::vector<Eigen::VectorXd>* mean_field = nullptr);

/// f(t, eta) for a deterministic functional model, evaluated on a standalone segment.
Eigen::VectorXd eval_drift(const SfddeModel& model, double t, const Segment& seg);

/// Empirical Lipschitz probe: max |f(t, eta1) - f(t, eta2)| / sup|eta1 - eta2| over
/// random piecewise-constant segment pairs.
double lipschitz_probe(const SfddeModel& model, double t, double dt, int probes, std::uint64_t seed);

}  // namespace sfdde
