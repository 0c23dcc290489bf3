#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "sfdde/calculus.hpp"
#include "sfdde/solver.hpp"

namespace sfdde {

/// Terminal payoff Phi(eta, x) from a small catalog.
struct TerminalPayoff {
  enum class Kind { Linear, Quadratic, Distributed, Call };
  Kind kind = Kind::Linear;
  Eigen::VectorXd v;          // direction applied to x (or to the delay integral)
  Distributed alpha;          // for Kind::Distributed
  double strike = 0.0;        // for Kind::Call
  int growth_degree = 1;      // declared polynomial growth

  double value(const Segment& eta, const Eigen::VectorXd& x) const;

  /// v . x
  static TerminalPayoff linear(Eigen::VectorXd v);
  /// (v . x)^2
  static TerminalPayoff quadratic(Eigen::VectorXd v);
  /// v . int eta(theta) alpha(d theta)
  static TerminalPayoff distributed(Eigen::VectorXd v, Distributed alpha);
  /// max(v . x - K, 0)
  static TerminalPayoff call(Eigen::VectorXd v, double strike);
};

struct FkEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t paths = 0;
  std::size_t excluded = 0;
  double t = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
};

/// E[Phi(X_T, X(T)) | X_t = eta] by restarting the scheme from (t, eta) on
/// independent noise. Paths with non-finite states are dropped; more than
/// 0.1% dropped throws TooManyFailures. Noisy-delay models need `aux`.
FkEstimate fk_estimate(const SfddeModel& model, const TerminalPayoff& payoff, double t, const Segment& eta,
                       double horizon, double eps_ref, const MonteCarloSetup& setup,
                       const AuxiliaryState* aux = nullptr);

/// An initial segment with a forward difference in theta: built only from a
/// sampled smooth function or a jump-free piece of a solved path.
class SmoothSegment {
 public:
  template <class Fn>
  static SmoothSegment sample(int dim, double delay, double dt, Fn&& fn) {
    return SmoothSegment(SegmentBuffer::sample(dim, delay, dt, std::forward<Fn>(fn)));
  }
  /// X_t of a solved path; throws JumpDetected if the window holds a jump.
  static SmoothSegment from_path(const CadlagPath& path, double t);

  Segment view() const { return buffer_.view(); }
  const SegmentBuffer& buffer() const { return buffer_; }

 private:
  explicit SmoothSegment(SegmentBuffer buffer) : buffer_(std::move(buffer)) {}
  SegmentBuffer buffer_;
};

/// d_t F + <DF, grad_theta^+ eta> + grad_x F . f + 1/2 Tr[g g* hess F]
/// + sum_j int (F(x + h^j(z)) - F - grad_x F . h^j(z)) nu_j(dz), at (t, eta, x).
double ppide_residual(const TestFunctional& F, const SfddeModel& model, double t, const SmoothSegment& eta,
                      const Eigen::VectorXd& x, const QuadratureOptions& options = {});

/// Max node deviation on [t1 - r, t2] between one run to t2 and a run to t1
/// restarted from its segment (and auxiliary integrals) on the same noise.
double flow_check(const SfddeModel& model, const Segment& eta, const NoiseRecord& noise,
                  const JumpTreatment& treatment, double t1, double t2);
double flow_check(const SfddeModel& model, const Segment& eta, double t1, double t2, double eps_ref,
                  std::uint64_t seed, std::uint64_t path = 0);

struct TowerReport {
  FkEstimate direct;
  FkEstimate two_stage;
  double t_statistic = 0.0;
  double p_value = 1.0;
};

/// Direct estimate from 0 against a two-stage one that runs to t1 and restarts
/// on independently seeded noise; Welch t-test of the two means.
TowerReport tower_check(const SfddeModel& model, const TerminalPayoff& payoff, const Segment& eta, double t1,
                        double horizon, double eps_ref, const MonteCarloSetup& setup);

/// key: value record with value, stderr, N, seed and the supplied model hash.
void write_fk_record(std::ostream& out, const FkEstimate& estimate, const std::string& model_hash);

}  // namespace sfdde
