#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sfdde/solver.hpp"

namespace sfdde {

/// A smooth scalar function with its first two derivatives.
struct ScalarFn {
  std::function<double(double)> f, df, d2f;

  static ScalarFn constant(double c);
  static ScalarFn identity();
  static ScalarFn square();
  /// e^{c x}
  static ScalarFn exp(double c = 1.0);
  static ScalarFn sin();
  static ScalarFn cos();
};

/// Weight w(theta) in R^d on [-r, 0] with its derivative in theta.
struct WeightFn {
  std::function<Eigen::VectorXd(double)> w, dw;
  bool vanishes = false;  // w == 0, lets evaluations skip the pairing

  static WeightFn zero(int dim);
  static WeightFn constant(Eigen::VectorXd c);
  /// w(theta) = c * e^{a theta}
  static WeightFn exponential(Eigen::VectorXd c, double a);
};

/// a(t) * s(v . x) * psi(<w, eta>), with <w, eta> the left-Riemann sum
/// dt * sum_{k=-W}^{-1} w(k dt) . eta(k dt).
struct FunctionalTerm {
  ScalarFn time = ScalarFn::constant(1.0);
  Eigen::VectorXd v;
  ScalarFn present = ScalarFn::constant(1.0);
  WeightFn weight;
  ScalarFn memory = ScalarFn::constant(1.0);
};

/// Sum of product-form terms with analytic derivatives in t, x and the segment.
class TestFunctional {
 public:
  explicit TestFunctional(int dim) : dim_(dim) {}
  TestFunctional& add(FunctionalTerm term);

  int dim() const { return dim_; }
  const std::vector<FunctionalTerm>& terms() const { return terms_; }

  double value(double t, const Segment& eta, const Eigen::VectorXd& x) const;
  double partial_t(double t, const Segment& eta, const Eigen::VectorXd& x) const;
  Eigen::VectorXd grad_x(double t, const Segment& eta, const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hess_x(double t, const Segment& eta, const Eigen::VectorXd& x) const;
  /// DF sampled at theta = k dt, k = -W..0, as a d x (W + 1) matrix.
  Eigen::MatrixXd frechet_kernel(double t, const Segment& eta, const Eigen::VectorXd& x) const;
  /// d/dtheta of DF at the same nodes.
  Eigen::MatrixXd kernel_theta_grad(double t, const Segment& eta, const Eigen::VectorXd& x) const;
  /// <DF(t, eta, x), direction> for a d x (W + 1) direction.
  double frechet_pairing(double t, const Segment& eta, const Eigen::VectorXd& x, const Eigen::MatrixXd& direction) const;
  /// False when DF vanishes identically (no term carries a weight).
  bool depends_on_segment() const;

  /// v . x
  static TestFunctional linear(Eigen::VectorXd v);
  /// (v . x)^2
  static TestFunctional quadratic(Eigen::VectorXd v);
  /// <w, eta>
  static TestFunctional integral(WeightFn w);

 private:
  int dim_;
  std::vector<FunctionalTerm> terms_;
};

/// dt * sum_{k=-W}^{-1} y(k) . z(k) for d x (W + 1) kernels and a segment.
double pairing(const Eigen::MatrixXd& kernel, const Segment& seg);
double pairing(const WeightFn& w, const Segment& seg);

/// Kernel Y_s at a path node as a d x (W + 1) matrix.
using KernelPath = std::function<Eigen::MatrixXd(int node)>;

/// DF(s, X_s, X(s)) along a path.
KernelPath frechet_kernel_path(const TestFunctional& F, const CadlagPath& path);

struct ForwardPoint {
  int m = 1;
  double eps = 0.0;
  double value = 0.0;
};

/// Left-Riemann discretization of int_start^t <Y_s, (X_{s+eps} - X_s)/eps> ds
/// for eps = m dt, one entry per shift. Throws ShiftBeyondHorizon.
std::vector<ForwardPoint> forward_integral(const KernelPath& y, const CadlagPath& path, std::span<const int> shifts,
                                           double t);

/// int_start^t <DF(s, X_s, X(s)), grad_theta^+ X_s> ds with the forward
/// difference in theta. Throws JumpDetected when the path jumped before t.
double weak_forward_integral(const TestFunctional& F, const CadlagPath& path, double t);

struct ResidualPoint {
  double t = 0.0;
  double residual = 0.0;
};

/// F(t, X_t, X(t)) minus the discrete right-hand side of the Ito formula with
/// the jump terms F(x- + D) - F(x-) - grad_x F . D and D = h0 lambda(z)
/// recomputed from the cached coefficients. One point per node up to t.
std::vector<ResidualPoint> ito_residual(const TestFunctional& F, const SolveReport& report, const SfddeModel& model,
                                        double t);
/// Same with the jump-sum form, D = post - pre from the jump log.
std::vector<ResidualPoint> ito_residual_jumpform(const TestFunctional& F, const SolveReport& report,
                                                 const SfddeModel& model, double t);

/// L_t: phi on [0, t] (a window-n segment, phi(0) at step -n) extended
/// backwards to [-r, 0] by phi(0). Throws HorizonExceedsDelay when t > r.
SegmentBuffer backward_extension(const Segment& phi, double delay);
/// M_t: the last t of a segment as a path on [0, t].
SegmentBuffer restriction(const Segment& eta, double t);

struct DerivativeCheck {
  Eigen::VectorXd estimate;
  Eigen::VectorXd analytic;
};

/// Central difference in the endpoint of u_t(phi) = F(t, L_t phi, phi(t)) against grad_x F.
DerivativeCheck vertical_derivative(const TestFunctional& F, const Segment& phi, double delay, double h);

struct HorizontalCheck {
  double estimate = 0.0;
  double analytic = 0.0;
};

/// One-sided difference of u under the flat extension of phi by `steps` grid
/// steps, against d_t F + <DF, grad_theta^+ L_t phi>.
HorizontalCheck horizontal_derivative(const TestFunctional& F, const Segment& phi, double delay, int steps);

/// Path on [0, t] of a solved path (grid starting at 0); throws JumpDetected if a jump occurred by t.
SegmentBuffer smooth_piece(const CadlagPath& path, double t);

/// CSV with columns t,residual,abs_residual.
void write_residual_csv(std::ostream& out, std::span<const ResidualPoint> profile);

}  // namespace sfdde
