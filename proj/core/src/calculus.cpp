#include "sfdde/calculus.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "sfdde/error.hpp"

namespace sfdde {

ScalarFn ScalarFn::constant(double c) {
  return {[c](double) { return c; }, [](double) { return 0.0; }, [](double) { return 0.0; }};
}

ScalarFn ScalarFn::identity() {
  return {[](double x) { return x; }, [](double) { return 1.0; }, [](double) { return 0.0; }};
}

ScalarFn ScalarFn::square() {
  return {[](double x) { return x * x; }, [](double x) { return 2.0 * x; }, [](double) { return 2.0; }};
}

ScalarFn ScalarFn::exp(double c) {
  return {[c](double x) { return std::exp(c * x); }, [c](double x) { return c * std::exp(c * x); },
          [c](double x) { return c * c * std::exp(c * x); }};
}

ScalarFn ScalarFn::sin() {
  return {[](double x) { return std::sin(x); }, [](double x) { return std::cos(x); },
          [](double x) { return -std::sin(x); }};
}

ScalarFn ScalarFn::cos() {
  return {[](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); },
          [](double x) { return -std::cos(x); }};
}

WeightFn WeightFn::zero(int dim) {
  auto z = [dim](double) { return Eigen::VectorXd::Zero(dim).eval(); };
  return {z, z, true};
}

WeightFn WeightFn::constant(Eigen::VectorXd c) {
  const int dim = static_cast<int>(c.size());
  return {[c](double) { return c; }, [dim](double) { return Eigen::VectorXd::Zero(dim).eval(); }, false};
}

WeightFn WeightFn::exponential(Eigen::VectorXd c, double a) {
  return {[c, a](double th) { return (c * std::exp(a * th)).eval(); },
          [c, a](double th) { return (a * c * std::exp(a * th)).eval(); }, false};
}

double pairing(const WeightFn& w, const Segment& seg) {
  if (w.vanishes) return 0.0;
  double sum = 0.0;
  for (int k = -seg.window(); k < 0; ++k) sum += w.w(k * seg.dt()).dot(seg.at_step(k));
  return sum * seg.dt();
}

double pairing(const Eigen::MatrixXd& kernel, const Segment& seg) {
  if (kernel.rows() != seg.dim() || kernel.cols() != seg.window() + 1) {
    throw Error(ErrorCode::DimensionMismatch, "kernel does not match the segment");
  }
  double sum = 0.0;
  for (int k = -seg.window(); k < 0; ++k) sum += kernel.col(k + seg.window()).dot(seg.at_step(k));
  return sum * seg.dt();
}

namespace {

struct TermValues {
  double a, da, s, ds, d2s, psi, dpsi, vx;
};

TermValues term_values(const FunctionalTerm& term, double t, const Segment& eta, const Eigen::VectorXd& x) {
  TermValues v{};
  v.a = term.time.f(t);
  v.da = term.time.df(t);
  v.vx = term.v.size() == 0 ? 0.0 : term.v.dot(x);
  v.s = term.present.f(v.vx);
  v.ds = term.present.df(v.vx);
  v.d2s = term.present.d2f(v.vx);
  const double m = pairing(term.weight, eta);
  v.psi = term.memory.f(m);
  v.dpsi = term.memory.df(m);
  return v;
}

// Column k + W of the result holds fn(theta_k) for k = -W..0.
Eigen::MatrixXd sample_weight(const std::function<Eigen::VectorXd(double)>& fn, int dim, const Segment& eta) {
  Eigen::MatrixXd out(dim, eta.window() + 1);
  for (int k = -eta.window(); k <= 0; ++k) out.col(k + eta.window()) = fn(k * eta.dt());
  return out;
}

}  // namespace

TestFunctional& TestFunctional::add(FunctionalTerm term) {
  if (term.v.size() == 0) term.v = Eigen::VectorXd::Zero(dim_);
  if (term.v.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "term direction differs from d");
  if (!term.weight.w) term.weight = WeightFn::zero(dim_);
  terms_.push_back(std::move(term));
  return *this;
}

double TestFunctional::value(double t, const Segment& eta, const Eigen::VectorXd& x) const {
  double sum = 0.0;
  for (const auto& term : terms_) {
    const auto v = term_values(term, t, eta, x);
    sum += v.a * v.s * v.psi;
  }
  return sum;
}

double TestFunctional::partial_t(double t, const Segment& eta, const Eigen::VectorXd& x) const {
  double sum = 0.0;
  for (const auto& term : terms_) {
    const auto v = term_values(term, t, eta, x);
    sum += v.da * v.s * v.psi;
  }
  return sum;
}

Eigen::VectorXd TestFunctional::grad_x(double t, const Segment& eta, const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (const auto& term : terms_) {
    const auto v = term_values(term, t, eta, x);
    g += (v.a * v.ds * v.psi) * term.v;
  }
  return g;
}

Eigen::MatrixXd TestFunctional::hess_x(double t, const Segment& eta, const Eigen::VectorXd& x) const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const auto& term : terms_) {
    const auto v = term_values(term, t, eta, x);
    h += (v.a * v.d2s * v.psi) * term.v * term.v.transpose();
  }
  return h;
}

Eigen::MatrixXd TestFunctional::frechet_kernel(double t, const Segment& eta, const Eigen::VectorXd& x) const {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(dim_, eta.window() + 1);
  for (const auto& term : terms_) {
    if (term.weight.vanishes) continue;
    const auto v = term_values(term, t, eta, x);
    k += (v.a * v.s * v.dpsi) * sample_weight(term.weight.w, dim_, eta);
  }
  return k;
}

Eigen::MatrixXd TestFunctional::kernel_theta_grad(double t, const Segment& eta, const Eigen::VectorXd& x) const {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(dim_, eta.window() + 1);
  for (const auto& term : terms_) {
    if (term.weight.vanishes) continue;
    const auto v = term_values(term, t, eta, x);
    k += (v.a * v.s * v.dpsi) * sample_weight(term.weight.dw, dim_, eta);
  }
  return k;
}

double TestFunctional::frechet_pairing(double t, const Segment& eta, const Eigen::VectorXd& x,
                                       const Eigen::MatrixXd& direction) const {
  double sum = 0.0;
  for (const auto& term : terms_) {
    if (term.weight.vanishes) continue;
    const auto v = term_values(term, t, eta, x);
    double p = 0.0;
    for (int k = -eta.window(); k < 0; ++k) p += term.weight.w(k * eta.dt()).dot(direction.col(k + eta.window()));
    sum += v.a * v.s * v.dpsi * p * eta.dt();
  }
  return sum;
}

bool TestFunctional::depends_on_segment() const {
  for (const auto& term : terms_) {
    if (!term.weight.vanishes) return true;
  }
  return false;
}

TestFunctional TestFunctional::linear(Eigen::VectorXd v) {
  TestFunctional F(static_cast<int>(v.size()));
  F.add({ScalarFn::constant(1.0), std::move(v), ScalarFn::identity(), {}, ScalarFn::constant(1.0)});
  return F;
}

TestFunctional TestFunctional::quadratic(Eigen::VectorXd v) {
  TestFunctional F(static_cast<int>(v.size()));
  F.add({ScalarFn::constant(1.0), std::move(v), ScalarFn::square(), {}, ScalarFn::constant(1.0)});
  return F;
}

TestFunctional TestFunctional::integral(WeightFn w) {
  const int dim = static_cast<int>(w.w(0.0).size());
  TestFunctional F(dim);
  F.add({ScalarFn::constant(1.0), {}, ScalarFn::constant(1.0), std::move(w), ScalarFn::identity()});
  return F;
}

KernelPath frechet_kernel_path(const TestFunctional& F, const CadlagPath& path) {
  return [&F, &path](int node) {
    return F.frechet_kernel(path.grid().time(node), path.segment(node), path.value(node));
  };
}

namespace {

// X_{s + shift} - X_s at node, as a d x (W + 1) matrix.
Eigen::MatrixXd segment_increment(const CadlagPath& path, int node, int shift) {
  const int w = path.grid().window();
  return path.values().middleCols(node + shift - w, w + 1) - path.values().middleCols(node - w, w + 1);
}

int end_node(const CadlagPath& path, double t) {
  const int node = path.grid().node_of(t);
  if (node < path.grid().start_node()) throw Error(ErrorCode::OffsetOutOfRange, "t precedes the start of the path");
  return node;
}

double kernel_pairing(const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& direction, double dt) {
  const int w = static_cast<int>(kernel.cols()) - 1;
  double sum = 0.0;
  for (int c = 0; c < w; ++c) sum += kernel.col(c).dot(direction.col(c));
  return sum * dt;
}

}  // namespace

std::vector<ForwardPoint> forward_integral(const KernelPath& y, const CadlagPath& path, std::span<const int> shifts,
                                           double t) {
  const TimeGrid& grid = path.grid();
  const int last = end_node(path, t);
  std::vector<ForwardPoint> out;
  for (int m : shifts) {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "shift must be a positive number of steps");
    if (last - 1 + m >= grid.node_count()) {
      std::ostringstream msg;
      msg << "shift " << m << " dt past t = " << t << " leaves the path";
      throw Error(ErrorCode::ShiftBeyondHorizon, msg.str());
    }
    const double eps = m * grid.dt();
    double sum = 0.0;
    for (int node = grid.start_node(); node < last; ++node) {
      sum += kernel_pairing(y(node), segment_increment(path, node, m), grid.dt()) / eps;
    }
    out.push_back({m, eps, sum * grid.dt()});
  }
  return out;
}

double weak_forward_integral(const TestFunctional& F, const CadlagPath& path, double t) {
  const TimeGrid& grid = path.grid();
  const int last = end_node(path, t);
  for (const auto& j : path.jump_log()) {
    if (j.time <= t) {
      std::ostringstream msg;
      msg << "path jumps at t = " << j.time << "; segments are not weakly differentiable";
      throw Error(ErrorCode::JumpDetected, msg.str());
    }
  }
  const double dt = grid.dt();
  const int w = grid.window();
  double sum = 0.0;
  Eigen::MatrixXd derivative(path.dim(), w + 1);
  for (int node = grid.start_node(); node < last; ++node) {
    const Segment seg = path.segment(node);
    for (int k = -w; k <= 0; ++k) {
      derivative.col(k + w) = (path.value(node + k + 1) - path.value(node + k)) / dt;
    }
    sum += F.frechet_pairing(grid.time(node), seg, path.value(node), derivative);
  }
  return sum * dt;
}

namespace {

std::vector<ResidualPoint> residual_profile(const TestFunctional& F, const SolveReport& report,
                                            const SfddeModel& model, double t, bool jump_form) {
  const CadlagPath& path = report.path;
  const TimeGrid& grid = path.grid();
  if (F.dim() != path.dim()) throw Error(ErrorCode::DimensionMismatch, "functional dimension differs from the path");
  if (model.has_jumps() && !path.has_jump_log()) {
    throw Error(ErrorCode::MissingJumpLog, "Ito residual of a jump model needs the jump log");
  }
  const int last = end_node(path, t);
  const int steps = last - grid.start_node();
  if (static_cast<int>(report.g_cache.size()) < steps || static_cast<int>(report.h0_cache.size()) < steps) {
    throw Error(ErrorCode::InvalidArgument, "solve report lacks the coefficient cache");
  }
  const double dt = grid.dt();
  const int first = grid.start_node();
  const double f0 = F.value(grid.time(first), path.segment(first), path.value(first));
  const bool memory = F.depends_on_segment();
  const auto& log = path.jump_log();
  std::size_t next_jump = 0;
  EvalContext ctx;

  std::vector<ResidualPoint> out;
  out.reserve(static_cast<std::size_t>(steps + 1));
  out.push_back({grid.time(first), 0.0});
  double rhs = 0.0;
  for (int i = 0; i < steps; ++i) {
    const int node = first + i;
    const long s = grid.start_step() + i;
    const double ti = grid.time(node);
    const Segment seg = path.segment(node);
    const Eigen::VectorXd xi = path.value(node);
    const Eigen::VectorXd grad = F.grad_x(ti, seg, xi);
    const Eigen::MatrixXd& g = report.g_cache[static_cast<std::size_t>(i)];

    rhs += F.partial_t(ti, seg, xi) * dt;
    if (memory) rhs += F.frechet_pairing(ti, seg, xi, segment_increment(path, node, 1));
    rhs += grad.dot(path.value(node + 1) - xi);
    rhs += 0.5 * (g.transpose() * F.hess_x(ti, seg, xi) * g).trace() * dt;

    while (next_jump < log.size() && log[next_jump].cell < s) ++next_jump;
    bool ctx_ready = false;
    for (; next_jump < log.size() && log[next_jump].cell == s; ++next_jump) {
      const JumpRecord& j = log[next_jump];
      if (jump_form) {
        const Eigen::VectorXd delta = j.post - j.pre;
        rhs += F.value(ti, seg, j.post) - F.value(ti, seg, j.pre) - grad.dot(delta);
      } else {
        Eigen::VectorXd delta;
        if (model.factorized()) {
          delta = report.h0_cache[static_cast<std::size_t>(i)] * model.scaling.column(j.component, j.mark);
        } else {
          if (!ctx_ready) {
            ctx.t = ti;
            evaluate_kernels(model, seg, report.aux, s, ctx);
            ctx_ready = true;
          }
          delta = model.general_jump(ctx, j.mark, j.component);
        }
        rhs += F.value(ti, seg, j.pre + delta) - F.value(ti, seg, j.pre) - grad.dot(delta);
      }
    }
    const int n1 = node + 1;
    out.push_back({grid.time(n1), F.value(grid.time(n1), path.segment(n1), path.value(n1)) - f0 - rhs});
  }
  return out;
}

}  // namespace

std::vector<ResidualPoint> ito_residual(const TestFunctional& F, const SolveReport& report, const SfddeModel& model,
                                        double t) {
  return residual_profile(F, report, model, t, false);
}

std::vector<ResidualPoint> ito_residual_jumpform(const TestFunctional& F, const SolveReport& report,
                                                 const SfddeModel& model, double t) {
  return residual_profile(F, report, model, t, true);
}

SegmentBuffer backward_extension(const Segment& phi, double delay) {
  const int w = grid_multiple(delay, phi.dt(), "r");
  const int n = phi.window();
  if (n > w) {
    std::ostringstream msg;
    msg << "t = " << phi.delay() << " exceeds the delay r = " << delay;
    throw Error(ErrorCode::HorizonExceedsDelay, msg.str());
  }
  Eigen::MatrixXd values(phi.dim(), w + 1);
  for (int k = -w; k <= 0; ++k) {
    values.col(k + w) = k < -n ? phi.at_step(-n) : phi.at_step(k);
  }
  return SegmentBuffer(std::move(values), phi.dt());
}

SegmentBuffer restriction(const Segment& eta, double t) {
  const int n = grid_multiple(t, eta.dt(), "t");
  if (n > eta.window() || n < 0) throw Error(ErrorCode::HorizonExceedsDelay, "restriction beyond the segment");
  Eigen::MatrixXd values(eta.dim(), n + 1);
  for (int k = -n; k <= 0; ++k) values.col(k + n) = eta.at_step(k);
  return SegmentBuffer(std::move(values), eta.dt());
}

DerivativeCheck vertical_derivative(const TestFunctional& F, const Segment& phi, double delay, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "bump must be positive");
  const SegmentBuffer ext = backward_extension(phi, delay);
  const Segment eta = ext.view();
  const double t = phi.delay();
  const Eigen::VectorXd x = phi.present();
  DerivativeCheck out{Eigen::VectorXd(F.dim()), F.grad_x(t, eta, x)};
  for (int i = 0; i < F.dim(); ++i) {
    Eigen::VectorXd up = x, down = x;
    up[i] += h;
    down[i] -= h;
    out.estimate[i] = (F.value(t, eta, up) - F.value(t, eta, down)) / (2.0 * h);
  }
  return out;
}

HorizontalCheck horizontal_derivative(const TestFunctional& F, const Segment& phi, double delay, int steps) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "horizontal step must be at least one grid step");
  const int n = phi.window();
  const double dt = phi.dt();
  const double t = phi.delay();
  const double h = steps * dt;
  Eigen::MatrixXd flat(phi.dim(), n + steps + 1);
  for (int k = -n; k <= 0; ++k) flat.col(k + n) = phi.at_step(k);
  for (int k = 1; k <= steps; ++k) flat.col(n + k) = phi.present();
  const SegmentBuffer extended_phi(std::move(flat), dt);
  const SegmentBuffer now = backward_extension(phi, delay);
  const SegmentBuffer later = backward_extension(extended_phi.view(), delay);
  const Eigen::VectorXd x = phi.present();

  HorizontalCheck out;
  out.estimate = (F.value(t + h, later.view(), x) - F.value(t, now.view(), x)) / h;
  const Segment eta = now.view();
  const int w = eta.window();
  Eigen::MatrixXd forward(phi.dim(), w + 1);
  for (int k = -w; k < 0; ++k) forward.col(k + w) = (eta.at_step(k + 1) - eta.at_step(k)) / dt;
  forward.col(w).setZero();
  out.analytic = F.partial_t(t, eta, x) + F.frechet_pairing(t, eta, x, forward);
  return out;
}

SegmentBuffer smooth_piece(const CadlagPath& path, double t) {
  const TimeGrid& grid = path.grid();
  if (grid.start_step() != 0) throw Error(ErrorCode::InvalidArgument, "path piece needs a grid starting at 0");
  for (const auto& j : path.jump_log()) {
    if (j.time <= t) throw Error(ErrorCode::JumpDetected, "path jumps before t");
  }
  const int last = end_node(path, t);
  const int first = grid.start_node();
  return SegmentBuffer(path.values().middleCols(first, last - first + 1), grid.dt());
}

void write_residual_csv(std::ostream& out, std::span<const ResidualPoint> profile) {
  out << "t,residual,abs_residual\n";
  for (const auto& p : profile) {
    out << format_number(p.t) << ',' << format_number(p.residual) << ',' << format_number(std::abs(p.residual)) << '\n';
  }
}

}  // namespace sfdde
