#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "../support/models.hpp"
#include "../support/random_models.hpp"
#include "sfdde/calculus.hpp"
#include "sfdde/error.hpp"

using namespace sfdde;
namespace tmod = testing_models;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

template <class F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

template <class Fn>
CadlagPath path_of(const TimeGrid& grid, Fn&& fn) {
  CadlagPath path(grid, 1);
  for (int i = 0; i < grid.node_count(); ++i) path.value(i)[0] = fn(grid.time(i));
  return path;
}

KernelPath unit_kernel(int window) {
  return [window](int) { return Eigen::MatrixXd::Ones(1, window + 1).eval(); };
}

// X' = cos t with X = sin on [-r, 0]
SolveReport sine_path(double r, double horizon, double dt) {
  auto model = tmod::scalar_model(r);
  model.f.add(tmod::scalar(1.0), tmod::time(Feature::Transform::Cos));
  const TimeGrid grid(r, horizon, dt);
  const NoiseGenerator gen(model, horizon, dt, 0.0);
  const auto eta = SegmentBuffer::sample(1, r, dt, [](double th) { return v1(std::sin(th)); });
  return euler_solve(model, eta.view(), grid, gen.generate(0, 0), reference_treatment(model, 0.0));
}

SfddeModel poisson_model() {
  auto model = tmod::scalar_model(0.5);
  model.h0.constant(0, 0) = 1.0;
  tmod::add_identity_jumps(model, LevyMeasure::atoms({{1.0, 3.0}}));
  model.f.constant(0, 0) = 3.0;
  return model;
}

SolveReport solve_cached(const SfddeModel& model, double horizon, double dt, double eps_ref, std::uint64_t seed,
                         std::uint64_t path, double x0 = 1.0, bool record = true) {
  const TimeGrid grid(model.delay, horizon, dt);
  const NoiseGenerator gen(model, horizon, dt, eps_ref);
  const auto eta = SegmentBuffer::constant(Eigen::VectorXd::Constant(model.d, x0), model.delay, dt);
  SolveOptions options;
  options.cache_coefficients = true;
  options.record_jumps = record;
  return euler_solve(model, eta.view(), grid, gen.generate(seed, path), reference_treatment(model, eps_ref), options);
}

double max_abs(const std::vector<ResidualPoint>& profile) {
  double m = 0.0;
  for (const auto& p : profile) m = std::max(m, std::abs(p.residual));
  return m;
}

}  // namespace

TEST(TestFunctional, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  const double dt = 0.01;
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + rep % 2;
    const auto F = tmod::random_functional(rng, d);
    const auto eta = SegmentBuffer::sample(d, 0.3, dt, [&](double th) {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v[i] = std::sin(3 * th + i) + 0.2 * i;
      return v;
    });
    const Eigen::VectorXd x = eta.values.col(eta.window());
    const double t = 0.4, h = 1e-5;
    EXPECT_NEAR(F.partial_t(t, eta.view(), x), (F.value(t + h, eta.view(), x) - F.value(t - h, eta.view(), x)) / (2 * h),
                1e-7);
    const Eigen::VectorXd grad = F.grad_x(t, eta.view(), x);
    const Eigen::MatrixXd hess = F.hess_x(t, eta.view(), x);
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd up = x, down = x;
      up[i] += h;
      down[i] -= h;
      EXPECT_NEAR(grad[i], (F.value(t, eta.view(), up) - F.value(t, eta.view(), down)) / (2 * h), 1e-7);
      const Eigen::VectorXd dg = (F.grad_x(t, eta.view(), up) - F.grad_x(t, eta.view(), down)) / (2 * h);
      for (int j = 0; j < d; ++j) EXPECT_NEAR(hess(j, i), dg[j], 1e-6);
    }
    // dF/d eta(theta_k) = DF(theta_k) dt for interior nodes
    const Eigen::MatrixXd kernel = F.frechet_kernel(t, eta.view(), x);
    for (int k : {0, 7, eta.window() - 1}) {
      for (int i = 0; i < d; ++i) {
        SegmentBuffer up = eta, down = eta;
        up.values(i, k) += h;
        down.values(i, k) -= h;
        const double fd = (F.value(t, up.view(), x) - F.value(t, down.view(), x)) / (2 * h);
        EXPECT_NEAR(kernel(i, k) * dt, fd, 1e-8);
      }
    }
    const Eigen::MatrixXd dk = F.kernel_theta_grad(t, eta.view(), x);
    for (int k = 1; k < eta.window(); ++k) {
      const Eigen::VectorXd central = (kernel.col(k + 1) - kernel.col(k - 1)) / (2 * dt);
      EXPECT_LT((dk.col(k) - central).norm(), 1e-3 * (1.0 + dk.col(k).norm()));
    }
  }
}

TEST(ForwardIntegral, IdentityPathGivesRTimesT) {
  const TimeGrid grid(1.0, 2.0, 0.01);
  const auto path = path_of(grid, [](double t) { return t; });
  const std::vector<int> shifts{1, 2, 4};
  for (const auto& p : forward_integral(unit_kernel(grid.window()), path, shifts, 1.5)) {
    EXPECT_NEAR(p.value, 1.0 * 1.5, 1e-11) << p.m;
  }
}

TEST(ForwardIntegral, ConstantPathGivesZero) {
  const TimeGrid grid(1.0, 2.0, 0.01);
  const auto path = path_of(grid, [](double) { return 4.0; });
  const std::vector<int> shifts{1, 3};
  for (const auto& p : forward_integral(unit_kernel(grid.window()), path, shifts, 1.0)) EXPECT_EQ(p.value, 0.0);
}

TEST(ForwardIntegral, PoissonPathMatchesBruteForce) {
  const auto model = poisson_model();
  const double dt = 0.01;
  const auto report = solve_cached(model, 2.0, dt, 0.0, 3, 1, 0.0);
  ASSERT_FALSE(report.path.jump_log().empty());
  const auto& path = report.path;
  const std::vector<int> shifts{1, 2, 4};
  const double t = 1.5;
  const auto points = forward_integral(unit_kernel(path.grid().window()), path, shifts, t);
  // brute force: the shifted-difference definition by direct time lookups
  for (const auto& p : points) {
    double sum = 0.0;
    const double r = model.delay;
    for (int i = 0; i * dt < t - 1e-9; ++i) {
      const double s = i * dt;
      for (int k = 1; k * dt <= r + 1e-9; ++k) {
        const double th = -k * dt;
        sum += (path.at(s + p.eps + th)[0] - path.at(s + th)[0]) / p.eps * dt;
      }
    }
    EXPECT_NEAR(p.value, sum * dt, 1e-9) << p.m;
  }
  // each jump contributes about r (window) times its size; shifts differ by O(eps) per jump
  for (std::size_t q = 1; q < points.size(); ++q) {
    EXPECT_LT(std::abs(points[q].value - points[0].value), 4.0 * points[q].eps * static_cast<double>(path.jump_log().size()));
  }
}

TEST(ForwardIntegral, ShiftBeyondHorizon) {
  const TimeGrid grid(0.5, 1.0, 0.1);
  const auto path = path_of(grid, [](double t) { return t; });
  const std::vector<int> shifts{1};
  const std::vector<int> far{3};
  EXPECT_NO_THROW(forward_integral(unit_kernel(grid.window()), path, shifts, 1.0));
  expect_code(ErrorCode::ShiftBeyondHorizon, [&] { forward_integral(unit_kernel(grid.window()), path, far, 0.9); });
}

TEST(WeakForwardIntegral, LinearAndConstantPaths) {
  const TimeGrid grid(1.0, 2.0, 0.01);
  const auto F = TestFunctional::integral(WeightFn::constant(v1(1.0)));
  const auto ramp = path_of(grid, [](double t) { return t; });
  const std::vector<int> one{1};
  EXPECT_NEAR(weak_forward_integral(F, ramp, 1.5), 1.5, 1e-11);
  EXPECT_NEAR(weak_forward_integral(F, ramp, 1.5), forward_integral(frechet_kernel_path(F, ramp), ramp, one, 1.5)[0].value,
              1e-12);
  const auto flat = path_of(grid, [](double) { return -2.0; });
  EXPECT_EQ(weak_forward_integral(F, flat, 2.0), 0.0);
}

TEST(WeakForwardIntegral, SineClosedForm) {
  const double r = 0.5, t = 1.0;
  const auto F = TestFunctional::integral(WeightFn::constant(v1(1.0)));
  const double exact = -std::cos(t) + std::cos(t - r) + 1.0 - std::cos(r);
  double previous = 1e300;
  for (double dt : {1e-2, 1e-3}) {
    const auto report = sine_path(r, 1.5, dt);
    const double weak = weak_forward_integral(F, report.path, t);
    const double err = std::abs(weak - exact) / std::abs(exact);
    EXPECT_LT(err, previous);
    previous = err;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(WeakForwardIntegral, ForwardShiftsApproachWeakForm) {
  const double r = 0.5, t = 1.0;
  const auto report = sine_path(r, 1.5, 1e-3);
  const auto F = TestFunctional::integral(WeightFn::exponential(v1(1.0), 2.0));
  const double weak = weak_forward_integral(F, report.path, t);
  const std::vector<int> shifts{16, 8, 4, 2, 1};
  const auto points = forward_integral(frechet_kernel_path(F, report.path), report.path, shifts, t);
  double previous = 1e300;
  for (const auto& p : points) {
    const double gap = std::abs(p.value - weak);
    EXPECT_LT(gap, previous * 1.1) << p.m;
    EXPECT_LT(gap, 2.0 * p.eps * std::abs(weak));
    previous = gap;
  }
  EXPECT_LT(std::abs(points.back().value - weak), 1e-12 * std::abs(weak));
}

TEST(WeakForwardIntegral, RejectsJumps) {
  const auto report = solve_cached(poisson_model(), 2.0, 0.01, 0.0, 3, 1, 0.0);
  const auto F = TestFunctional::integral(WeightFn::constant(v1(1.0)));
  expect_code(ErrorCode::JumpDetected, [&] { weak_forward_integral(F, report.path, 2.0); });
}

TEST(ItoResidual, LinearFunctionalTelescopes) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const auto model = tmod::random_jump_model(rng);
    const auto report = solve_cached(model, 1.0, 0.01, 0.05, 2, static_cast<std::uint64_t>(rep));
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(model.d, 1.0, 2.0);
    const auto profile = ito_residual(TestFunctional::linear(v), report, model, 1.0);
    EXPECT_EQ(profile.size(), 101u);
    EXPECT_LT(max_abs(profile), 1e-12 * (1.0 + report.path.values().cwiseAbs().maxCoeff()));
  }
}

TEST(ItoResidual, PoissonSquareIsExact) {
  const auto model = poisson_model();
  for (std::uint64_t path = 0; path < 10; ++path) {
    const auto report = solve_cached(model, 2.0, 0.01, 0.0, 5, path, 0.0);
    const auto F = TestFunctional::quadratic(v1(1.0));
    const auto a = ito_residual(F, report, model, 2.0);
    const auto b = ito_residual_jumpform(F, report, model, 2.0);
    EXPECT_LT(max_abs(a), 1e-9);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].residual, b[i].residual);
  }
}

TEST(ItoResidual, BrownianSquareConvergesAtHalfOrder) {
  auto model = tmod::scalar_model(0.0);
  model.g.constant(0, 0) = 1.0;
  const auto F = TestFunctional::quadratic(v1(1.0));
  std::vector<double> lx, ly;
  for (double dt : {1e-2, 1e-3, 1e-4}) {
    std::vector<double> final_residual, worst;
    for (std::uint64_t path = 0; path < 100; ++path) {
      const auto report = solve_cached(model, 1.0, dt, 0.0, 13, path, 0.0);
      const auto profile = ito_residual(F, report, model, 1.0);
      final_residual.push_back(profile.back().residual);
      worst.push_back(max_abs(profile));
    }
    const auto m = stats::summarize(final_residual);
    EXPECT_LT(std::abs(m.mean), stats::normal_two_sided_quantile(0.99) * m.stderr_of_mean) << dt;
    lx.push_back(std::log(dt));
    ly.push_back(std::log(stats::summarize(worst).mean));
  }
  EXPECT_NEAR(stats::fit_line(lx, ly).slope, 0.5, 0.15);
}

TEST(ItoResidual, TimeDependentLinearFunctionalIsFirstOrder) {
  auto model = tmod::scalar_model(0.5);
  model.kernels = {Discrete{-0.5}};
  model.f.add(tmod::scalar(-0.7), tmod::kernel(0));
  model.g.constant(0, 0) = 0.4;
  model.h0.add(tmod::scalar(0.3), tmod::present());
  tmod::add_identity_jumps(model, LevyMeasure::tempered_stable(0.5, 1.0, 1.0));
  TestFunctional F(1);
  F.add({ScalarFn::exp(1.0), v1(1.0), ScalarFn::identity(), {}, ScalarFn::constant(1.0)});
  F.add({ScalarFn::exp(1.0), {}, ScalarFn::constant(1.0), WeightFn::exponential(v1(0.8), 1.0), ScalarFn::identity()});
  std::vector<double> constants;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    double worst = 0.0;
    for (std::uint64_t path = 0; path < 20; ++path) {
      const auto report = solve_cached(model, 1.0, dt, 0.05, 17, path);
      worst = std::max(worst, max_abs(ito_residual(F, report, model, 1.0)));
    }
    constants.push_back(worst / dt);
  }
  for (std::size_t i = 1; i < constants.size(); ++i) {
    EXPECT_LT(constants[i], 2.0 * constants[0]);
    EXPECT_GT(constants[i], 0.25 * constants[0]);
  }
}

TEST(ItoResidual, TwoFormsAgreeOnRandomModels) {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    const auto model = tmod::random_jump_model(rng);
    const auto F = tmod::random_functional(rng, model.d);
    const auto report = solve_cached(model, 0.5, 0.01, 0.05, 4, static_cast<std::uint64_t>(rep));
    const auto a = ito_residual(F, report, model, 0.5);
    const auto b = ito_residual_jumpform(F, report, model, 0.5);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(a[i].residual - b[i].residual), 1e-12);
  }
}

TEST(ItoResidual, NoJumpsFormsCoincide) {
  auto model = tmod::scalar_model(0.5);
  model.g.add(tmod::scalar(0.5), tmod::present(0, Feature::Transform::Sin));
  const auto report = solve_cached(model, 1.0, 0.01, 0.0, 1, 1);
  const auto F = TestFunctional::quadratic(v1(1.0));
  const auto a = ito_residual(F, report, model, 1.0);
  const auto b = ito_residual_jumpform(F, report, model, 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].residual, b[i].residual);
}

TEST(ItoResidual, MissingJumpLog) {
  const auto model = poisson_model();
  const auto report = solve_cached(model, 1.0, 0.01, 0.0, 1, 1, 0.0, false);
  expect_code(ErrorCode::MissingJumpLog,
              [&] { ito_residual(TestFunctional::linear(v1(1.0)), report, model, 1.0); });
}

TEST(ItoResidual, CsvColumns) {
  const std::vector<ResidualPoint> profile{{0.0, 0.0}, {0.5, -0.25}};
  std::ostringstream out;
  write_residual_csv(out, profile);
  EXPECT_EQ(out.str(),
            "t,residual,abs_residual\n0.0000000000000000e+00,0.0000000000000000e+00,0.0000000000000000e+00\n"
            "5.0000000000000000e-01,-2.5000000000000000e-01,2.5000000000000000e-01\n");
}

TEST(BackwardExtension, Examples) {
  const double dt = 0.1;
  const auto constant = SegmentBuffer::constant(v1(2.5), 0.5, dt);
  const auto ext = backward_extension(constant.view(), 1.0);
  EXPECT_EQ(ext.window(), 10);
  for (int k = 0; k <= 10; ++k) EXPECT_EQ(ext.values(0, k), 2.5);

  // phi(s) = s on [0, 0.5]; as a segment phi(0) sits at step -5
  const auto ramp = SegmentBuffer::sample(1, 0.5, dt, [](double th) { return v1(th + 0.5); });
  const auto l = backward_extension(ramp.view(), 1.0);
  for (int k = -10; k <= 0; ++k) {
    const double th = k * dt;
    const double expected = th < -0.5 + 1e-12 ? 0.0 : th + 0.5;
    EXPECT_NEAR(l.view().at_step(k)[0], expected, 1e-15) << k;
  }
  const auto back = restriction(l.view(), 0.5);
  EXPECT_EQ(back.values, ramp.values);
  expect_code(ErrorCode::HorizonExceedsDelay, [&] { backward_extension(ramp.view(), 0.3); });
}

TEST(VerticalDerivative, Examples) {
  const double dt = 0.01;
  const auto phi = SegmentBuffer::sample(1, 0.4, dt, [](double th) { return v1(std::sin(5 * (th + 0.4))); });
  const double x = phi.values(0, phi.window());
  const auto sq = vertical_derivative(TestFunctional::quadratic(v1(1.0)), phi.view(), 1.0, 1e-4);
  EXPECT_NEAR(sq.analytic[0], 2 * x, 1e-14);
  EXPECT_NEAR(sq.estimate[0], 2 * x, 1e-9);
  const auto flat = vertical_derivative(TestFunctional::integral(WeightFn::constant(v1(1.0))), phi.view(), 1.0, 1e-4);
  EXPECT_EQ(flat.estimate[0], 0.0);
  EXPECT_EQ(flat.analytic[0], 0.0);
  TestFunctional F(1);
  F.add({ScalarFn::constant(1.0), v1(1.0), ScalarFn::sin(), WeightFn::exponential(v1(1.5), -1.0), ScalarFn::exp(0.7)});
  const auto c = vertical_derivative(F, phi.view(), 1.0, 1e-5);
  EXPECT_LT(std::abs(c.estimate[0] - c.analytic[0]) / std::abs(c.analytic[0]), 1e-6);
}

TEST(HorizontalDerivative, Examples) {
  const double dt = 1e-4;
  TestFunctional time_only(1);
  time_only.add({ScalarFn::identity(), {}, ScalarFn::constant(1.0), {}, ScalarFn::constant(1.0)});
  const auto phi = SegmentBuffer::sample(1, 0.3, dt, [](double th) { return v1(std::sin(th + 0.3)); });
  const auto t = horizontal_derivative(time_only, phi.view(), 0.5, 1);
  EXPECT_NEAR(t.estimate, 1.0, 1e-9);
  EXPECT_EQ(t.analytic, 1.0);

  const auto flat = SegmentBuffer::constant(v1(1.3), 0.3, dt);
  const auto pairing_only = TestFunctional::integral(WeightFn::exponential(v1(1.0), 1.0));
  const auto z = horizontal_derivative(pairing_only, flat.view(), 0.5, 1);
  EXPECT_NEAR(z.estimate, 0.0, 1e-10);
  EXPECT_EQ(z.analytic, 0.0);

  TestFunctional psi(1);
  psi.add({ScalarFn::constant(1.0), {}, ScalarFn::constant(1.0), WeightFn::exponential(v1(1.0), 2.0), ScalarFn::sin()});
  const auto s = horizontal_derivative(psi, phi.view(), 0.5, 1);
  EXPECT_LT(std::abs(s.estimate - s.analytic) / std::abs(s.analytic), 1e-2);
}

TEST(SmoothPiece, RejectsJumps) {
  const auto report = solve_cached(poisson_model(), 2.0, 0.01, 0.0, 3, 1, 0.0);
  expect_code(ErrorCode::JumpDetected, [&] { smooth_piece(report.path, 2.0); });
  const auto smooth = sine_path(0.5, 1.0, 0.01);
  const auto piece = smooth_piece(smooth.path, 0.4);
  EXPECT_EQ(piece.window(), 40);
  EXPECT_EQ(piece.values(0, 40), smooth.path.at(0.4)[0]);
}
