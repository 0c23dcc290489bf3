#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "../support/models.hpp"
#include "sfdde/error.hpp"
#include "sfdde/robustness.hpp"

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

SfddeModel ts_model(double h0 = 0.5) {
  auto model = tmod::scalar_model(0.5);
  model.kernels = {Discrete{-0.5}};
  model.f.add(tmod::scalar(-0.5), tmod::kernel(0));
  model.g.add(tmod::scalar(0.3), tmod::present());
  if (h0 != 0.0) model.h0.add(tmod::scalar(h0), tmod::present());
  tmod::add_identity_jumps(model, LevyMeasure::tempered_stable(0.5, 1.0, 1.0));
  return model;
}

struct Bench {
  TimeGrid grid{0.5, 1.0, 0.01};
  SegmentBuffer eta = SegmentBuffer::constant(v1(1.0), 0.5, 0.01);
};

RobustnessSweep sweep_of(std::vector<double> eps, std::size_t paths, std::uint64_t seed = 1, int threads = 1) {
  RobustnessSweep s;
  s.eps_ref = 0.01;
  s.eps_list = std::move(eps);
  s.setup = {paths, seed, threads};
  return s;
}

}  // namespace

TEST(BuildApproxStep, AtomExample) {
  const double a = 3.0, b = 2.0;
  auto model = tmod::scalar_model(0.0);
  model.h0.constant(0, 0) = 1.0;
  tmod::add_identity_jumps(model, LevyMeasure::atoms({{0.1, a}, {1.0, b}}));
  const auto t = build_approx_step(model, 0.5);
  EXPECT_EQ(t.eps_cut, 0.5);
  EXPECT_NEAR(t.gaussian(0, 0) * t.gaussian(0, 0), 0.01 * a, 1e-14);
  EXPECT_NEAR(t.compensator(0, 0), b, 1e-14);
  // above every atom: no jump term, Lambda is the full L2 norm
  const auto all = build_approx_step(model, 2.0);
  EXPECT_NEAR(all.compensator(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(all.gaussian(0, 0) * all.gaussian(0, 0), 0.01 * a + b, 1e-13);
}

TEST(BuildApproxStep, RejectsGeneralJumps) {
  auto model = ts_model();
  model.general_jump = [](const EvalContext&, double z, int) { return v1(z); };
  expect_code(ErrorCode::NotFactorized, [&] { build_approx_step(model, 0.5); });
  expect_code(ErrorCode::NotFactorized, [&] { bound_proxy(model, 0.5, 2.0); });
}

TEST(RobustnessSweep, ValidatesEpsList) {
  expect_code(ErrorCode::InvalidArgument, [] { sweep_of({0.4, 0.01}, 10).validate(); });
  expect_code(ErrorCode::InvalidArgument, [] { sweep_of({0.2, 0.4}, 10).validate(); });
  expect_code(ErrorCode::InvalidArgument, [] { sweep_of({}, 10).validate(); });
  EXPECT_NO_THROW(sweep_of({0.8, 0.4}, 10).validate());
}

TEST(BoundProxy, NonincreasingAsEpsShrinks) {
  const auto model = ts_model();
  double previous = bound_proxy(model, 2.0, 2.0);
  for (double eps = 1.0; eps > 1e-3; eps *= 0.7) {
    const double b = bound_proxy(model, eps, 2.0);
    EXPECT_LE(b, previous * (1 + 1e-9));
    previous = b;
  }
  // p = 2: both norms equal int_{|z|<eps} z^2 nu = 2 gamma(1.5, eps)
  EXPECT_NEAR(bound_proxy(model, 0.5, 2.0), 4.0 * boost::math::tgamma_lower(1.5, 0.5), 1e-8);
}

TEST(CoupledSweep, NoJumpFactorMeansNoError) {
  const Bench s;
  const auto model = ts_model(0.0);
  const auto report = coupled_sweep(model, s.eta.view(), s.grid, sweep_of({0.8, 0.4, 0.2}, 50));
  for (const auto& pt : report.points) EXPECT_EQ(pt.error_est, 0.0);
}

TEST(CoupledSweep, DegenerateWhenLambdaVanishesBelowEps) {
  const Bench s;
  auto model = ts_model();
  model.nu = {LevyMeasure::atoms({{1.0, 2.0}, {-1.0, 1.0}})};
  const auto report = coupled_sweep(model, s.eta.view(), s.grid, sweep_of({0.8, 0.5}, 100));
  for (const auto& pt : report.points) {
    EXPECT_TRUE(pt.degenerate);
    EXPECT_EQ(pt.error_est, 0.0);
  }
  EXPECT_FALSE(report.fitted);
  std::ostringstream out;
  write_sweep_summary(out, report);
  EXPECT_NE(out.str().find("degenerate_eps: [8.0000000000000004e-01, 5"), std::string::npos);
}

TEST(CoupledSweep, SlopeNearOne) {
  const Bench s;
  const auto report = coupled_sweep(ts_model(), s.eta.view(), s.grid, sweep_of({0.8, 0.4, 0.2, 0.1}, 2000, 9));
  ASSERT_TRUE(report.fitted);
  EXPECT_GE(report.slope, 0.7);
  EXPECT_LE(report.slope, 1.3);
  EXPECT_TRUE(decreasing_within_noise(report));
  EXPECT_TRUE(std::isfinite(report.max_ratio));
  EXPECT_GT(report.reference_bound, 0.0);
  EXPECT_LT(report.reference_bound, report.points.back().bound_proxy);
}

TEST(CoupledSweep, DeterministicAcrossThreads) {
  const Bench s;
  const auto a = coupled_sweep(ts_model(), s.eta.view(), s.grid, sweep_of({0.8, 0.2}, 200, 5, 1));
  const auto b = coupled_sweep(ts_model(), s.eta.view(), s.grid, sweep_of({0.8, 0.2}, 200, 5, 3));
  std::ostringstream ca, cb;
  write_sweep_csv(ca, a);
  write_sweep_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ca.str().substr(0, ca.str().find('\n')), "eps,bound_proxy,error_est,stderr,n_paths");
}

TEST(CoupledSweep, TooManyFailures) {
  const Bench s;
  auto model = ts_model();
  model.f.add(tmod::scalar(50.0), tmod::present(0, Feature::Transform::Exp));
  expect_code(ErrorCode::TooManyFailures, [&] { coupled_sweep(model, s.eta.view(), s.grid, sweep_of({0.5}, 20)); });
}

TEST(GeneralLambdaSweep, OverrideScalesContamination) {
  const Bench s;
  const auto model = ts_model();
  const auto sweep = sweep_of({0.8, 0.4, 0.2}, 300, 4);
  const auto zero = general_lambda_sweep(model, s.eta.view(), s.grid, sweep,
                                         [](double) { return Eigen::MatrixXd::Zero(1, 1); });
  const auto once = general_lambda_sweep(model, s.eta.view(), s.grid, sweep, [&](double eps) {
    return sigma_eps(model.scaling, model.nu, eps);
  });
  const auto twice = general_lambda_sweep(model, s.eta.view(), s.grid, sweep, [&](double eps) {
    return Eigen::MatrixXd(2.0 * sigma_eps(model.scaling, model.nu, eps));
  });
  for (std::size_t i = 0; i < sweep.eps_list.size(); ++i) {
    const double eps = sweep.eps_list[i];
    EXPECT_NEAR(zero.points[i].bound_proxy, bound_proxy(model, eps, 2.0), 1e-12);
    const double lam = sigma_eps(model.scaling, model.nu, eps)(0, 0);
    EXPECT_NEAR(twice.points[i].bound_proxy - once.points[i].bound_proxy, 3.0 * lam * lam, 1e-10);
    EXPECT_GT(twice.points[i].error_est, once.points[i].error_est);
  }
}

TEST(GeneralLambdaSweep, EpsOverrideSlope) {
  const Bench s;
  const auto report = general_lambda_sweep(ts_model(), s.eta.view(), s.grid, sweep_of({0.8, 0.4, 0.2, 0.1}, 2000, 12),
                                           [](double eps) { return Eigen::MatrixXd::Constant(1, 1, eps); });
  ASSERT_TRUE(report.fitted);
  EXPECT_GE(report.slope, 0.7);
  EXPECT_LE(report.slope, 1.3);
}

TEST(VariancePreservation, SingleAtom) {
  const auto scaling = JumpScaling::uniform(1, 1, [](double z) { return z; });
  const std::vector<LevyMeasure> nu{LevyMeasure::atoms({{1.0, 1.0}})};
  const auto r = variance_preservation_check(scaling, nu, 2.0, 0.0, 1.0, 100000, 3);
  EXPECT_NEAR(r.entries[0].predicted, 1.0, 1e-12);
  EXPECT_TRUE(r.pass()) << r.entries[0].sample_variance;
}

TEST(VariancePreservation, EmptyShellHasZeroVariance) {
  const auto scaling = JumpScaling::uniform(1, 1, [](double z) { return z; });
  const std::vector<LevyMeasure> nu{LevyMeasure::atoms({{1.0, 1.0}})};
  const auto r = variance_preservation_check(scaling, nu, 0.5, 0.0, 1.0, 1000, 3);
  EXPECT_EQ(r.entries[0].sample_variance, 0.0);
  EXPECT_EQ(r.entries[0].predicted, 0.0);
  EXPECT_TRUE(r.pass());
}

TEST(VariancePreservation, TemperedStableShell) {
  const auto scaling = JumpScaling::uniform(1, 1, [](double z) { return z; });
  const std::vector<LevyMeasure> nu{LevyMeasure::tempered_stable(0.5, 1.0, 1.0)};
  const auto r = variance_preservation_check(scaling, nu, 0.5, 0.01, 1.0, 100000, 8, 2);
  EXPECT_NEAR(r.entries[0].predicted, 2.0 * boost::math::tgamma_lower(1.5, 0.5), 1e-8);
  EXPECT_TRUE(r.pass()) << r.entries[0].sample_variance << " in [" << r.entries[0].ci_low << ", "
                        << r.entries[0].ci_high << "]";
}
