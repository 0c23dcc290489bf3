#include <benchmark/benchmark.h>

#include "sfdde/calculus.hpp"
#include "sfdde/feynman_kac.hpp"
#include "sfdde/robustness.hpp"

using namespace sfdde;

namespace {

Eigen::MatrixXd scalar(double a) { return Eigen::MatrixXd::Constant(1, 1, a); }

SfddeModel ts_model() {
  SfddeModel model;
  model.d = model.m = model.n = model.k = 1;
  model.delay = 0.5;
  model.kernels = {Discrete{-0.5}};
  model.f = AffineForm::zero(1, 1);
  model.f.add(scalar(-0.5), {Feature::Source::Kernel, 0, 0, Feature::Transform::Identity});
  model.g = AffineForm::zero(1, 1);
  model.g.add(scalar(0.3), {Feature::Source::Present, 0, 0, Feature::Transform::Identity});
  model.h0 = AffineForm::zero(1, 1);
  model.h0.add(scalar(0.5), {Feature::Source::Present, 0, 0, Feature::Transform::Identity});
  model.nu = {LevyMeasure::tempered_stable(0.5, 1.0, 1.0)};
  model.scaling = JumpScaling::uniform(1, 1, [](double z) { return z; });
  return model;
}

}  // namespace

static void BM_SigmaEps(benchmark::State& state) {
  const std::vector<LevyMeasure> nu{LevyMeasure::tempered_stable(0.5, 1.0, 1.0)};
  const auto scaling = JumpScaling::uniform(1, 1, [](double z) { return z; });
  for (auto _ : state) benchmark::DoNotOptimize(sigma_eps(scaling, nu, 0.1));
}
BENCHMARK(BM_SigmaEps);

static void BM_JumpSamplerBuild(benchmark::State& state) {
  const auto nu = LevyMeasure::tempered_stable(0.5, 1.0, 1.0);
  for (auto _ : state) {
    JumpSampler sampler(nu, 0.01);
    benchmark::DoNotOptimize(sampler.rate());
  }
}
BENCHMARK(BM_JumpSamplerBuild)->Unit(benchmark::kMillisecond);

static void BM_NoiseRecord(benchmark::State& state) {
  const auto model = ts_model();
  const double dt = 1.0 / static_cast<double>(state.range(0));
  const NoiseGenerator gen(model, 1.0, dt, 0.01);
  std::uint64_t path = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gen.generate(1, path++));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NoiseRecord)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_EulerSolve(benchmark::State& state) {
  const auto model = ts_model();
  const double dt = 1.0 / static_cast<double>(state.range(0));
  const NoiseGenerator gen(model, 1.0, dt, 0.01);
  const auto record = gen.generate(1, 0);
  const auto treatment = reference_treatment(model, 0.01);
  const auto eta = SegmentBuffer::constant(Eigen::VectorXd::Ones(1), 0.5, dt);
  const TimeGrid grid(0.5, 1.0, dt);
  SolveOptions options;
  options.record_jumps = false;
  for (auto _ : state) benchmark::DoNotOptimize(euler_solve(model, eta.view(), grid, record, treatment, options));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EulerSolve)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_PicardSolve(benchmark::State& state) {
  const auto model = ts_model();
  const NoiseGenerator gen(model, 1.0, 0.01, 0.01);
  const auto record = gen.generate(1, 0);
  const auto eta = SegmentBuffer::constant(Eigen::VectorXd::Ones(1), 0.5, 0.01);
  const auto treatment = reference_treatment(model, 0.01);
  for (auto _ : state) {
    benchmark::DoNotOptimize(picard_solve(model, eta.view(), TimeGrid(0.5, 1.0, 0.01), record, treatment,
                                          static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_PicardSolve)->Arg(4)->Arg(10);

static void BM_CoupledSweep(benchmark::State& state) {
  const auto model = ts_model();
  const auto eta = SegmentBuffer::constant(Eigen::VectorXd::Ones(1), 0.5, 0.01);
  RobustnessSweep sweep;
  sweep.eps_list = {0.8, 0.4, 0.2, 0.1};
  sweep.setup = {static_cast<std::size_t>(state.range(0)), 1, 1};
  for (auto _ : state) benchmark::DoNotOptimize(coupled_sweep(model, eta.view(), TimeGrid(0.5, 1.0, 0.01), sweep));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CoupledSweep)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_ItoResidual(benchmark::State& state) {
  const auto model = ts_model();
  const NoiseGenerator gen(model, 1.0, 0.001, 0.01);
  const auto eta = SegmentBuffer::constant(Eigen::VectorXd::Ones(1), 0.5, 0.001);
  SolveOptions options;
  options.cache_coefficients = true;
  const auto report = euler_solve(model, eta.view(), TimeGrid(0.5, 1.0, 0.001), gen.generate(1, 0),
                                  reference_treatment(model, 0.01), options);
  const auto F = TestFunctional::quadratic(Eigen::VectorXd::Ones(1));
  for (auto _ : state) benchmark::DoNotOptimize(ito_residual(F, report, model, 1.0));
}
BENCHMARK(BM_ItoResidual)->Unit(benchmark::kMillisecond);

static void BM_FkEstimate(benchmark::State& state) {
  const auto model = ts_model();
  const auto eta = SegmentBuffer::constant(Eigen::VectorXd::Ones(1), 0.5, 0.01);
  const auto payoff = TerminalPayoff::quadratic(Eigen::VectorXd::Ones(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fk_estimate(model, payoff, 0.0, eta.view(), 1.0, 0.01,
                                         {static_cast<std::size_t>(state.range(0)), 1, 1}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FkEstimate)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
