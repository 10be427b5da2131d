/*
 * Microbenchmarks of the kernels the solver spends its time in: decay
 * norms, operator composition, coefficient multiplication, composition
 * operators, the blockwise homological solve, and one full regularization
 * pass. Sizes bracket the working boxes of the desk-scale driver.
 */

#include "benchmark/benchmark.h"

#include "qpnls/kam.hpp"
#include "qpnls/regularization.hpp"
#include "qpnls/torus_function.hpp"

#include <cmath>

using namespace qpnls;

namespace {

BlockOperator sample_operator(int J, int L, double decay) {
  Rng rng(91);
  return random_operator(rng, 1, J, L, decay);
}

TorusFunction sample_function(int N, double decay, int ncomp = 1) {
  Rng rng(92);
  return random_function(rng, 1, N, decay, ncomp);
}

void BM_DecayNorm(benchmark::State& state) {
  const int J = int(state.range(0));
  const BlockOperator A = sample_operator(J, 6, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(decay_norm(A, 1.5));
  state.SetComplexityN(J);
}
BENCHMARK(BM_DecayNorm)->Arg(8)->Arg(16)->Arg(32)->Complexity();

void BM_SobolevNorm(benchmark::State& state) {
  const int N = int(state.range(0));
  const TorusFunction u = sample_function(N, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(sobolev_norm(u, 1.5));
}
BENCHMARK(BM_SobolevNorm)->Arg(8)->Arg(32)->Arg(128);

void BM_Multiply(benchmark::State& state) {
  const int N = int(state.range(0));
  const TorusFunction u = sample_function(N, 2.0);
  const TorusFunction v = sample_function(N, 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(multiply(u, v));
  state.SetComplexityN(N);
}
BENCHMARK(BM_Multiply)->Arg(8)->Arg(16)->Arg(32)->Complexity();

void BM_Compose(benchmark::State& state) {
  const int J = int(state.range(0));
  const BlockOperator A = sample_operator(J, 6, 2.0);
  const BlockOperator B = sample_operator(J, 6, 2.5);
  for (auto _ : state) benchmark::DoNotOptimize(compose(A, B));
  state.SetComplexityN(J);
}
BENCHMARK(BM_Compose)->Arg(4)->Arg(8)->Arg(16)->Complexity();

void BM_OperatorApply(benchmark::State& state) {
  const int J = int(state.range(0));
  const BlockOperator A = sample_operator(J, 6, 2.0);
  const TorusFunction u = sample_function(J, 2.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(apply(A, u));
}
BENCHMARK(BM_OperatorApply)->Arg(8)->Arg(16)->Arg(32);

void BM_HomologicalSolve(benchmark::State& state) {
  const int J = int(state.range(0));
  const NormalForm nf = initial_normal_form(1, J, 1.0, cd(0.0, -0.002),
                                            4.0 / 3.0);
  BlockOperator R = sample_operator(J, 6, 2.5);
  R *= 1e-3;
  const std::array<double, 3> w{0.875, 0.0, 0.0};
  const double jsplit = default_jsplit(w, 1, 1e-3, 2.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        solve_homological(nf, R, 4, w, 0.0316, 3.0, jsplit));
  state.SetComplexityN(J);
}
BENCHMARK(BM_HomologicalSolve)->Arg(8)->Arg(16)->Complexity();

void BM_RegularizationPass(benchmark::State& state) {
  ModelParams mp;
  mp.d = 1;
  mp.m = 4.0 / 3.0;
  mp.epsilon = 1e-3;
  mp.plugin = "builtin_mixed";
  const auto nl = make_nonlinearity(mp.plugin);
  const TorusFunction u(1, 8, 1, Reality::complex_valued);
  const std::array<double, 3> w{0.875, 0.0, 0.0};
  RegularizationOptions opt;
  opt.Nf = 12;
  opt.J = 8;
  opt.L = 6;
  opt.symplectic_samples = 0;
  opt.residual_checks = state.range(0) != 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(regularize(mp, *nl, w, u, opt));
}
BENCHMARK(BM_RegularizationPass)
    ->Arg(0)
    ->Arg(1)
    ->Unit(benchmark::kMillisecond)
    ->MinTime(2.0);

void BM_Reduce(benchmark::State& state) {
  ModelParams mp;
  mp.d = 1;
  mp.m = 4.0 / 3.0;
  mp.epsilon = 1e-3;
  mp.plugin = "builtin_mixed";
  const auto nl = make_nonlinearity(mp.plugin);
  const TorusFunction u(1, 8, 1, Reality::complex_valued);
  const std::array<double, 3> w{0.875, 0.0, 0.0};
  RegularizationOptions opt;
  opt.Nf = 12;
  opt.J = 8;
  opt.L = 6;
  opt.symplectic_samples = 0;
  const RegularizationResult R = regularize(mp, *nl, w, u, opt);
  KamSchedule sch;
  sch.N0 = 4;
  sch.chi = 1.5;
  sch.tau = 3.0;
  sch.gamma = std::sqrt(mp.epsilon);
  sch.eps = mp.epsilon;
  sch.abs_e = 2.0;
  sch.max_iters = 8;
  sch.stop_tol = 1e-12;
  const NormalForm nf0 = initial_normal_form(1, opt.J, R.m2, R.m1, R.m0);
  for (auto _ : state)
    benchmark::DoNotOptimize(reduce(R.L7, nf0, w, sch));
  state.SetLabel("full quadratic reduction at the driver fixture");
}
BENCHMARK(BM_Reduce)->Unit(benchmark::kMillisecond)->MinTime(2.0);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
