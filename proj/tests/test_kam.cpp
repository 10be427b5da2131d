#include "doctest.h"

#include "qpnls/kam.hpp"
#include "qpnls/model.hpp"
#include "qpnls/regularization.hpp"
#include "qpnls/transformation.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>

using namespace qpnls;

namespace {

/* The reduction fixture shared by the heavier cases: the fully regularized
 * operator of a mixed-coefficient model on a section where the iteration
 * has room to contract several times. The mass 4/3 keeps the constant
 * symbol -j^2 + m away from zero on every pair, and 0.89 sits inside a
 * frequency window where all block divisors clear their floors with margin
 * (both facts fail for nearby round values: see the resonance cases below). */
struct Setup {
  ModelParams mp;
  std::unique_ptr<Nonlinearity> nl;
  std::array<double, 3> omega{0.89, 0.0, 0.0};
  TorusFunction state;
  RegularizationOptions opt;
  RegularizationResult R;
  NormalForm nf0;
  KamSchedule sch;
  KamResult red;
};

const Setup& reduced() {
  static Setup s = [] {
    Setup t;
    t.mp.epsilon = 1e-3;
    t.mp.m = 4.0 / 3.0;
    t.nl = make_nonlinearity("builtin_mixed");
    Rng rng(311);
    t.state = random_function(rng, 1, 2, 1.5);
    t.state *= cd(0.35, 0.0);
    t.opt.Nf = 12;
    t.opt.J = 8;
    t.opt.L = 6;
    t.opt.symplectic_samples = 0;
    t.R = regularize(t.mp, *t.nl, t.omega, t.state, t.opt);
    t.nf0 = initial_normal_form(1, t.opt.J, t.R.m2, t.R.m1, t.R.m0);
    t.sch.N0 = 4;
    t.sch.chi = 1.5;
    t.sch.tau = 3.0;
    t.sch.gamma = std::sqrt(t.mp.epsilon);
    t.sch.s0 = 1.5;
    t.sch.max_iters = 8;
    t.sch.stop_tol = 1e-12;
    t.sch.eps = t.mp.epsilon;
    t.sch.abs_e = std::abs(forcing_average(*t.nl, 1));
    t.red = reduce(t.R.L7, t.nf0, t.omega, t.sch);
    return t;
  }();
  return s;
}

}  // namespace

TEST_SUITE("kam") {

TEST_CASE("pair-block eigenvalues and splitting follow the closed form") {
  NormalForm nf = initial_normal_form(1, 4, 1.0, cd(0.0, 0.1), 1.0);

  /* block at jbar = 2, first component: i diag(-4 + 1 - 0.2, -4 + 1 + 0.2) */
  auto eg = eigenvalues_of_block(nf, 1, 2);
  CHECK(std::abs(eg.mu_plus - cd(0.0, -2.8)) < 1e-14);
  CHECK(std::abs(eg.mu_minus - cd(0.0, -3.2)) < 1e-14);
  CHECK(eg.branch_gap < 1e-14);
  CHECK(pair_splitting(nf, 2) == doctest::Approx(0.2).epsilon(1e-13));

  /* second component mirrors the spectrum with the opposite sign */
  auto eg2 = eigenvalues_of_block(nf, -1, 2);
  CHECK(std::abs(eg2.mu_plus - cd(0.0, 2.8)) < 1e-14);
  CHECK(std::abs(eg2.mu_minus - cd(0.0, 3.2)) < 1e-14);

  /* an off-diagonal correction enters the splitting quadratically */
  nf.at(2).r_pm = cd(0.3, 0.4); /* |r_pm| = 0.5 */
  const double want = std::sqrt(0.2 * 0.2 + 4.0 * 0.25 / 4.0);
  CHECK(pair_splitting(nf, 2) == doctest::Approx(want).epsilon(1e-13));
  auto eg3 = eigenvalues_of_block(nf, 1, 2);
  CHECK(std::abs(eg3.mu_plus - (cd(0.0, -3.0) + cd(0.0, want))) < 1e-13);
  CHECK(eg3.branch_gap < 1e-13);

  /* hermitian core keeps every eigenvalue on the imaginary axis */
  CHECK(eigenvalue_reality_defect(nf) < 1e-14);
}

TEST_CASE("assembled diagonal satisfies the entry symmetries exactly") {
  Rng rng(131);
  NormalForm nf = initial_normal_form(1, 5, 0.97, cd(0.0, -0.04), 1.31);
  for (int jb = 0; jb <= 5; ++jb) {
    nf.at(jb).r_pp = rng.uniform(-0.01, 0.01);
    nf.at(jb).r_mm = rng.uniform(-0.01, 0.01);
    if (jb > 0) nf.at(jb).r_pm = rng.complex_ball(0.01);
  }
  BlockOperator D = assemble_diagonal(nf, 3);
  CHECK(hamiltonian_defect(D) < 1e-15);
  CHECK(realness_defect(D) < 1e-15);

  /* entries live only at offset zero, within pairs */
  CHECK(decay_norm(D, 0.0) > 0.0);
  for (const auto l : {std::array<int, 3>{1, 0, 0}, std::array<int, 3>{-2, 0, 0}})
    CHECK(D.block(l).norm() == 0.0);
  CHECK(std::abs(D.entry(0, 2, 0, 3, {0, 0, 0})) == 0.0);

  /* template: D_{+,j}^{+,j} = i(-m2 j^2 + m0 - Im(m1) j + r_pp) */
  const cd want = cd(0, 1) * cd(-0.97 * 9 + 1.31 - (-0.04) * 3 + nf.at(3).r_pp, 0);
  CHECK(std::abs(D.entry(0, 3, 0, 3, {0, 0, 0}) - want) < 1e-15);
  CHECK(std::abs(D.entry(0, 3, 0, -3, {0, 0, 0}) - cd(0, 1) * nf.at(3).r_pm) < 1e-15);
}

TEST_CASE("diagonalizing a pair block leaves a diagonal residual only") {
  Rng rng(137);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXcd C(2, 2);
    C(0, 0) = cd(rng.uniform(-3.0, 3.0), 0.0);
    C(1, 1) = cd(rng.uniform(-3.0, 3.0), 0.0);
    C(0, 1) = rng.complex_ball(1.0);
    C(1, 0) = std::conj(C(0, 1));
    Eigen::MatrixXcd M = cd(0, 1) * C;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, false);
    cd mu0 = es.eigenvalues()(0), mu1 = es.eigenvalues()(1);
    Eigen::MatrixXcd U = diagonalizing_matrix(M, mu0, mu1);
    Eigen::MatrixXcd G = U.fullPivLu().solve(M * U);
    CHECK(std::abs(G(0, 1)) < 1e-12 * (1.0 + M.norm()));
    CHECK(std::abs(G(1, 0)) < 1e-12 * (1.0 + M.norm()));
    CHECK(std::abs(G(0, 0) - mu0) < 1e-12 * (1.0 + M.norm()));
    CHECK(std::abs(G(1, 1) - mu1) < 1e-12 * (1.0 + M.norm()));
  }

  /* a diagonal block with ordered eigenvalues is left alone */
  Eigen::MatrixXcd Dm = Eigen::MatrixXcd::Zero(2, 2);
  Dm(0, 0) = cd(0, -2.0);
  Dm(1, 1) = cd(0, 3.0);
  Eigen::MatrixXcd U = diagonalizing_matrix(Dm, Dm(0, 0), Dm(1, 1));
  CHECK((U - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("cutoff schedule grows geometrically in the exponent and clamps") {
  KamSchedule sch;
  sch.N0 = 8;
  sch.chi = 1.5;
  CHECK(schedule_N(sch, -1) == 1);
  CHECK(schedule_N(sch, 0) == 8);
  CHECK(schedule_N(sch, 1) == 22);    /* floor(8^1.5) */
  CHECK(schedule_N(sch, 2) == 107);   /* floor(8^2.25) */
  CHECK(schedule_N(sch, 40) == (1 << 30)); /* clamped, no overflow */
}

TEST_CASE("a vanishing remainder solves to a vanishing generator") {
  NormalForm nf = initial_normal_form(1, 4, 1.0, cd(0.0, -0.002), 4.0 / 3.0);
  BlockOperator R(1, 4, 3);
  auto sol = solve_homological(nf, R, 3, {0.89, 0, 0}, 0.06, 3.0, 50.0);
  CHECK(decay_norm(sol.psi, 1.5) == 0.0);
  CHECK(sol.residual < 1e-15);
}

TEST_CASE("the homological solve certifies its own commutator identity") {
  Rng rng(139);
  NormalForm nf = initial_normal_form(1, 5, 0.9988, cd(0.0, -0.0018), 1.3348);
  BlockOperator R = structure_project(random_operator(rng, 1, 5, 3, 1.5, 1e-3));
  auto sol = solve_homological(nf, R, 3, {0.89, 0, 0}, 2.0 * 0.0316, 3.0, 60.0);

  /* bracket reproduces the solved part of R to rounding error */
  CHECK(sol.residual < 1e-12);
  CHECK(sol.floor_margin > 1.0);

  /* the generator vanishes identically on the kernel entries */
  for (int si = 0; si < 2; ++si)
    for (int jb = 0; jb <= 5; ++jb)
      for (int a : {jb, -jb})
        for (int b : {jb, -jb})
          CHECK(std::abs(sol.psi.entry(si, a, si, b, {0, 0, 0})) == 0.0);

  /* structured input gives a structured generator */
  CHECK(hamiltonian_defect(sol.psi) < 1e-12);
  CHECK(realness_defect(sol.psi) < 1e-12);
}

TEST_CASE("a resonant mass is rejected at the zero offset for every frequency") {
  /* with m = 1 the pair jbar = 1 sits on the resonance -j^2 + m = 0: the
   * cross-component divisor |mu_{+,1} - mu_{-,1}| is of the size of the
   * coefficient corrections, far below the gamma-floor, independently of
   * omega. The first-order corrections used here are the measured ones. */
  NormalForm nf = initial_normal_form(1, 4, 1.0 - 1.2e-3, cd(0.0, -1.8e-3), 1.0 + 1.5e-3);
  Rng rng(149);
  BlockOperator R = structure_project(random_operator(rng, 1, 4, 2, 1.5, 1e-3));
  for (double w : {0.53, 0.89, 1.27}) {
    CHECK_THROWS_AS(
        (void)solve_homological(nf, R, 2, {w, 0, 0}, 2.0 * 0.0316, 3.0, 60.0),
        SmallDivisorError);
  }
  /* the same solve goes through once the mass moves off the resonance */
  NormalForm ok = initial_normal_form(1, 4, 1.0 - 1.2e-3, cd(0.0, -1.8e-3),
                                      4.0 / 3.0 + 1.5e-3);
  auto sol = solve_homological(ok, R, 2, {0.89, 0, 0}, 2.0 * 0.0316, 3.0, 60.0);
  CHECK(sol.residual < 1e-12);
}

TEST_CASE("schedule fit reports decay rate and data sufficiency") {
  KamSchedule sch;
  std::vector<KamIterate> h;
  for (int nu = 0; nu <= 3; ++nu) {
    KamIterate row;
    row.nu = nu;
    row.N = nu == 0 ? 1 : 4 << (2 * (nu - 1)); /* 1, 4, 16, 64 */
    row.R_s0 = 1e-2 * std::pow(double(row.N), -5.0);
    h.push_back(row);
  }
  auto rep = check_decay_schedule(h, sch, 4.0);
  CHECK(rep.sufficient_data);
  CHECK(rep.fitted_exponent == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(rep.superlinear);
  CHECK_FALSE(check_decay_schedule({h[0]}, sch, 4.0).sufficient_data);

  /* too-slow decay is reported, not hidden */
  for (auto& row : h) row.R_s0 = 1e-2 * std::pow(double(row.N), -1.0);
  auto slow = check_decay_schedule(h, sch, 4.0);
  CHECK(slow.sufficient_data);
  CHECK_FALSE(slow.superlinear);
}

TEST_CASE("an already-diagonal operator converges with no steps") {
  NormalForm nf = initial_normal_form(1, 6, 0.999, cd(0.0, -0.002), 4.0 / 3.0);
  BlockOperator D = assemble_diagonal(nf, 4);
  KamSchedule sch;
  sch.gamma = 0.03;
  sch.eps = 1e-3;
  auto res = reduce(D, nf, {0.89, 0, 0}, sch);
  CHECK(res.converged);
  CHECK(res.state.history.size() == 1);
  CHECK(res.state.history[0].R_s0 == 0.0);
  CHECK(res.state.chain.steps.empty());
}

TEST_CASE("one reduction step contracts the remainder quadratically") {
  const Setup& s = reduced();

  BlockOperator R0 = s.R.L7;
  R0 -= assemble_diagonal(s.nf0, s.R.L7.L);
  R0 = structure_project(R0);
  const double r0 = decay_norm(R0, s.sch.s0);

  KamState st;
  st.nu = 0;
  st.omega = s.omega;
  st.nf = s.nf0;
  st.R = R0;
  KamIterate row0;
  row0.R_s0 = r0;
  st.history.push_back(row0);

  KamState st1 = kam_step(st, s.sch);
  const KamIterate& row = st1.history.back();
  CHECK(row.R_s0 < 0.05 * r0);          /* far better than linear */
  CHECK(row.R_s0 < 2.0 * r0 * r0 / 1e-2); /* quadratic up to a modest constant */
  CHECK(row.homological_residual < 1e-12);
  CHECK(row.eigenvalue_drift <= row.drift_bound);
  CHECK(row.sigma_consistency < 1e-12);
  CHECK(row.max_re_mu < 1e-12);

  /* the recorded step is exp(-Psi); undoing it through the independent
   * conjugation routine reproduces the new operator */
  REQUIRE(st1.chain.steps.size() == 1);
  BlockOperator L0 = assemble_diagonal(s.nf0, s.R.L7.L);
  L0 += R0;
  BlockOperator K1 = exp_conjugate(L0, st1.chain.steps[0].generator, s.omega);
  BlockOperator K1b = assemble_diagonal(st1.nf, s.R.L7.L);
  K1b += st1.R;
  K1 -= K1b;
  CHECK(decay_norm(K1, 0.0) < 1e-10 * (1.0 + decay_norm(L0, 0.0)));

  /* each transformation of the chain is symplectic on random states */
  Rng rng(151);
  CHECK(check_symplectic(st1.chain, rng, 3, 1e-8).ok);
}

TEST_CASE("full reduction of the regularized operator converges superlinearly") {
  const Setup& s = reduced();
  const KamResult& red = s.red;

  REQUIRE(red.converged);
  REQUIRE(red.state.history.size() >= 4);
  CHECK(red.state.history.back().R_s0 <= s.sch.stop_tol);

  /* quadratic-regime contraction: once below 1e-3 every step obeys
   * |R_{nu+1}| <= |R_nu|^{1.5} */
  int contractions = 0;
  for (std::size_t i = 1; i < red.state.history.size(); ++i) {
    const double prev = red.state.history[i - 1].R_s0;
    const double cur = red.state.history[i].R_s0;
    CHECK(cur < prev);
    if (prev < 1e-3) {
      CHECK(cur <= std::pow(prev, 1.5));
      ++contractions;
    }
  }
  CHECK(contractions >= 2);

  /* the fitted cutoff exponent certifies the schedule */
  auto rep = check_decay_schedule(red.state.history, s.sch, s.sch.tau + 1.0);
  CHECK(rep.sufficient_data);
  CHECK(rep.superlinear);

  /* structure is preserved to rounding error along the whole iteration */
  for (const auto& row : red.state.history) {
    CHECK(row.hamiltonian_defect_R < 1e-12);
    CHECK(row.realness_defect_R < 1e-12);
    CHECK(row.homological_residual < 1e-12);
    CHECK(row.sigma_consistency < 1e-12);
    CHECK(row.eigenvalue_drift <= row.drift_bound + 1e-15);
  }

  /* limit eigenvalues are purely imaginary and the corrections decay */
  CHECK(eigenvalue_reality_defect(red.state.nf) < 1e-10);
  CHECK(red.decay_fit_constant < 10.0);

  /* conjugating the input through the recorded chain reproduces the
   * final diagonal plus the final remainder */
  BlockOperator K = assemble_diagonal(s.nf0, s.R.L7.L);
  {
    BlockOperator R0 = s.R.L7;
    R0 -= assemble_diagonal(s.nf0, s.R.L7.L);
    K += structure_project(R0);
  }
  const double scale = decay_norm(K, 0.0);
  for (const auto& step : red.state.chain.steps)
    K = exp_conjugate(K, step.generator, s.omega);
  BlockOperator want = assemble_diagonal(red.state.nf, s.R.L7.L);
  want += red.state.R;
  K -= want;
  CHECK(decay_norm(K, 0.0) < 1e-10 * (1.0 + scale));

  /* every recorded step is symplectic on random states */
  Rng rng(157);
  CHECK(check_symplectic(red.state.chain, rng, 2, 1e-8).ok);

  /* the projection that seeded the iteration was a small correction */
  CHECK(red.structure_projection < 0.5 * red.state.history[0].R_s0);
}

}  // TEST_SUITE kam
