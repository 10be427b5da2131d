#include "doctest.h"

#include "qpnls/model.hpp"

using namespace qpnls;

namespace {

double fdiff(const TorusFunction& a, const TorusFunction& b) {
  TorusFunction c = a;
  c -= b;
  return sobolev_norm(c, 0.0);
}

/* directional derivative of f at u along delta, from the reported partials */
TorusFunction chain_rule_direction(const NonlinearityEval& ev,
                                   const TorusFunction& delta, int Nout) {
  TorusFunction acc(delta.d, Nout, 1);
  TorusFunction dk = delta;
  for (int k = 0; k < 3; ++k) {
    acc += multiply(ev.fz[k], dk, Nout).value;
    acc += multiply(ev.fzbar[k], conj_function(dk), Nout).value;
    dk = derivative(dk, Deriv::x);
  }
  return acc;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("the forcing average at the origin is -2i for both nonlinearities") {
  for (const char* id : {"builtin", "builtin_mixed"}) {
    auto nl = make_nonlinearity(id);
    const cd e = forcing_average(*nl, 1);
    CHECK(std::abs(e - cd(0.0, -2.0)) < 1e-12);
    CHECK(std::abs(e) == doctest::Approx(2.0));
  }
}

TEST_CASE("the residual at the zero state is minus epsilon times the drive") {
  ModelParams mp;
  mp.epsilon = 1e-3;
  auto nl = make_nonlinearity("builtin");
  TorusFunction zero(1, 3, 1);
  auto F = residual_F(mp, *nl, {1.1, 0, 0}, zero);
  /* h = cos(phi_1) cos(x) has weight 1/4 on each of its four modes */
  for (int sl : {1, -1})
    for (int sj : {1, -1})
      CHECK(std::abs(F.get(0, {sl, 0, 0}, sj) - cd(-mp.epsilon / 4.0, 0.0)) < 1e-14);
  CHECK(sobolev_norm(F, 0.0) == doctest::Approx(mp.epsilon / 2.0).epsilon(1e-12));
}

TEST_CASE("reported partial derivatives match finite differences of f") {
  Rng rng(83);
  for (const char* id : {"builtin", "builtin_mixed"}) {
    auto nl = make_nonlinearity(id);
    auto u = random_function(rng, 1, 3, 1.5);
    u *= cd(0.3, 0.0);
    auto delta = random_function(rng, 1, 3, 1.5);
    const int Nout = 3 * u.N + 1; /* full degree: comparisons are exact */
    const double t = 1e-5;

    TorusFunction up = u, um = u;
    TorusFunction step = delta;
    step *= cd(t, 0.0);
    up += step;
    um -= step;
    TorusFunction fd = nl->eval(up, Nout).f;
    fd -= nl->eval(um, Nout).f;
    fd *= cd(1.0 / (2.0 * t), 0.0);

    const auto ev = nl->eval(u, Nout);
    auto lin = chain_rule_direction(ev, delta, Nout);
    CHECK(fdiff(fd, lin) < 1e-7);
  }
}

TEST_CASE("both nonlinearities satisfy the Hamiltonian pointwise conditions") {
  Rng rng(89);
  auto u = random_function(rng, 1, 3, 1.5);
  for (const char* id : {"builtin", "builtin_mixed"}) {
    auto nl = make_nonlinearity(id);
    const auto ev = nl->eval(u, 10);
    CHECK(hamiltonian_conditions_defect(ev) < 1e-11);
  }
  /* the defect detects a broken reality condition */
  auto nl = make_nonlinearity("builtin");
  auto ev = nl->eval(u, 10);
  ev.fz[2].at(0, {0, 0, 0}, 0) += cd(0.0, 0.05);
  CHECK(hamiltonian_conditions_defect(ev) > 0.04);
}

TEST_CASE("the mixed nonlinearity produces a nonzero cross second order") {
  Rng rng(97);
  auto u = random_function(rng, 1, 2, 1.5);
  auto plain = make_nonlinearity("builtin")->eval(u, 6);
  auto mixed = make_nonlinearity("builtin_mixed")->eval(u, 6);
  CHECK(sobolev_norm(plain.fzbar[2], 0.0) < 1e-14);
  CHECK(sobolev_norm(mixed.fzbar[2], 0.0) > 1e-3);
}

TEST_CASE("the linearized operator is Hamiltonian and real at any state") {
  Rng rng(101);
  ModelParams mp;
  mp.epsilon = 0.05;
  auto nl = make_nonlinearity("builtin_mixed");
  auto u = random_function(rng, 1, 2, 1.5);
  auto lin = linearized_operator(mp, *nl, {1.2, 0, 0}, u, 6, 4, 8);
  CHECK(hamiltonian_defect(lin.T) < 1e-11);
  CHECK(realness_defect(lin.T) < 1e-11);
  Rng rng2(7);
  CHECK(slice_symplectic_defect(lin.T, rng2) < 1e-9);
}

TEST_CASE("the linearized operator is the derivative of the residual") {
  Rng rng(103);
  ModelParams mp;
  mp.epsilon = 0.02;
  const std::array<double, 3> omega{1.17, 0, 0};
  for (const char* id : {"builtin", "builtin_mixed"}) {
    auto nl = make_nonlinearity(id);
    auto u = random_function(rng, 1, 3, 1.5);
    u *= cd(0.4, 0.0);
    auto delta = random_function(rng, 1, 3, 1.5);
    const double t = 1e-6;

    TorusFunction up = u, um = u;
    TorusFunction step = delta;
    step *= cd(t, 0.0);
    up += step;
    um -= step;
    TorusFunction fd = residual_F(mp, *nl, omega, up);
    fd -= residual_F(mp, *nl, omega, um);
    fd *= cd(-0.5 / t, 0.0) * cd(0.0, 1.0); /* -i dF */

    auto lin = linearized_operator(mp, *nl, omega, u, 3, 6, 10);
    auto lh = apply(lin, make_conjugate_pair(delta));
    CHECK(fdiff(lh.component(0), fd) < 1e-6);
  }
}

TEST_CASE("symplectic pairing of the first harmonic with its rotation") {
  auto u = TorusFunction::single_mode(1, 2, {0, 0, 0}, 1, cd(1.0, 0.0));
  auto v = TorusFunction::single_mode(1, 2, {0, 0, 0}, 1, cd(0.0, 1.0));
  CHECK(symplectic_form(u, v) == doctest::Approx(kTwoPi).epsilon(1e-14));
  /* the pairing is antisymmetric and vanishes on the diagonal */
  CHECK(symplectic_form(v, u) == doctest::Approx(-kTwoPi).epsilon(1e-14));
  CHECK(symplectic_form(u, u) == doctest::Approx(0.0));
}

}  // TEST_SUITE model
