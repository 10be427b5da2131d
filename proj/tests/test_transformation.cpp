#include "doctest.h"

#include "qpnls/transformation.hpp"
#include "qpnls/model.hpp"

#include <cmath>

using namespace qpnls;

namespace {

double fdiff(const TorusFunction& a, const TorusFunction& b) {
  TorusFunction c = a;
  c -= b;
  return sobolev_norm(c, 0.0);
}

TorusFunction real_random(Rng& rng, int d, int N, double decay, double amp) {
  TorusFunction f = random_function(rng, d, N, decay, 1, amp);
  f.tag = Reality::real_valued;
  symmetrize_reality(f);
  return f;
}

/* diag(e^{i psi}, e^{-i psi}) entries as band-limited functions: psi is a
 * small real trigonometric polynomial, the exponential is sampled on a fine
 * grid and refit on a wide box so the truncation tail is negligible. */
TorusFunction unit_phase_entry(const TorusFunction& psi, int Nbig) {
  TorusFunction ipsi = embed(psi, Nbig);
  ipsi *= cd(0.0, 1.0);
  GridProjection p = pointwise_map(ipsi, [](cd z) { return std::exp(z); });
  REQUIRE(p.tail < 1e-9);
  return p.value;
}

TorusFunction pair_state(Rng& rng, int d, int N, double decay) {
  TorusFunction up = random_function(rng, d, N, decay);
  return make_conjugate_pair(up);
}

} // namespace

TEST_SUITE("transformation") {

TEST_CASE("constant symplectic 2x2 multiplication preserves the pairing exactly") {
  Rng rng(901);
  const double r = 0.37;
  TorusFunction alpha = TorusFunction::single_mode(1, 2, {0, 0, 0}, 0, std::cosh(r));
  TorusFunction beta = TorusFunction::single_mode(1, 2, {0, 0, 0}, 0,
                                                  std::sinh(r) * std::exp(cd(0.0, 0.8)));
  Transformation t = make_matrix_transform(alpha, beta);
  CHECK(t.inverse_tail < 1e-14);

  TorusFunction u = pair_state(rng, 1, 4, 1.0);
  TorusFunction v = pair_state(rng, 1, 4, 1.0);
  TorusFunction tu = forward(t, u), tv = forward(t, v);

  CHECK(reality_defect(tu) < 1e-12);
  const std::array<double, 3> phi{0.9, 0.0, 0.0};
  CHECK(symplectic_form(tu.component(0), tv.component(0), phi) ==
        doctest::Approx(symplectic_form(u.component(0), v.component(0), phi))
            .epsilon(1e-12));

  CHECK(fdiff(inverse(t, tu), u) < 1e-12);
}

TEST_CASE("phase-rotation multiplier diag(e^{i psi}, e^{-i psi})") {
  /* The rescaling steps of the reduction use exactly this shape: a unit
   * modulus multiplier with phase depending on (phi, x).  The pointwise
   * determinant is identically one, so the pairing is preserved slice-wise
   * and the inverse is the opposite phase. */
  Rng rng(902);
  TorusFunction psi = real_random(rng, 1, 2, 1.0, 0.25);
  TorusFunction alpha = unit_phase_entry(psi, 16);
  TorusFunction beta = TorusFunction::zero(1, 16, 1, Reality::complex_valued);
  Transformation t = make_matrix_transform(alpha, beta);
  CHECK(t.inverse_tail < 1e-9);

  /* interior support: the multiplier spreads modes by its own bandwidth */
  TorusFunction u = make_conjugate_pair(embed(random_function(rng, 1, 8, 1.5), 24));
  TorusFunction v = make_conjugate_pair(embed(random_function(rng, 1, 8, 1.5), 24));
  TorusFunction tu = forward(t, u), tv = forward(t, v);

  CHECK(reality_defect(tu) < 1e-10);
  for (double x1 : {0.0, 2.1}) {
    const std::array<double, 3> phi{x1, 0.0, 0.0};
    CHECK(symplectic_form(tu.component(0), tv.component(0), phi) ==
          doctest::Approx(symplectic_form(u.component(0), v.component(0), phi))
              .epsilon(1e-8));
  }
  CHECK(fdiff(inverse(t, tu), u) < 1e-8);
}

TEST_CASE("matrix transform reports the inverse truncation honestly") {
  Rng rng(903);
  TorusFunction alpha = TorusFunction::single_mode(1, 3, {0, 0, 0}, 0, 1.0);
  alpha += cd(0.12, 0.0) * real_random(rng, 1, 3, 1.0, 1.0);
  TorusFunction beta = cd(0.1, 0.0) * random_function(rng, 1, 3, 1.0);
  Transformation t = make_matrix_transform(alpha, beta);
  CHECK(t.inverse_tail > 0.0);

  TorusFunction u = pair_state(rng, 1, 12, 1.5);
  const double err = fdiff(inverse(t, forward(t, u)), u);
  /* The pointwise inverse is exact; the only error is the recorded spectral
   * tail of its band-limited refit (times a modest constant for the state
   * norm and the forward factor). */
  CHECK(err <= 50.0 * t.inverse_tail * (1.0 + sobolev_norm(u, 0.0)) + 1e-12);
}

TEST_CASE("matrix transform rejects a vanishing determinant") {
  TorusFunction alpha = TorusFunction::single_mode(1, 1, {0, 0, 0}, 0, 1.0);
  TorusFunction beta = TorusFunction::single_mode(1, 1, {0, 0, 0}, 0, 0.99);
  CHECK_THROWS_AS((void)make_matrix_transform(alpha, beta, 0.1),
                  const UsageError&);
}

TEST_CASE("space diffeomorphism with Jacobian root preserves the pairing") {
  Rng rng(904);
  /* the compositional inverse of a band-limited shift is analytic but not
   * band-limited, so the shift is embedded in a wide box before inversion */
  TorusFunction xi = embed(real_random(rng, 1, 1, 1.0, 0.05), 12);
  Transformation t = make_space_transform(xi, true);
  CHECK(t.inverse_defect < 1e-10);

  TorusFunction u = make_conjugate_pair(embed(random_function(rng, 1, 3, 1.0), 20));
  TorusFunction v = make_conjugate_pair(embed(random_function(rng, 1, 3, 1.0), 20));
  TorusFunction tu = forward(t, u), tv = forward(t, v);
  CHECK(reality_defect(tu) < 1e-10);

  for (double x1 : {0.4, 3.3}) {
    const std::array<double, 3> phi{x1, 0.0, 0.0};
    CHECK(symplectic_form(tu.component(0), tv.component(0), phi) ==
          doctest::Approx(symplectic_form(u.component(0), v.component(0), phi))
              .epsilon(1e-8));
  }
  CHECK(fdiff(inverse(t, tu), u) < 1e-7);

  /* Without the square-root factor the same map distorts the pairing at
   * first order in xi. */
  Transformation plain = make_space_transform(xi, false);
  TorusFunction pu = forward(plain, u), pv = forward(plain, v);
  const std::array<double, 3> phi{0.4, 0.0, 0.0};
  const double drift = std::abs(symplectic_form(pu.component(0), pv.component(0), phi) -
                                symplectic_form(u.component(0), v.component(0), phi));
  CHECK(drift > 1e-3);
}

TEST_CASE("time reparametrization carries the pairing to the shifted phase") {
  Rng rng(905);
  const std::array<double, 3> omega{1.234, 0.0, 0.0};
  TorusFunction a = real_random(rng, 1, 2, 1.0, 0.04);
  for (int j = -a.N; j <= a.N; ++j)
    for (int idx = 0; idx < a.tbox().count(); ++idx)
      if (j != 0) a.at(0, a.tbox().unflatten(idx), j) = cd(0.0, 0.0);
  a = embed(a, 14);
  Transformation t = make_time_transform(a, omega);
  CHECK(t.inverse_defect < 1e-10);

  TorusFunction u = make_conjugate_pair(embed(random_function(rng, 1, 3, 1.0), 16));
  TorusFunction v = make_conjugate_pair(embed(random_function(rng, 1, 3, 1.0), 16));
  TorusFunction tu = forward(t, u), tv = forward(t, v);
  CHECK(reality_defect(tu) < 1e-10);

  const std::array<double, 3> phi{0.7, 0.0, 0.0};
  const double shift = std::real(eval_at(a, 0, phi, 0.0));
  const std::array<double, 3> phi2{phi[0] + omega[0] * shift, 0.0, 0.0};
  CHECK(symplectic_form(tu.component(0), tv.component(0), phi) ==
        doctest::Approx(symplectic_form(u.component(0), v.component(0), phi2))
            .epsilon(1e-8));
  CHECK(fdiff(inverse(t, tu), u) < 1e-6);
}

TEST_CASE("operator exponential: round trip and phase-rotation form invariance") {
  Rng rng(906);

  SUBCASE("series inverse undoes the series forward") {
    BlockOperator b = random_operator(rng, 1, 8, 2, 2.0, 0.05);
    Transformation t = make_exp_transform(b);
    TorusFunction u = pair_state(rng, 1, 8, 1.5);
    CHECK(fdiff(inverse(t, forward(t, u)), u) < 1e-10);
  }

  SUBCASE("diag(i theta, -i theta) generator rotates without distorting the form") {
    const cd c(0.0, 0.3);
    BlockOperator b(1, 8, 0);
    add_symbol(b, 0, [&](int) { return c; });
    add_symbol(b, 1, [&](int) { return -c; });
    Transformation t = make_exp_transform(b);
    TorusFunction u = pair_state(rng, 1, 8, 1.5);
    TorusFunction v = pair_state(rng, 1, 8, 1.5);
    TorusFunction tu = forward(t, u), tv = forward(t, v);
    CHECK(reality_defect(tu) < 1e-12);
    CHECK(symplectic_form(tu.component(0), tv.component(0)) ==
          doctest::Approx(symplectic_form(u.component(0), v.component(0)))
              .epsilon(1e-12));
    /* exp acts as scalar e^{i theta} on the first component. */
    TorusFunction expect = u.component(0);
    expect *= std::exp(c);
    CHECK(fdiff(tu.component(0), expect) < 1e-12);
  }
}

TEST_CASE("Toplitz conjugation by exp matches the function-level conjugation") {
  Rng rng(907);
  const std::array<double, 3> omega{1.234, 0.0, 0.0};
  const int J = 10;

  BlockOperator b = random_operator(rng, 1, J, 1, 2.5, 0.02);
  BlockOperator ksmall = random_operator(rng, 1, J, 3, 2.0, 0.5);
  BlockOperator k(1, J, 8);
  for (int idx = 0; idx < ksmall.tbox().count(); ++idx) {
    const std::array<int, 3> l = ksmall.tbox().unflatten(idx);
    k.block(l) = ksmall.block(l);
  }

  BlockOperator kprime = exp_conjugate(k, b, omega, 1.0);

  /* Left side computed through functions only: u interior in both time and
   * space so that every truncation in the comparison is negligible. */
  TorusFunction u =
      make_conjugate_pair(embed(random_function(rng, 1, 2, 1.5), 10));
  TorusFunction eu = exp_apply(b, u);
  TorusFunction lv = derivative(eu, Deriv::omega_dphi, omega);
  lv += apply(k, eu);
  TorusFunction lhs = exp_apply(b, lv, -1.0);

  TorusFunction rhs = derivative(u, Deriv::omega_dphi, omega);
  rhs += apply(kprime, u);

  CHECK(fdiff(lhs, rhs) < 1e-7 * (1.0 + sobolev_norm(lhs, 0.0)));

  /* Materialized exponential agrees with the series action. */
  BlockOperator eb = exp_operator(b, 8);
  CHECK(fdiff(apply(eb, u), exp_apply(b, u)) < 1e-12);
}

TEST_CASE("drift commutator scales each block by i omega.l") {
  const std::array<double, 3> omega{0.9, 0.0, 0.0};
  BlockOperator x(1, 2, 2);
  x.block({1, 0, 0})(0, 1) = cd(2.0, 0.0);
  x.block({-2, 0, 0})(3, 4) = cd(0.0, 1.0);
  BlockOperator dx = drift_commutator(x, omega);
  CHECK(dx.block({1, 0, 0})(0, 1) == cd(0.0, 1.8));
  CHECK(dx.block({-2, 0, 0})(3, 4) == cd(1.8, 0.0));
}

TEST_CASE("chains compose and invert in the right order") {
  Rng rng(908);
  TransformChain chain;
  TorusFunction alpha = TorusFunction::single_mode(1, 1, {0, 0, 0}, 0, std::cosh(0.2));
  TorusFunction beta = TorusFunction::single_mode(1, 1, {0, 0, 0}, 0, std::sinh(0.2));
  chain.steps.push_back(make_matrix_transform(alpha, beta));
  chain.steps.push_back(
      make_space_transform(embed(real_random(rng, 1, 1, 1.0, 0.04), 12), true));

  TorusFunction u = make_conjugate_pair(embed(random_function(rng, 1, 3, 1.0), 16));
  TorusFunction w = forward(chain, u);
  /* products act right to left */
  CHECK(fdiff(w, forward(chain.steps[0], forward(chain.steps[1], u))) == 0.0);
  CHECK(fdiff(inverse(chain, w), u) < 1e-7);
}

TEST_CASE("space shift and phase freeze") {
  TorusFunction u = TorusFunction::single_mode(1, 3, {1, 0, 0}, 1, cd(1.0, 0.0));
  u += TorusFunction::single_mode(1, 3, {0, 0, 0}, 1, cd(2.0, 0.0));

  TorusFunction s = shift_space(u, 2);
  CHECK(s.get(0, {1, 0, 0}, 3) == cd(1.0, 0.0));
  CHECK(s.get(0, {1, 0, 0}, 1) == cd(0.0, 0.0));

  const std::array<double, 3> phi{0.7, 0.0, 0.0};
  TorusFunction fz = freeze_phase(u, phi);
  const cd want = std::exp(cd(0.0, 0.7)) + cd(2.0, 0.0);
  CHECK(std::abs(fz.get(0, {0, 0, 0}, 1) - want) < 1e-14);
  CHECK(std::abs(fz.get(0, {1, 0, 0}, 1)) == 0.0);
}

} // TEST_SUITE
