#include "doctest.h"

#include "qpnls/param_grid.hpp"
#include "qpnls/torus_function.hpp"

using namespace qpnls;

namespace {

double fdiff(const TorusFunction& a, const TorusFunction& b) {
  TorusFunction c = a;
  c -= b;
  return sobolev_norm(c, 0.0);
}

}  // namespace

TEST_SUITE("fourier") {

TEST_CASE("sobolev norm weights a single space harmonic by max(|l|,|j|,1)^s") {
  /* e^{i 2x} at s = 3 has norm 2^3 = 8 */
  auto u = TorusFunction::single_mode(1, 3, {0, 0, 0}, 2, cd(1.0, 0.0));
  CHECK(sobolev_norm(u, 3.0) == doctest::Approx(8.0).epsilon(1e-14));
  /* the constant mode has weight 1 at every s */
  auto c = TorusFunction::single_mode(1, 3, {0, 0, 0}, 0, cd(0.0, 2.5));
  CHECK(sobolev_norm(c, 7.0) == doctest::Approx(2.5).epsilon(1e-14));
  /* mixed mode (l, j) = (3, 1): weight 3 */
  auto m = TorusFunction::single_mode(1, 3, {3, 0, 0}, 1, cd(1.0, 0.0));
  CHECK(sobolev_norm(m, 2.0) == doctest::Approx(9.0).epsilon(1e-14));
}

TEST_CASE("projection splits a function exactly into low and high parts") {
  Rng rng(7);
  auto u = random_function(rng, 2, 3, 1.0);
  auto pr = project(u, 2);
  /* reassemble: embed low part back and add the high remainder */
  TorusFunction re = embed(pr.low, u.N);
  re += pr.high;
  CHECK(fdiff(re, u) == 0.0);
  /* high part carries no low modes */
  auto prh = project(pr.high, 2);
  CHECK(sobolev_norm(prh.low, 0.0) == 0.0);
}

TEST_CASE("tail projection obeys the smoothing estimate with constant one") {
  Rng rng(11);
  auto u = random_function(rng, 1, 6, 0.5);
  const double s = 1.0, beta = 2.5;
  for (int N : {0, 1, 2, 3, 4, 5}) {
    auto pr = project(u, N);
    const double lhs = sobolev_norm(pr.high, s);
    const double rhs = std::pow(N + 1.0, -beta) * sobolev_norm(u, s + beta);
    CHECK(lhs <= rhs * (1.0 + 1e-12));
  }
}

TEST_CASE("multiplication of harmonics adds frequency indices") {
  auto u = TorusFunction::single_mode(1, 4, {1, 0, 0}, 2, cd(2.0, 0.0));
  auto v = TorusFunction::single_mode(1, 4, {-3, 0, 0}, 1, cd(0.0, 1.0));
  auto res = multiply(u, v);
  CHECK(std::abs(res.value.get(0, {-2, 0, 0}, 3) - cd(0.0, 2.0)) < 1e-15);
  CHECK(res.tail == 0.0);
  CHECK(sobolev_norm(res.value, 0.0) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("multiplication reports convolution mass pushed past the cutoff") {
  auto u = TorusFunction::single_mode(1, 2, {0, 0, 0}, 2, cd(1.0, 0.0));
  auto v = TorusFunction::single_mode(1, 2, {0, 0, 0}, 1, cd(3.0, 0.0));
  auto res = multiply(u, v, 2); /* product sits at j = 3, outside cutoff 2 */
  CHECK(sobolev_norm(res.value, 0.0) == 0.0);
  CHECK(res.tail == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("multiplication against the algebra estimate on random data") {
  Rng rng(23);
  const double s = 2.0; /* above (d+2)/2 = 1.5 for d = 1 */
  for (int trial = 0; trial < 3; ++trial) {
    auto u = random_function(rng, 1, 4, 1.5);
    auto v = random_function(rng, 1, 4, 1.5);
    auto res = multiply(u, v, 8);
    CHECK(res.tail == 0.0); /* full convolution kept */
    /* C(s) = 4^s covers the count of ways weights split */
    const double cs = std::pow(4.0, s);
    CHECK(sobolev_norm(res.value, s) <=
          cs * sobolev_norm(u, s) * sobolev_norm(v, s));
  }
}

TEST_CASE("derivatives act diagonally with the expected symbols") {
  const std::array<double, 3> omega{1.3, 0.0, 0.0};
  auto u = TorusFunction::single_mode(1, 3, {2, 0, 0}, -1, cd(1.0, 1.0));
  auto ux = derivative(u, Deriv::x);
  CHECK(std::abs(ux.get(0, {2, 0, 0}, -1) - cd(0.0, -1.0) * cd(1.0, 1.0)) < 1e-15);
  auto uphi = derivative(u, Deriv::phi);
  CHECK(std::abs(uphi.get(0, {2, 0, 0}, -1) - cd(0.0, 2.0) * cd(1.0, 1.0)) < 1e-15);
  auto uo = derivative(u, Deriv::omega_dphi, omega);
  CHECK(std::abs(uo.get(0, {2, 0, 0}, -1) - cd(0.0, 2.6) * cd(1.0, 1.0)) < 1e-15);
}

TEST_CASE("dx_inverse inverts d/dx away from the zero space mode") {
  Rng rng(3);
  auto u = random_function(rng, 1, 4, 1.0);
  /* remove the j = 0 layer, then d/dx dx_inverse = identity */
  TorusFunction v = u;
  const TimeBox tb = v.tbox();
  for (long t = 0; t < tb.count(); ++t) v.at(0, tb.unflatten(t), 0) = cd(0, 0);
  auto w = derivative(dx_inverse(v), Deriv::x);
  CHECK(fdiff(w, v) < 1e-14);
  /* the j = 0 layer is annihilated, not divided */
  auto z = dx_inverse(u);
  CHECK(std::abs(z.get(0, {1, 0, 0}, 0)) == 0.0);
}

TEST_CASE("omega_dphi_inverse inverts the transport derivative and guards divisors") {
  const std::array<double, 3> omega{1.1, 0.0, 0.0};
  Rng rng(5);
  auto u = random_function(rng, 1, 3, 1.0);
  const TimeBox tb = u.tbox();
  for (int j = -u.N; j <= u.N; ++j) u.at(0, {0, 0, 0}, j) = cd(0, 0);
  auto v = derivative(omega_dphi_inverse(u, omega, 1e-6), Deriv::omega_dphi, omega);
  CHECK(fdiff(v, u) < 1e-13);

  /* a divisor below the floor on an active mode throws with its index */
  auto bad = TorusFunction::single_mode(1, 3, {2, 0, 0}, 1, cd(1.0, 0.0));
  bool thrown = false;
  try {
    omega_dphi_inverse(bad, omega, 3.0);
  } catch (const SmallDivisorError& e) {
    thrown = true;
    CHECK(e.l[0] == 2);
    CHECK(e.divisor == doctest::Approx(2.2));
  }
  CHECK(thrown);
  (void)tb;
}

TEST_CASE("conjugate function and reality tags agree") {
  Rng rng(17);
  auto u = random_function(rng, 1, 3, 1.0);
  /* u + conj u is real-valued */
  TorusFunction w = u;
  w += conj_function(u);
  w.tag = Reality::real_valued;
  CHECK(reality_defect(w) < 1e-15);
  /* pointwise check: imaginary part vanishes at a random point */
  const cd val = eval_at(w, 0, {0.7, 0.0, 0.0}, 2.1);
  CHECK(std::abs(val.imag()) < 1e-12);
  /* the doubled state (u, conj u) satisfies the pair symmetry */
  auto pair = make_conjugate_pair(u);
  CHECK(reality_defect(pair) < 1e-15);
  /* symmetrize is a projection: applying it to a perturbed pair restores
   * the symmetry and leaves symmetric data untouched */
  TorusFunction p2 = pair;
  p2.at(1, {1, 0, 0}, 1) += cd(0.3, 0.1);
  symmetrize_reality(p2);
  CHECK(reality_defect(p2) < 1e-15);
}

TEST_CASE("grid sampling and recovery round-trip band-limited data exactly") {
  Rng rng(29);
  auto u = random_function(rng, 2, 2, 0.5);
  const int M = grid_size(u.N, 1);
  auto g = to_grid(u, 0, M, M);
  auto back = from_grid(g, u.d, u.N);
  CHECK(back.tail < 1e-13);
  CHECK(fdiff(back.value, u) < 1e-12 * (1.0 + sobolev_norm(u, 0.0)));
  /* eval_at agrees with the grid samples */
  const double x1 = kTwoPi * 3.0 / M;
  const cd direct = eval_at(u, 0, {kTwoPi * 1.0 / M, kTwoPi * 2.0 / M, 0.0}, x1);
  CHECK(std::abs(direct - g.at(1 * M + 2, 3)) < 1e-12);
}

TEST_CASE("grid recovery reports mass above the target cutoff as tail") {
  auto u = TorusFunction::single_mode(1, 3, {0, 0, 0}, 3, cd(2.0, 0.0));
  const int M = grid_size(u.N, 2);
  auto g = to_grid(u, 0, M, M);
  auto back = from_grid(g, 1, 2); /* cutoff below the live mode */
  CHECK(sobolev_norm(back.value, 0.0) < 1e-13);
  CHECK(back.tail == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("space substitution x -> x + xi round-trips through its inverse") {
  Rng rng(31);
  /* gentle real displacement built from low harmonics */
  auto xi0 = TorusFunction::single_mode(1, 12, {1, 0, 0}, 1, cd(0.05, 0.02));
  TorusFunction xi = xi0;
  xi += conj_function(xi0);
  xi.tag = Reality::real_valued;

  auto inv = invert_diffeo(xi);
  CHECK(inv.fp_residual < 1e-12);
  CHECK(inv.identity_defect < 1e-9);

  auto u = embed(random_function(rng, 1, 2, 1.0), 12);
  auto once = compose_space_diffeo(u, xi, false);
  auto round = compose_space_diffeo(once.value, inv.value, false);
  CHECK(fdiff(round.value, u) < 1e-8);
}

TEST_CASE("space substitution with jacobian factor multiplies by sqrt(1 + xi_x)") {
  auto xi0 = TorusFunction::single_mode(1, 8, {0, 0, 0}, 1, cd(0.0, -0.05));
  TorusFunction xi = xi0;
  xi += conj_function(xi0);
  xi.tag = Reality::real_valued; /* xi = 0.1 sin x */

  auto one = TorusFunction::single_mode(1, 8, {0, 0, 0}, 0, cd(1.0, 0.0));
  auto res = compose_space_diffeo(one, xi, true);
  /* compare against direct sampling of sqrt(1 + 0.1 cos x) */
  const int M = grid_size(8, 4);
  auto g = to_grid(res.value, 0, M, M);
  for (int p = 0; p < M; p += 7) {
    const double x = kTwoPi * p / M;
    CHECK(std::abs(g.at(0, p) - std::sqrt(1.0 + 0.1 * std::cos(x))) < 1e-10);
  }
}

TEST_CASE("time substitution phi -> phi + omega alpha round-trips") {
  Rng rng(37);
  const std::array<double, 3> omega{1.234, 0.0, 0.0};
  auto a0 = TorusFunction::single_mode(1, 10, {1, 0, 0}, 0, cd(0.04, 0.01));
  TorusFunction alpha = a0;
  alpha += conj_function(a0);
  alpha.tag = Reality::real_valued;

  auto inv = invert_time_diffeo(alpha, omega);
  CHECK(inv.fp_residual < 1e-12);
  CHECK(inv.identity_defect < 1e-10);

  auto u = embed(random_function(rng, 1, 2, 1.0), 10);
  auto once = compose_time_diffeo(u, alpha, omega);
  auto round = compose_time_diffeo(once.value, inv.value, omega);
  CHECK(fdiff(round.value, u) < 1e-8);
}

TEST_CASE("pointwise maps evaluated on an oversampled grid recover products") {
  /* squaring cos x = (e^{ix} + e^{-ix})/2 gives 1/2 + cos(2x)/2 */
  TorusFunction u(1, 4, 1, Reality::real_valued);
  u.at(0, {0, 0, 0}, 1) = cd(0.5, 0.0);
  u.at(0, {0, 0, 0}, -1) = cd(0.5, 0.0);
  auto sq = pointwise_map(u, +[](cd z) { return z * z; }, 4);
  CHECK(sq.tail < 1e-14);
  CHECK(std::abs(sq.value.get(0, {0, 0, 0}, 0) - cd(0.5, 0.0)) < 1e-14);
  CHECK(std::abs(sq.value.get(0, {0, 0, 0}, 2) - cd(0.25, 0.0)) < 1e-14);
  CHECK(std::abs(sq.value.get(0, {0, 0, 0}, 1)) < 1e-14);
}

TEST_CASE("random functions are deterministic per seed") {
  Rng a(99), b(99);
  auto u = random_function(a, 1, 3, 1.0);
  auto v = random_function(b, 1, 3, 1.0);
  CHECK(fdiff(u, v) == 0.0);
}

}  // TEST_SUITE fourier

TEST_SUITE("param-grid") {

TEST_CASE("weighted Lipschitz norm of the identity over the window") {
  auto g = ParamGrid::make(1, 3); /* {1/2, 1, 3/2} */
  REQUIRE(g.size() == 3);
  CHECK(g.omega(0)[0] == doctest::Approx(0.5));
  CHECK(g.omega(2)[0] == doctest::Approx(1.5));
  std::vector<double> f{0.5, 1.0, 1.5};
  std::vector<char> act(3, 1);
  auto n = lip_norm(g, f, act, 1.0);
  CHECK(n.sup == doctest::Approx(1.5));
  CHECK(n.lip == doctest::Approx(1.0));
  CHECK(n.total == doctest::Approx(2.5));
  CHECK_FALSE(n.degenerate);
}

TEST_CASE("deactivated points drop out of both parts of the norm") {
  auto g = ParamGrid::make(1, 5);
  std::vector<double> f{10.0, 1.0, 1.0, 1.0, 20.0};
  std::vector<char> act{0, 1, 1, 1, 0};
  auto n = lip_norm(g, f, act, 2.0);
  CHECK(n.sup == doctest::Approx(1.0));
  CHECK(n.lip == doctest::Approx(0.0));
  CHECK(n.total == doctest::Approx(1.0));
}

TEST_CASE("a single surviving point flags the Lipschitz part as vacuous") {
  auto g = ParamGrid::make(1, 4);
  std::vector<double> f{1, 2, 3, 4};
  std::vector<char> act{0, 0, 1, 0};
  auto n = lip_norm(g, f, act, 1.0);
  CHECK(n.degenerate);
  CHECK(n.lip == 0.0);
  CHECK(n.sup == doctest::Approx(3.0));
}

TEST_CASE("two-dimensional grids enumerate the full product window") {
  auto g = ParamGrid::make(2, 3);
  CHECK(g.size() == 9);
  /* corners present */
  bool corner = false;
  for (long i = 0; i < g.size(); ++i)
    if (g.omega(i)[0] == doctest::Approx(0.5) && g.omega(i)[1] == doctest::Approx(1.5))
      corner = true;
  CHECK(corner);
  CHECK(g.distance(0, g.size() - 1) == doctest::Approx(std::sqrt(2.0)));
}

}  // TEST_SUITE param-grid
