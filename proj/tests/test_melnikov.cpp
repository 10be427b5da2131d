#include "doctest.h"

#include "qpnls/melnikov.hpp"
#include "qpnls/normal_form.hpp"
#include "qpnls/param_grid.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace qpnls;

namespace {

/* A pure normal form: scalar coefficients only, no pair corrections. */
NormalForm pure(int J, double m2, double s1, double m0) {
  return initial_normal_form(1, J, m2, cd(0.0, -s1), m0);
}

long kept(const std::vector<char>& mask) {
  long n = 0;
  for (char c : mask) n += c != 0;
  return n;
}

bool subset(const std::vector<char>& inner, const std::vector<char>& outer) {
  for (std::size_t i = 0; i < inner.size(); ++i)
    if (inner[i] && !outer[i]) return false;
  return true;
}

/* Synthetic per-size constants with the measured linear coefficients of the
 * mixed-coefficient model, used where a full coefficient extraction would
 * only slow the suite down without changing what is being tested. */
NormalForm scaled(double m, double eps, int J) {
  return initial_normal_form(1, J, 1.0 - 1.16 * eps, cd(0.0, -1.83 * eps),
                             m + 1.49 * eps);
}

}  // namespace

TEST_SUITE("melnikov") {

TEST_CASE("eigenvalue provider matches the pair blocks and the closed tail") {
  NormalForm nf = pure(4, 1.0, 0.02, 4.0 / 3.0);
  nf.at(2).r_pp = 3e-4;
  nf.at(2).r_mm = -2e-4;
  nf.at(2).r_pm = cd(1e-4, -2e-4);
  nf.at(4).r_pm = cd(0.0, 5e-4);

  /* Signed labels select the two branches of the same block. */
  for (int sigma : {1, -1})
    for (int jbar = 0; jbar <= nf.J; ++jbar) {
      const BlockEigen be = eigenvalues_of_block(nf, sigma, jbar);
      CHECK(eigenvalue_of(nf, sigma, jbar) == be.mu_plus);
      if (jbar > 0) CHECK(eigenvalue_of(nf, sigma, -jbar) == be.mu_minus);
    }

  /* Beyond the correction range the closed tail takes over, and for a pure
   * form it agrees with the block values on the boundary. */
  NormalForm p = pure(4, 1.0, 0.02, 4.0 / 3.0);
  for (int sigma : {1, -1})
    for (int j : {4, -4}) {
      const cd tail(0.0, double(sigma) * (-p.m2 * double(j) * double(j) +
                                          p.m0 + 0.02 * double(j)));
      CHECK(std::abs(eigenvalue_of(p, sigma, j) - tail) < 1e-12);
    }
  for (int j : {7, -7, 20}) {
    const cd mu = eigenvalue_of(p, 1, j);
    CHECK(mu.real() == 0.0);
    CHECK(mu == -eigenvalue_of(p, -1, j));
    CHECK(mu.imag() ==
          doctest::Approx(-p.m2 * j * j + p.m0 + 0.02 * j).epsilon(1e-15));
  }

  /* The within-pair difference beyond the range is linear in j: the
   * quadratic parts share one rounded value and drop out. */
  const cd diff = eigenvalue_of(p, 1, 9) - eigenvalue_of(p, 1, -9);
  CHECK(diff.real() == 0.0);
  CHECK(diff.imag() == doctest::Approx(2.0 * 0.02 * 9.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)eigenvalue_of(p, 0, 1), UsageError);
  CHECK_THROWS_AS((void)eigenvalue_of(p, 2, 1), UsageError);
}

TEST_CASE("threshold conventions on pinned examples") {
  /* Unperturbed first-order test at the simplest corner: mass 1, frequency
   * 1, offset 1, mode 0. The divisor is |1 + (m - 0)| = 2 and the threshold
   * is 2 gamma, so every gamma up to 1 passes, including the equality edge. */
  const NormalForm nf = pure(4, 1.0, 0.0, 1.0);
  const std::array<double, 3> w{1.0, 0.0, 0.0};
  const std::array<int, 3> l{1, 0, 0};
  for (double g : {0.0, 0.5, 1.0}) {
    const ResonanceQuery q = melnikov_test(ResonanceKind::first_melnikov_P, nf,
                                           w, l, 1, 0, 1, 0, g, 3.0);
    CHECK(q.divisor == 2.0);
    CHECK(q.threshold == 2.0 * g);
    CHECK(q.pass);
  }

  /* The time weight enters as <l>^tau with <l> = max(|l|_inf, 1). */
  const ResonanceQuery q3 = melnikov_test(ResonanceKind::diophantine, nf, w,
                                          {3, 0, 0}, 1, 0, 1, 0, 0.5, 2.0);
  CHECK(q3.divisor == 3.0);
  CHECK(q3.threshold == doctest::Approx(0.5 / 9.0));
  CHECK(q3.pass);

  /* Within-pair threshold carries the extra 1/<j> factor. */
  NormalForm ps = pure(4, 1.0, 0.01, 1.25);
  const ResonanceQuery qo = melnikov_test(ResonanceKind::second_melnikov_O, ps,
                                          w, l, 1, 3, 1, -3, 0.2, 3.0);
  CHECK(qo.threshold == doctest::Approx(2.0 * 0.2 / 3.0));
  CHECK(qo.divisor == doctest::Approx(1.0 + 2.0 * 0.01 * 3.0));
  CHECK(qo.pass);
}

TEST_CASE("vacuous pairs and exact resonances") {
  const NormalForm nf = pure(6, 1.0, 0.0, 1.0);
  const std::array<double, 3> w{1.0, 0.0, 0.0};

  /* Kernel indices: same sign and j' = +-j have zero weight, so the
   * condition is vacuous even though the divisor is exactly zero. */
  for (int j2 : {1, -1}) {
    const ResonanceQuery q =
        melnikov_test(ResonanceKind::second_melnikov_S, nf, w, {0, 0, 0}, 1, 1,
                      1, j2, 0.3, 3.0);
    CHECK(q.divisor == 0.0);
    CHECK(q.threshold == 0.0);
    CHECK(q.pass);
  }

  /* A non-vacuous exact resonance fails at every gamma, including zero:
   * omega . l = 1 meets mu(+,1) - mu(+,0) = -i exactly. */
  for (double g : {0.0, 0.3}) {
    const ResonanceQuery q =
        melnikov_test(ResonanceKind::second_melnikov_S, nf, w, {1, 0, 0}, 1, 1,
                      1, 0, g, 3.0);
    CHECK(q.divisor == 0.0);
    CHECK_FALSE(q.pass);
  }

  /* Off the resonance, gamma = 0 accepts any nonzero divisor. */
  const ResonanceQuery q = melnikov_test(ResonanceKind::second_melnikov_S, nf,
                                         {0.77, 0.0, 0.0}, {1, 0, 0}, 1, 1, 1,
                                         0, 0.0, 3.0);
  CHECK(q.divisor > 0.0);
  CHECK(q.pass);
}

TEST_CASE("index constraint violations are usage errors") {
  const NormalForm nf = pure(4, 1.0, 0.01, 1.25);
  const std::array<double, 3> w{1.0, 0.0, 0.0};
  const std::array<int, 3> l0{0, 0, 0};
  const std::array<int, 3> l1{1, 0, 0};

  CHECK_THROWS_AS((void)melnikov_test(ResonanceKind::diophantine, nf, w, l0, 1,
                                      0, 1, 0, 0.1, 3.0),
                  UsageError);
  CHECK_THROWS_AS((void)melnikov_test(ResonanceKind::second_melnikov_O, nf, w,
                                      l0, 1, 2, 1, -2, 0.1, 3.0),
                  UsageError);
  CHECK_THROWS_AS((void)melnikov_test(ResonanceKind::second_melnikov_O, nf, w,
                                      l1, 1, 2, 1, 3, 0.1, 3.0),
                  UsageError);
  CHECK_THROWS_AS((void)melnikov_test(ResonanceKind::second_melnikov_O, nf, w,
                                      l1, 1, 2, -1, -2, 0.1, 3.0),
                  UsageError);
  CHECK_THROWS_AS((void)melnikov_test(ResonanceKind::first_melnikov_P, nf, w,
                                      l1, 0, 1, 1, 1, 0.1, 3.0),
                  UsageError);
  CHECK_THROWS_AS((void)melnikov_test(ResonanceKind::first_melnikov_P, nf, w,
                                      l1, 1, 1, 1, 1, -0.1, 3.0),
                  UsageError);
}

TEST_CASE("diophantine mask on the default segment and a plane") {
  const ParamGrid seg = ParamGrid::make(1, 33);

  /* On [1/2, 3/2] the worst divisor is 0.5 at |l| = 1, so everything below
   * that stays in; pushing gamma0 past it starts carving the low end. */
  const std::vector<char> all = diophantine_mask(seg, 0.4, 3.0, 6);
  CHECK(kept(all) == 33);
  const std::vector<char> cut = diophantine_mask(seg, 0.6, 3.0, 6);
  CHECK(kept(cut) == 29);
  CHECK(subset(cut, all));
  for (long i = 0; i < seg.size(); ++i)
    CHECK((cut[std::size_t(i)] != 0) == (seg.omega(i)[0] >= 0.6));

  /* Two frequencies: the resonant lines omega_1 = omega_2, 2 omega_1 =
   * omega_2 and omega_1 = 2 omega_2 pass through 9 of the 25 lattice
   * points, which fail at any positive gamma0. */
  const ParamGrid plane = ParamGrid::make(2, 5);
  const std::vector<char> pm = diophantine_mask(plane, 1e-9, 1.0, 2);
  CHECK(kept(pm) == 16);
  for (long i = 0; i < plane.size(); ++i) {
    const std::array<double, 3>& w = plane.omega(i);
    const bool resonant = w[0] == w[1] || 2.0 * w[0] == w[1] ||
                          w[0] == 2.0 * w[1];
    CHECK((pm[std::size_t(i)] == 0) == resonant);
  }

  CHECK_THROWS_AS((void)diophantine_mask(seg, 0.1, 3.0, 0), UsageError);
  CHECK_THROWS_AS((void)diophantine_mask(seg, -0.1, 3.0, 3), UsageError);
}

TEST_CASE("constant splitting gives an exact candidate interval") {
  /* With no corrections the splitting is the constant 2 |Im m1| = 1/64, so
   * the window |w.l|/2 <= j b <= 2 |w.l| at w.l = 1 is exactly the integer
   * interval [32, 128], endpoints included (all quantities are binary
   * fractions, so there is no rounding anywhere). */
  const NormalForm nf = pure(4, 1.0, 1.0 / 128.0, 1.0);
  const std::array<double, 3> w{1.0, 0.0, 0.0};
  const std::array<int, 3> l{1, 0, 0};

  const CutoffRange cr = cutoff_j_range(l, w, 1e-3, 2.0, nf, 6.0);
  CHECK(cr.j_cap == 3000);
  REQUIRE(cr.candidates.size() == 97);
  CHECK(cr.candidates.front() == 32);
  CHECK(cr.candidates.back() == 128);
  CHECK(std::is_sorted(cr.candidates.begin(), cr.candidates.end()));
  CHECK(cr.certified == 3000 - 97);

  /* Zero offset: the within-pair condition is void, the range empty. */
  const CutoffRange z = cutoff_j_range({0, 0, 0}, w, 1e-3, 2.0, nf, 6.0);
  CHECK(z.candidates.empty());
  CHECK(z.j_cap == 0);
  CHECK(z.certified == 0);

  /* A large perturbation caps the range below the window: every candidate
   * is certified away. */
  const CutoffRange c = cutoff_j_range(l, w, 0.1, 2.0, nf, 6.0);
  CHECK(c.j_cap == 30);
  CHECK(c.candidates.empty());
  CHECK(c.certified == 30);

  CHECK_THROWS_AS((void)cutoff_j_range(l, w, 0.0, 2.0, nf, 6.0), UsageError);
  CHECK_THROWS_AS((void)cutoff_j_range(l, w, 1e-3, 2.0, nf, -1.0), UsageError);
}

TEST_CASE("cutoff certificate is sound under an engineered failure") {
  /* Tune the splitting so that j = 31 resonates exactly with w.l = 5/4 at
   * l = 1: the divisor |w.l - 2 s j| collapses to rounding noise, far below
   * the threshold. The audit must see the failure and find it inside the
   * predicted candidate range. */
  const double s = 1.25 / 62.0;
  const NormalForm nf = pure(4, 1.0, s, 1.0);
  const ParamGrid grid = ParamGrid::make(1, 9, 0.75, 1.75);

  const CutoffAudit a = audit_cutoff(nf, grid, 0.05, 3.0, 2, 1e-3, 2.0);
  CHECK(a.failures >= 1);
  CHECK(a.outside == 0);
  CHECK(a.j_max > 31);
  CHECK(a.tested == grid.size() * 4 * long(a.j_max));

  /* The resonant mode really is a predicted candidate at that point. */
  const CutoffRange cr =
      cutoff_j_range({1, 0, 0}, {1.25, 0.0, 0.0}, 1e-3, 2.0, nf, 7.0);
  CHECK(std::binary_search(cr.candidates.begin(), cr.candidates.end(), 31));

  CHECK_THROWS_AS(
      (void)audit_cutoff(nf, grid, 0.0, 3.0, 2, 1e-3, 2.0), UsageError);
  CHECK_THROWS_AS((void)audit_cutoff(pure(4, 1.0, 0.0, 1.0), grid, 0.05, 3.0,
                                     2, 1e-3, 2.0),
                  UsageError);
}

TEST_CASE("nested masks, counts and determinism") {
  std::vector<NormalForm> fams;
  for (int n = 0; n < 3; ++n) {
    NormalForm nf = scaled(1.15, 1e-3, 6);
    nf.at(1).r_pp = 2e-4 / double(n + 1);
    nf.at(1).r_pm = cd(0.0, 1e-4 / double(n + 1));
    nf.at(3).r_mm = -1e-4 / double(n + 1);
    fams.push_back(nf);
  }
  const ParamGrid grid = ParamGrid::make(1, 17);
  GoodSetOptions opt;
  opt.gamma = std::sqrt(1e-3);
  opt.tau = 3.0;
  opt.N = {3, 4, 5};
  opt.eps = 1e-3;
  opt.abs_e = 2.0;

  const GoodSets gs = build_good_sets(fams, grid, opt);
  REQUIRE(gs.G.size() == 4);
  REQUIRE(gs.H.size() == 4);
  REQUIRE(gs.P.size() == 4);
  REQUIRE(gs.excluded.size() == 3);
  CHECK(kept(gs.G[0]) == grid.size());
  CHECK(kept(gs.H[0]) == grid.size());
  CHECK(kept(gs.P[0]) == grid.size());
  for (int n = 0; n < 3; ++n) {
    CHECK(subset(gs.G[std::size_t(n) + 1], gs.G[std::size_t(n)]));
    CHECK(subset(gs.H[std::size_t(n) + 1], gs.H[std::size_t(n)]));
    CHECK(subset(gs.P[std::size_t(n) + 1], gs.P[std::size_t(n)]));
    CHECK(gs.excluded[std::size_t(n)].S_fail ==
          kept(gs.G[std::size_t(n)]) - kept(gs.G[std::size_t(n) + 1]));
    CHECK(gs.excluded[std::size_t(n)].O_fail ==
          kept(gs.H[std::size_t(n)]) - kept(gs.H[std::size_t(n) + 1]));
    CHECK(gs.excluded[std::size_t(n)].P_fail ==
          kept(gs.P[std::size_t(n)]) - kept(gs.P[std::size_t(n) + 1]));
  }
  for (long i = 0; i < grid.size(); ++i)
    CHECK(gs.all[std::size_t(i)] ==
          char(gs.G[3][std::size_t(i)] & gs.H[3][std::size_t(i)] &
               gs.P[3][std::size_t(i)]));
  CHECK(gs.cutoff_tested > 0);
  CHECK(gs.cutoff_certified > 0);

  /* Same inputs, same masks, bit for bit. */
  const GoodSets gs2 = build_good_sets(fams, grid, opt);
  CHECK(gs2.all == gs.all);
  for (int n = 0; n <= 3; ++n) {
    CHECK(gs2.G[std::size_t(n)] == gs.G[std::size_t(n)]);
    CHECK(gs2.H[std::size_t(n)] == gs.H[std::size_t(n)]);
    CHECK(gs2.P[std::size_t(n)] == gs.P[std::size_t(n)]);
  }

  /* Disabling the cutoff scans every mode below the cap and must agree. */
  GoodSetOptions brute = opt;
  brute.use_cutoff = false;
  const GoodSets gsb = build_good_sets(fams, grid, brute);
  for (int n = 0; n <= 3; ++n) CHECK(gsb.H[std::size_t(n)] == gs.H[std::size_t(n)]);
  CHECK(gsb.all == gs.all);

  /* Input validation. */
  CHECK_THROWS_AS((void)build_good_sets({}, grid, opt), UsageError);
  GoodSetOptions bad = opt;
  bad.N = {};
  CHECK_THROWS_AS((void)build_good_sets(fams, grid, bad), UsageError);
  bad.N = {0};
  CHECK_THROWS_AS((void)build_good_sets(fams, grid, bad), UsageError);
  bad = opt;
  bad.tau = 0.0;
  CHECK_THROWS_AS((void)build_good_sets(fams, grid, bad), UsageError);
  bad = opt;
  bad.gamma = 0.5; /* the scan certificates need m2 - 2|Im m1| - 2 gamma_n > 0 */
  CHECK_THROWS_AS((void)build_good_sets(fams, grid, bad), UsageError);
  const std::vector<NormalForm> wrongd = {
      initial_normal_form(2, 4, 1.0, cd(0.0, -1e-3), 1.15)};
  CHECK_THROWS_AS((void)build_good_sets(wrongd, grid, opt), UsageError);
}

TEST_CASE("scan equals exhaustive test over the public predicate") {
  /* Every certificate inside the scanner (weight caps, mode caps, cutoff
   * windows, vacuity, early exits) against the plain quantifier: a point
   * survives iff every single condition with |l| <= N and modes in a box
   * passes. The box is far larger than any cap the scanner derives, so a
   * disagreement can only be a scanner defect. Mass 1.25 keeps the constant
   * symbol away from the kernel at zero offset. */
  const ParamGrid grid = ParamGrid::make(1, 9);
  const int N = 3, box = 40;

  for (double gamma : {0.0, 0.05}) {
    const NormalForm nf = pure(4, 1.0, 0.0, 1.25);
    GoodSetOptions opt;
    opt.gamma = gamma;
    opt.tau = 3.0;
    opt.N = {N};
    opt.eps = 0.0; /* unperturbed: the splitting window alone bounds the scan */
    const GoodSets gs = build_good_sets({nf}, grid, opt);

    const double gn = 2.0 * gamma; /* first iterate of (1 + 2^{-n}) gamma */
    for (long i = 0; i < grid.size(); ++i) {
      const std::array<double, 3>& w = grid.omega(i);
      bool S = true, O = true, P = true;
      for (int l1 = -N; l1 <= N; ++l1) {
        const std::array<int, 3> l{l1, 0, 0};
        for (int si : {1, -1}) {
          for (int j = -box; j <= box; ++j) {
            if (!melnikov_test(ResonanceKind::first_melnikov_P, nf, w, l, si,
                               j, si, j, gn, opt.tau)
                     .pass)
              P = false;
            if (l1 != 0 && j >= 1 &&
                !melnikov_test(ResonanceKind::second_melnikov_O, nf, w, l, si,
                               j, si, -j, gn, opt.tau)
                     .pass)
              O = false;
            for (int s2 : {1, -1})
              for (int j2 = -box; j2 <= box; ++j2)
                if (!melnikov_test(ResonanceKind::second_melnikov_S, nf, w, l,
                                   si, j, s2, j2, gn, opt.tau)
                         .pass)
                  S = false;
          }
        }
      }
      CHECK(gs.G[1][std::size_t(i)] == char(S));
      CHECK(gs.H[1][std::size_t(i)] == char(O));
      CHECK(gs.P[1][std::size_t(i)] == char(P));
    }

    /* Unperturbed pairs never split, so no within-pair exclusion at all. */
    CHECK(kept(gs.H[1]) == grid.size());
    if (gamma == 0.0) {
      /* Only exact resonances go: on the 1/8 grid these sit at 0.5, 0.625,
       * 0.75, 1.0, 1.25, 1.375 and 1.5, leaving two survivors. */
      CHECK(kept(gs.all) == 2);
      for (long i = 0; i < grid.size(); ++i) {
        const double x = grid.omega(i)[0];
        CHECK((gs.all[std::size_t(i)] != 0) == (x == 0.875 || x == 1.125));
      }
    }
  }
}

TEST_CASE("iteration threshold formula: clamping, growth, doubling") {
  /* Inner logarithm nonpositive: the threshold clamps to zero, flagged. */
  const NbarResult c = nbar(0.9, 2.0, 8, 10.0, 3.0);
  CHECK(c.value == 0);
  CHECK(c.clamped);

  const NbarResult a = nbar(1e-3, std::sqrt(1e-3), 8, 10.0, 3.0);
  CHECK_FALSE(a.clamped);
  CHECK(a.value == 1);

  /* Shrinking the perturbation never lowers the threshold. */
  int prev = 0;
  for (double eps : {1e-2, 1e-3, 1e-4, 1e-6, 1e-9}) {
    const NbarResult r = nbar(eps, std::sqrt(eps), 8, 10.0, 3.0);
    CHECK(r.value >= prev);
    prev = r.value;
  }

  /* Doubling 1/(C gamma eps) moves the threshold up by at most one. */
  for (double eps : {1e-3, 1e-5, 1e-8})
    for (double g : {1e-1, 1e-3}) {
      const NbarResult r1 = nbar(eps, g, 8, 10.0, 3.0, 1.0);
      const NbarResult r2 = nbar(eps, g, 8, 10.0, 3.0, 0.5);
      CHECK(r2.value >= r1.value);
      CHECK(r2.value - r1.value <= 1);
    }

  CHECK_THROWS_AS((void)nbar(1e-3, 0.03, 8, 6.0, 3.0), UsageError);
  CHECK_THROWS_AS((void)nbar(1e-3, 0.03, 1, 10.0, 3.0), UsageError);
  CHECK_THROWS_AS((void)nbar(0.0, 0.03, 8, 10.0, 3.0), UsageError);
}

TEST_CASE("measure report trend across perturbation sizes") {
  const ParamGrid grid = ParamGrid::make(1, 33);
  const double epses[3] = {1e-2, 1e-3, 1e-4};

  auto make_runs = [&](double m) {
    std::vector<MeasureInput> runs;
    for (double eps : epses) {
      MeasureInput mi;
      mi.eps = eps;
      mi.gamma = std::sqrt(eps);
      mi.families = {scaled(m, eps, 8)};
      mi.N = {8};
      runs.push_back(mi);
    }
    return runs;
  };

  /* At mass 1.15 the exclusion windows thin out fast enough for the
   * excluded fraction to decrease strictly across the three sizes. */
  const MeasureReport rep = measure_report(make_runs(1.15), grid, 3.0, 2.0);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.trend_checked);
  CHECK(rep.monotone);
  CHECK(rep.note.empty());
  CHECK(rep.rows[0].excluded_fraction == 1.0);
  CHECK(rep.rows[1].excluded_fraction == doctest::Approx(1.0 - 4.0 / 33.0));
  CHECK(rep.rows[2].excluded_fraction == doctest::Approx(1.0 - 13.0 / 33.0));
  for (const MeasureRow& r : rep.rows) {
    CHECK(r.iterates == 1);
    CHECK(r.excluded_fraction >= r.fraction_S);
    CHECK(r.excluded_fraction >= r.fraction_O);
    CHECK(r.excluded_fraction >= r.fraction_P);
    CHECK(r.excluded_fraction <= 1.0);
    CHECK(r.fraction_S >= 0.0);
    CHECK(r.cutoff_tested > 0);
    CHECK(r.cutoff_certified > 0);
  }

  /* At mass 4/3 the second-order windows happen to tile the whole segment
   * down to eps = 1e-3, so the trend stalls and the report says where. */
  const MeasureReport sat = measure_report(make_runs(4.0 / 3.0), grid, 3.0,
                                           2.0);
  CHECK(sat.trend_checked);
  CHECK_FALSE(sat.monotone);
  CHECK(sat.note.find("does not strictly decrease") != std::string::npos);
  CHECK(sat.rows[0].excluded_fraction == 1.0);
  CHECK(sat.rows[1].excluded_fraction == 1.0);
  CHECK(sat.rows[2].excluded_fraction < 1.0);

  /* A single size cannot carry a trend. */
  const MeasureReport one =
      measure_report({make_runs(1.15)[1]}, grid, 3.0, 2.0);
  CHECK_FALSE(one.trend_checked);
  CHECK(one.note.find("skipped") != std::string::npos);

  /* Same inputs, same table. */
  const MeasureReport again = measure_report(make_runs(1.15), grid, 3.0, 2.0);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(again.rows[k].excluded_fraction == rep.rows[k].excluded_fraction);
    CHECK(again.rows[k].fraction_S == rep.rows[k].fraction_S);
    CHECK(again.rows[k].fraction_O == rep.rows[k].fraction_O);
    CHECK(again.rows[k].fraction_P == rep.rows[k].fraction_P);
    CHECK(again.rows[k].cutoff_certified == rep.rows[k].cutoff_certified);
    CHECK(again.rows[k].cutoff_tested == rep.rows[k].cutoff_tested);
  }

  CHECK_THROWS_AS((void)measure_report({}, grid, 3.0, 2.0), UsageError);
}

}  // TEST_SUITE
