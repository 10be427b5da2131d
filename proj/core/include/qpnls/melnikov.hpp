#pragma once

#include "qpnls/normal_form.hpp"
#include "qpnls/param_grid.hpp"

namespace qpnls {

/* Computable non-resonance predicates on the frequency window, the cutoff
 * bounds that make the second-Melnikov scan finite, and the measurement of
 * excluded parameter fractions across a perturbation-size sweep.
 *
 * Conventions shared by every predicate:
 *   <l> = max(|l|_inf, 1), <j> = max(|j|, 1);
 *   mu_{sigma,j} is the signed-label eigenvalue of the (|j|, -|j|) pair block
 *   of the normal form (exact block eigenvalues for |j| <= J, the r = 0
 *   closed form  i sigma (-m2 j^2 + m0) + i sigma |Im m1| j  beyond);
 *   a test passes iff  divisor >= threshold. */

enum class ResonanceKind {
  diophantine,       /* |w.l| >= gamma / <l>^tau, l != 0                    */
  second_melnikov_S, /* |i w.l + mu - mu'| >= 2 gamma |s j^2 - s' j'^2| / <l>^tau */
  second_melnikov_O, /* |i w.l + mu_{s,j} - mu_{s,-j}| >= 2 gamma / (<l>^tau <j>),
                        l != 0 */
  first_melnikov_P,  /* |i w.l + mu_{s,j}| >= 2 gamma <j>^2 / <l>^tau       */
};

struct ResonanceQuery {
  ResonanceKind kind = ResonanceKind::diophantine;
  std::array<int, 3> l{0, 0, 0};
  int sigma = 1, j = 0;
  int sigma2 = 1, j2 = 0;
  double gamma = 0.0, tau = 0.0;
  double divisor = 0.0;
  double threshold = 0.0;
  bool pass = true;
};

/* Signed-label eigenvalue provider described above. */
cd eigenvalue_of(const NormalForm& nf, int sigma, int j);

/* Evaluate one inequality. The S-test with weight |s j^2 - s' j'^2| = 0 is
 * vacuous (threshold 0, any divisor passes): these indices are exactly the
 * pair blocks the reduction keeps. Index constraints (O: l != 0, j' = -j,
 * sigma' = sigma; diophantine: l != 0) are usage errors when violated. */
ResonanceQuery melnikov_test(ResonanceKind kind, const NormalForm& nf,
                             const std::array<double, 3>& omega,
                             const std::array<int, 3>& l, int sigma, int j,
                             int sigma2, int j2, double gamma, double tau);

/* Mask of grid points with |w.l| >= gamma0 / <l>^tau0 for all 0 < |l|_inf <=
 * L_max. */
std::vector<char> diophantine_mask(const ParamGrid& grid, double gamma0,
                                   double tau0, int L_max);

/* The finite candidate set for the within-pair second-Melnikov test at one
 * offset: a j >= 1 can fail only when j b_j lands within a factor 2 of
 * |w.l| (b_j = pair splitting of the block, constant 2|Im m1| beyond the
 * correction range), further capped by |j| <= C |l| / (eps |e|) where the
 * corrections can no longer shift the splitting. Everything outside is
 * certified without testing. */
struct CutoffRange {
  std::vector<int> candidates;
  long certified = 0; /* j in [1, j_cap] skipped by the splitting window */
  int j_cap = 0;      /* floor(C |l|_inf / (eps |e|))                     */
};
CutoffRange cutoff_j_range(const std::array<int, 3>& l,
                           const std::array<double, 3>& omega, double eps,
                           double abs_e, const NormalForm& nf, double C);

struct GoodSetOptions {
  double gamma = 0.03; /* base gamma; iterate n uses (1 + 2^{-n}) gamma    */
  double tau = 3.0;
  std::vector<int> N;  /* offset scan radius per iterate (last repeats)    */
  double eps = 1e-3;
  double abs_e = 2.0;
  double cutoff_C = -1.0; /* < 0 selects 4 max|omega| over the grid        */
  bool use_cutoff = true; /* false: test every j below the cap instead     */
};

/* Nested good sets over the grid, one family of masks per iterate, built
 * from the per-iterate normal forms: S-conditions shrink G, within-pair
 * conditions shrink H, first-Melnikov conditions shrink P. Points excluded
 * at iterate n stay excluded afterwards by construction. */
struct GoodSets {
  std::vector<std::vector<char>> G, H, P;
  std::vector<char> all; /* final G & H & P */
  struct Counts {
    long S_fail = 0, O_fail = 0, P_fail = 0;
  };
  std::vector<Counts> excluded; /* points newly excluded at each iterate   */
  long cutoff_certified = 0;    /* (l, j) pairs skipped by the cutoff      */
  long cutoff_tested = 0;
};
GoodSets build_good_sets(const std::vector<NormalForm>& families,
                         const ParamGrid& grid, const GoodSetOptions& opt);

/* Iterate index past which the surviving resonances are covered by the
 * previous step (reporting only):
 *   nbar = log( log(1/(C gamma eps)) / ((kappa - tau - 3) log N0) ) / log(3/2).
 * Arguments driving either log nonpositive clamp the result to 0. */
struct NbarResult {
  int value = 0;
  bool clamped = false;
};
NbarResult nbar(double eps, double gamma, int N0, double kappa, double tau,
                double C = 1.0);

/* Exhaustive soundness check of the cutoff: scan every offset 0 < |l| <= N
 * and every j in [1, j_max] with j_max chosen so that the splitting window
 * certifiably clears the threshold beyond it, count within-pair failures,
 * and how many failures fall outside cutoff_j_range's candidate set. A
 * sound cutoff reports outside == 0. */
struct CutoffAudit {
  long tested = 0;
  long failures = 0;
  long outside = 0;
  int j_max = 0;
};
CutoffAudit audit_cutoff(const NormalForm& nf, const ParamGrid& grid,
                         double gamma, double tau, int N, double eps,
                         double abs_e, double C = -1.0);

/* One perturbation size in a measurement sweep. */
struct MeasureInput {
  double eps = 1e-3;
  double gamma = 0.03;
  std::vector<NormalForm> families; /* per-iterate normal forms            */
  std::vector<int> N;               /* per-iterate scan radii              */
};

struct MeasureRow {
  double eps = 0.0, gamma = 0.0;
  int iterates = 0;
  double excluded_fraction = 0.0; /* 1 - |G & H & P| / |grid|             */
  double fraction_S = 0.0, fraction_O = 0.0, fraction_P = 0.0;
  long cutoff_certified = 0, cutoff_tested = 0;
};

/* Excluded fractions across the sweep. The monotone flag asserts the
 * fraction strictly decreases as eps decreases; a violation is reported in
 * the note, never thrown, so sweeps always produce their table. */
struct MeasureReport {
  std::vector<MeasureRow> rows;
  bool trend_checked = false;
  bool monotone = false;
  std::string note;
};
MeasureReport measure_report(const std::vector<MeasureInput>& runs,
                             const ParamGrid& grid, double tau,
                             double abs_e, double cutoff_C = -1.0);

}  // namespace qpnls
