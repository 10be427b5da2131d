#include "qpnls/melnikov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace qpnls {

namespace {

/* Shared pass rule: the inequality divisor >= threshold, with exact
 * resonances (divisor == 0) always failing. With gamma = 0 every threshold
 * vanishes and only the exact resonances are excluded. Vacuous tests bypass
 * this rule. */
bool passes(double divisor, double threshold) {
  return divisor > 0.0 && divisor >= threshold;
}

double jweight(int j) { return double(std::max(std::abs(j), 1)); }

double grid_omega_sup(const ParamGrid& grid) {
  double m = 0.0;
  for (long i = 0; i < grid.size(); ++i) {
    const std::array<double, 3>& w = grid.omega(i);
    for (int k = 0; k < grid.d; ++k) m = std::max(m, std::abs(w[k]));
  }
  return m;
}

/* Worst shift the pair corrections can apply to any block eigenvalue: the
 * corrections perturb a Hermitian core, so the shift is bounded by the
 * largest row sum of the correction entries. */
double correction_sup(const NormalForm& nf) {
  double m = 0.0;
  for (const PairCorrection& pc : nf.r)
    m = std::max(m, std::max(std::abs(pc.r_pp), std::abs(pc.r_mm)) +
                        std::abs(pc.r_pm));
  return m;
}

template <class F>
void for_each_offset(int d, int N, F&& fn) {
  const int n1 = d >= 2 ? N : 0, n2 = d >= 3 ? N : 0;
  std::array<int, 3> l{0, 0, 0};
  for (l[0] = -N; l[0] <= N; ++l[0])
    for (l[1] = -n1; l[1] <= n1; ++l[1])
      for (l[2] = -n2; l[2] <= n2; ++l[2]) fn(l);
}

/* Candidate j >= 1 whose splitting satisfies |w.l|/2 <= j b_j <= 2 |w.l|,
 * optionally capped at j <= cap (cap < 0 means uncapped). Below the
 * correction range the window test uses the exact per-pair splitting; above
 * it b is the constant 2 |Im m1|, so only the closed-form window needs
 * enumeration. */
void window_candidates(const NormalForm& nf, double wl, long cap,
                       std::vector<int>& out) {
  const double s = std::abs(nf.m1.imag());
  const long capJ = cap < 0 ? nf.J : std::min<long>(nf.J, cap);
  for (long j = 1; j <= capJ; ++j) {
    const double jb = double(j) * pair_splitting(nf, int(j));
    if (wl / 2.0 <= jb && jb <= 2.0 * wl) out.push_back(int(j));
  }
  if (s <= 0.0) return;
  const double b = 2.0 * s;
  long lo = std::max<long>(nf.J + 1, (long)std::floor(wl / (2.0 * b)) - 1);
  long hi = (long)std::ceil(2.0 * wl / b) + 1;
  if (cap >= 0) hi = std::min(hi, cap);
  if (hi - lo > (long)5e7)
    throw UsageError(
        "within-pair candidate window too large to enumerate; the splitting "
        "coefficient is too small for this offset range");
  for (long j = lo; j <= hi; ++j) {
    const double jb = double(j) * b;
    if (wl / 2.0 <= jb && jb <= 2.0 * wl) out.push_back(int(j));
  }
}

/* |i w.l + mu_{sigma,j} - mu_{sigma,-j}|. For |j| <= J both eigenvalues
 * come from the same pair block; beyond, the quadratic parts cancel exactly
 * and the difference is 2 i sigma |Im m1| j. */
double within_pair_divisor(const NormalForm& nf, double s, int sigma, int j,
                           double wl) {
  if (std::abs(j) <= nf.J) {
    const cd diff = eigenvalue_of(nf, sigma, j) - eigenvalue_of(nf, sigma, -j);
    return std::abs(cd(0.0, wl) + diff);
  }
  return std::abs(wl + double(sigma) * 2.0 * s * double(j));
}

/* Precomputed eigenvalue table for the S and P scans, indexed by sigma and
 * signed j within [-jmax, jmax]. */
struct EigenTable {
  int jmax = 0;
  std::vector<cd> mu;
  cd at(int sigma, int j) const {
    return mu[std::size_t(sigma == 1 ? 0 : 1) * std::size_t(2 * jmax + 1) +
              std::size_t(j + jmax)];
  }
};

EigenTable build_table(const NormalForm& nf, int jmax) {
  EigenTable tab;
  tab.jmax = jmax;
  tab.mu.resize(std::size_t(2) * std::size_t(2 * jmax + 1));
  for (int sigma : {1, -1})
    for (int j = -jmax; j <= jmax; ++j)
      tab.mu[std::size_t(sigma == 1 ? 0 : 1) * std::size_t(2 * jmax + 1) +
             std::size_t(j + jmax)] = eigenvalue_of(nf, sigma, j);
  return tab;
}

/* One grid point against every S-condition with offsets |l| <= N. Pairs
 * with weight w = |s j^2 - s' j'^2| above the offset's cap satisfy
 *   divisor >= m2 w - 2 |Im m1| w - 2|m0| - 2 rmax - |w.l| >= 2 gamma_n w
 * (the weight dominates max(|j|, |j'|) for every non-vacuous pair), so only
 * the finite box below the cap is tested. */
bool s_scan_point(const EigenTable& tab, const std::array<double, 3>& w, int d,
                  int N, double gn, double tau, double m0a, double rmax,
                  double denomS) {
  bool ok = true;
  for_each_offset(d, N, [&](const std::array<int, 3>& l) {
    if (!ok) return;
    const double wl = dot(w, l, d);
    const int wcap =
        (int)std::floor((std::abs(wl) + 2.0 * m0a + 2.0 * rmax) / denomS);
    if (wcap < 1) return;
    const double pw = std::pow(double(time_weight(l, d)), tau);
    const cd iwl(0.0, wl);
    for (int si : {1, -1})
      for (int s2 : {1, -1})
        for (int j = -wcap; j <= wcap; ++j) {
          const cd mu1 = tab.at(si, j);
          for (int j2 = -wcap; j2 <= wcap; ++j2) {
            const long wgt =
                std::labs((long)si * j * j - (long)s2 * j2 * j2);
            if (wgt == 0 || wgt > wcap) continue;
            const double div = std::abs(iwl + mu1 - tab.at(s2, j2));
            if (!passes(div, 2.0 * gn * double(wgt) / pw)) {
              ok = false;
              return;
            }
          }
        }
  });
  return ok;
}

/* One grid point against every first-order condition with offsets |l| <= N.
 * Beyond the offset's cap  j^2 (m2 - |Im m1| - 2 gamma_n) > |w.l| + |m0| +
 * rmax  certifies the pass. */
bool p_scan_point(const EigenTable& tab, const std::array<double, 3>& w, int d,
                  int N, double gn, double tau, double m0a, double rmax,
                  double denomP) {
  bool ok = true;
  for_each_offset(d, N, [&](const std::array<int, 3>& l) {
    if (!ok) return;
    const double wl = dot(w, l, d);
    const int jcap = (int)std::ceil(
        std::sqrt((std::abs(wl) + m0a + rmax + 1.0) / denomP));
    const double pw = std::pow(double(time_weight(l, d)), tau);
    const cd iwl(0.0, wl);
    for (int si : {1, -1})
      for (int j = -jcap; j <= jcap; ++j) {
        const double div = std::abs(iwl + tab.at(si, j));
        const double thr = 2.0 * gn * jweight(j) * jweight(j) / pw;
        if (!passes(div, thr)) {
          ok = false;
          return;
        }
      }
  });
  return ok;
}

/* One grid point against every within-pair condition with offsets
 * 0 < |l| <= N, testing only the cutoff candidates (or every j below the
 * cap when the cutoff is disabled). */
bool o_scan_point(const NormalForm& nf, double s,
                  const std::array<double, 3>& w, int d, int N, double gn,
                  double tau, const GoodSetOptions& opt, double C,
                  long& certified, long& tested) {
  bool ok = true;
  std::vector<int> cand;
  for_each_offset(d, N, [&](const std::array<int, 3>& l) {
    if (!ok || linf(l, d) == 0) return;
    const double wl = dot(w, l, d);
    const double pw = std::pow(double(time_weight(l, d)), tau);
    auto test = [&](int j) {
      ++tested;
      const double thr = 2.0 * gn / (pw * double(j));
      for (int sigma : {1, -1})
        if (!passes(within_pair_divisor(nf, s, sigma, j, wl), thr))
          return false;
      return true;
    };
    if (opt.use_cutoff) {
      cand.clear();
      if (opt.eps > 0.0 && opt.abs_e > 0.0) {
        const CutoffRange cr = cutoff_j_range(l, w, opt.eps, opt.abs_e, nf, C);
        certified += cr.certified;
        cand = cr.candidates;
      } else {
        /* No perturbation scale: the splitting window alone is finite. */
        window_candidates(nf, std::abs(wl), -1, cand);
      }
      for (int j : cand)
        if (!test(j)) {
          ok = false;
          return;
        }
    } else {
      if (!(opt.eps > 0.0) || !(opt.abs_e > 0.0))
        throw UsageError(
            "build_good_sets: disabling the cutoff requires positive eps and "
            "|e|");
      const long cap = (long)std::floor(
          std::min(C * double(linf(l, d)) / (opt.eps * opt.abs_e),
                   double(1L << 30)));
      if (cap > (1L << 22))
        throw UsageError(
            "build_good_sets: cutoff disabled with an enormous scan range; "
            "enable the cutoff or shrink C, the offsets, or grow eps");
      for (long j = 1; j <= cap; ++j)
        if (!test(int(j))) {
          ok = false;
          return;
        }
    }
  });
  return ok;
}

}  // namespace

cd eigenvalue_of(const NormalForm& nf, int sigma, int j) {
  if (sigma != 1 && sigma != -1)
    throw UsageError("eigenvalue_of: sigma must be +1 or -1");
  const int jbar = std::abs(j);
  if (jbar <= nf.J) {
    const BlockEigen be = eigenvalues_of_block(nf, sigma, jbar);
    return j >= 0 ? be.mu_plus : be.mu_minus;
  }
  const double base = -nf.m2 * double(j) * double(j) + nf.m0;
  const double slope = std::abs(nf.m1.imag());
  return cd(0.0, double(sigma) * (base + slope * double(j)));
}

ResonanceQuery melnikov_test(ResonanceKind kind, const NormalForm& nf,
                             const std::array<double, 3>& omega,
                             const std::array<int, 3>& l, int sigma, int j,
                             int sigma2, int j2, double gamma, double tau) {
  if (gamma < 0.0) throw UsageError("melnikov_test: gamma must be >= 0");
  if ((sigma != 1 && sigma != -1) || (sigma2 != 1 && sigma2 != -1))
    throw UsageError("melnikov_test: sigma labels must be +1 or -1");
  ResonanceQuery q;
  q.kind = kind;
  q.l = l;
  q.sigma = sigma;
  q.j = j;
  q.sigma2 = sigma2;
  q.j2 = j2;
  q.gamma = gamma;
  q.tau = tau;
  const int d = nf.d;
  const double wl = dot(omega, l, d);
  const double pw = std::pow(double(time_weight(l, d)), tau);
  bool vacuous = false;
  switch (kind) {
    case ResonanceKind::diophantine: {
      if (linf(l, d) == 0)
        throw UsageError("melnikov_test: the diophantine test requires l != 0");
      q.divisor = std::abs(wl);
      q.threshold = gamma / pw;
      break;
    }
    case ResonanceKind::second_melnikov_S: {
      const long wgt = std::labs((long)sigma * j * j - (long)sigma2 * j2 * j2);
      q.divisor = std::abs(cd(0.0, wl) + eigenvalue_of(nf, sigma, j) -
                           eigenvalue_of(nf, sigma2, j2));
      q.threshold = 2.0 * gamma * double(wgt) / pw;
      vacuous = wgt == 0;
      break;
    }
    case ResonanceKind::second_melnikov_O: {
      if (linf(l, d) == 0)
        throw UsageError(
            "melnikov_test: the within-pair test requires l != 0");
      if (sigma2 != sigma || (j2 != j && j2 != -j))
        throw UsageError(
            "melnikov_test: the within-pair test requires sigma' = sigma and "
            "j' = +-j");
      q.divisor = std::abs(cd(0.0, wl) + eigenvalue_of(nf, sigma, j) -
                           eigenvalue_of(nf, sigma2, j2));
      q.threshold = 2.0 * gamma / (pw * jweight(j));
      break;
    }
    case ResonanceKind::first_melnikov_P: {
      q.divisor = std::abs(cd(0.0, wl) + eigenvalue_of(nf, sigma, j));
      q.threshold = 2.0 * gamma * jweight(j) * jweight(j) / pw;
      break;
    }
  }
  q.pass = vacuous || passes(q.divisor, q.threshold);
  return q;
}

std::vector<char> diophantine_mask(const ParamGrid& grid, double gamma0,
                                   double tau0, int L_max) {
  if (L_max < 1) throw UsageError("diophantine_mask: L_max must be >= 1");
  if (gamma0 < 0.0) throw UsageError("diophantine_mask: gamma0 must be >= 0");
  const int d = grid.d;
  std::vector<char> mask(std::size_t(grid.size()), 1);
  for (long i = 0; i < grid.size(); ++i) {
    const std::array<double, 3>& w = grid.omega(i);
    bool ok = true;
    for_each_offset(d, L_max, [&](const std::array<int, 3>& l) {
      if (!ok) return;
      const int ll = linf(l, d);
      if (ll == 0) return;
      if (!passes(std::abs(dot(w, l, d)), gamma0 / std::pow(double(ll), tau0)))
        ok = false;
    });
    mask[std::size_t(i)] = ok ? 1 : 0;
  }
  return mask;
}

CutoffRange cutoff_j_range(const std::array<int, 3>& l,
                           const std::array<double, 3>& omega, double eps,
                           double abs_e, const NormalForm& nf, double C) {
  CutoffRange out;
  const int ll = linf(l, nf.d);
  if (ll == 0) return out; /* the within-pair condition needs l != 0 */
  if (!(eps > 0.0) || !(abs_e > 0.0) || !(C > 0.0))
    throw UsageError("cutoff_j_range: eps, |e| and C must be positive");
  out.j_cap = (int)std::floor(
      std::min(C * double(ll) / (eps * abs_e), double(1L << 30)));
  const double wl = std::abs(dot(omega, l, nf.d));
  window_candidates(nf, wl, out.j_cap, out.candidates);
  out.certified = (long)out.j_cap - (long)out.candidates.size();
  return out;
}

GoodSets build_good_sets(const std::vector<NormalForm>& families,
                         const ParamGrid& grid, const GoodSetOptions& opt) {
  if (families.empty())
    throw UsageError("build_good_sets: need at least one normal form family");
  if (opt.N.empty())
    throw UsageError("build_good_sets: the offset schedule must not be empty");
  if (opt.gamma < 0.0 || !(opt.tau > 0.0))
    throw UsageError("build_good_sets: gamma must be >= 0 and tau > 0");
  for (const NormalForm& nf : families)
    if (nf.d != grid.d)
      throw UsageError(
          "build_good_sets: normal form and grid dimension mismatch");
  const int d = grid.d;
  const std::size_t P = std::size_t(grid.size());
  const int M = (int)families.size();
  GoodSets out;
  out.G.assign(std::size_t(M) + 1, std::vector<char>(P, 1));
  out.H.assign(std::size_t(M) + 1, std::vector<char>(P, 1));
  out.P.assign(std::size_t(M) + 1, std::vector<char>(P, 1));
  out.excluded.assign(std::size_t(M), GoodSets::Counts{});
  const double wsup = grid_omega_sup(grid);
  const double C = opt.cutoff_C > 0.0 ? opt.cutoff_C : 4.0 * wsup;

  for (int n = 0; n < M; ++n) {
    const NormalForm& nf = families[std::size_t(n)];
    const double gn = (1.0 + std::pow(2.0, -double(n))) * opt.gamma;
    const int Nn = opt.N[std::min<std::size_t>(std::size_t(n),
                                               opt.N.size() - 1)];
    if (Nn < 1)
      throw UsageError("build_good_sets: offset radii must be >= 1");
    const double s = std::abs(nf.m1.imag());
    const double rmax = correction_sup(nf);
    const double m0a = std::abs(nf.m0);
    const double denomS = nf.m2 - 2.0 * s - 2.0 * gn;
    const double denomP = nf.m2 - s - 2.0 * gn;
    if (denomS <= 0.0 || denomP <= 0.0)
      throw UsageError(
          "build_good_sets: gamma too large for the scan certificates "
          "(m2 - 2 |Im m1| - 2 gamma_n must stay positive)");
    const double wlsup = double(Nn) * double(d) * wsup;
    const int wcap_all =
        (int)std::floor((wlsup + 2.0 * m0a + 2.0 * rmax) / denomS);
    const int pcap_all =
        (int)std::ceil(std::sqrt((wlsup + m0a + rmax + 1.0) / denomP));
    const EigenTable tab =
        build_table(nf, std::max({wcap_all, pcap_all, nf.J, 1}));

    for (std::size_t i = 0; i < P; ++i) {
      const std::array<double, 3>& w = grid.omega(long(i));
      if (out.G[std::size_t(n)][i]) {
        const bool ok =
            s_scan_point(tab, w, d, Nn, gn, opt.tau, m0a, rmax, denomS);
        out.G[std::size_t(n) + 1][i] = ok ? 1 : 0;
        if (!ok) ++out.excluded[std::size_t(n)].S_fail;
      } else {
        out.G[std::size_t(n) + 1][i] = 0;
      }
      if (out.H[std::size_t(n)][i]) {
        const bool ok =
            o_scan_point(nf, s, w, d, Nn, gn, opt.tau, opt, C,
                         out.cutoff_certified, out.cutoff_tested);
        out.H[std::size_t(n) + 1][i] = ok ? 1 : 0;
        if (!ok) ++out.excluded[std::size_t(n)].O_fail;
      } else {
        out.H[std::size_t(n) + 1][i] = 0;
      }
      if (out.P[std::size_t(n)][i]) {
        const bool ok =
            p_scan_point(tab, w, d, Nn, gn, opt.tau, m0a, rmax, denomP);
        out.P[std::size_t(n) + 1][i] = ok ? 1 : 0;
        if (!ok) ++out.excluded[std::size_t(n)].P_fail;
      } else {
        out.P[std::size_t(n) + 1][i] = 0;
      }
    }
  }
  out.all.assign(P, 1);
  for (std::size_t i = 0; i < P; ++i)
    out.all[i] = char(out.G[std::size_t(M)][i] & out.H[std::size_t(M)][i] &
                      out.P[std::size_t(M)][i]);
  return out;
}

NbarResult nbar(double eps, double gamma, int N0, double kappa, double tau,
                double C) {
  if (!(eps > 0.0) || !(gamma > 0.0) || !(C > 0.0))
    throw UsageError("nbar: eps, gamma and C must be positive");
  if (N0 < 2) throw UsageError("nbar: N0 must be at least 2");
  if (!(kappa > tau + 3.0))
    throw UsageError("nbar: kappa must exceed tau + 3");
  NbarResult out;
  const double inner = std::log(1.0 / (C * gamma * eps));
  if (inner <= 0.0) {
    out.clamped = true;
    return out;
  }
  const double bracket = inner / ((kappa - tau - 3.0) * std::log(double(N0)));
  const double v = std::log(bracket) / std::log(1.5);
  out.value = v <= 0.0 ? 0 : (int)std::ceil(v);
  return out;
}

CutoffAudit audit_cutoff(const NormalForm& nf, const ParamGrid& grid,
                         double gamma, double tau, int N, double eps,
                         double abs_e, double C) {
  if (N < 1) throw UsageError("audit_cutoff: N must be >= 1");
  if (!(eps > 0.0) || !(abs_e > 0.0))
    throw UsageError("audit_cutoff: eps and |e| must be positive");
  if (!(gamma > 0.0)) throw UsageError("audit_cutoff: gamma must be positive");
  if (nf.d != grid.d)
    throw UsageError("audit_cutoff: normal form and grid dimension mismatch");
  const int d = nf.d;
  const double s = std::abs(nf.m1.imag());
  if (!(s > 0.0))
    throw UsageError(
        "audit_cutoff: vanishing first-order coefficient, the within-pair "
        "scan has no finite certificate");
  const double wsup = grid_omega_sup(grid);
  const double Cc = C > 0.0 ? C : 4.0 * wsup;
  const double wlsup = double(N) * double(d) * wsup;
  /* Beyond j_max the splitting exceeds every |w.l| on the scan by more than
   * the largest threshold 2 gamma, so the divisor clears it. */
  const long jmax = std::max<long>(
      nf.J, (long)std::ceil((wlsup + 2.0 * gamma) / (2.0 * s)) + 1);
  CutoffAudit out;
  out.j_max = int(std::min<long>(jmax, 1L << 30));
  for (long i = 0; i < grid.size(); ++i) {
    const std::array<double, 3>& w = grid.omega(i);
    for_each_offset(d, N, [&](const std::array<int, 3>& l) {
      if (linf(l, d) == 0) return;
      const CutoffRange cr = cutoff_j_range(l, w, eps, abs_e, nf, Cc);
      const double wl = dot(w, l, d);
      const double pw = std::pow(double(time_weight(l, d)), tau);
      for (long j = 1; j <= out.j_max; ++j) {
        ++out.tested;
        const double thr = 2.0 * gamma / (pw * double(j));
        bool fail = false;
        for (int sigma : {1, -1})
          if (!passes(within_pair_divisor(nf, s, sigma, int(j), wl), thr))
            fail = true;
        if (!fail) continue;
        ++out.failures;
        if (!std::binary_search(cr.candidates.begin(), cr.candidates.end(),
                                int(j)))
          ++out.outside;
      }
    });
  }
  return out;
}

MeasureReport measure_report(const std::vector<MeasureInput>& runs,
                             const ParamGrid& grid, double tau, double abs_e,
                             double cutoff_C) {
  MeasureReport rep;
  if (runs.empty())
    throw UsageError("measure_report: at least one run required");
  const double P = double(grid.size());
  for (const MeasureInput& run : runs) {
    GoodSetOptions opt;
    opt.gamma = run.gamma;
    opt.tau = tau;
    opt.N = run.N;
    opt.eps = run.eps;
    opt.abs_e = abs_e;
    opt.cutoff_C = cutoff_C;
    const GoodSets gs = build_good_sets(run.families, grid, opt);
    auto deficit = [&](const std::vector<char>& mask) {
      long kept = 0;
      for (char c : mask) kept += c != 0;
      return 1.0 - double(kept) / P;
    };
    MeasureRow row;
    row.eps = run.eps;
    row.gamma = run.gamma;
    row.iterates = int(run.families.size());
    row.excluded_fraction = deficit(gs.all);
    row.fraction_S = deficit(gs.G.back());
    row.fraction_O = deficit(gs.H.back());
    row.fraction_P = deficit(gs.P.back());
    row.cutoff_certified = gs.cutoff_certified;
    row.cutoff_tested = gs.cutoff_tested;
    rep.rows.push_back(row);
  }
  if (rep.rows.size() < 2) {
    rep.trend_checked = false;
    rep.note = "single perturbation size: trend check skipped";
    return rep;
  }
  /* Order by decreasing eps and require the excluded fraction to shrink
   * strictly along it. */
  std::vector<std::size_t> order(rep.rows.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return rep.rows[a].eps > rep.rows[b].eps;
  });
  rep.trend_checked = true;
  rep.monotone = true;
  std::ostringstream note;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    const MeasureRow& hi = rep.rows[order[k]];
    const MeasureRow& lo = rep.rows[order[k + 1]];
    if (!(lo.excluded_fraction < hi.excluded_fraction)) {
      rep.monotone = false;
      note << "excluded fraction does not strictly decrease from eps="
           << hi.eps << " (" << hi.excluded_fraction << ") to eps=" << lo.eps
           << " (" << lo.excluded_fraction << "); ";
    }
  }
  rep.note = note.str();
  return rep;
}

}  // namespace qpnls
