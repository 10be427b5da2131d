#include "qpnls/kam.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <utility>

#include <Eigen/Dense>

namespace qpnls {

int schedule_N(const KamSchedule& sch, int nu) {
  if (nu < 0) return 1;
  const double v = std::pow(double(sch.N0), std::pow(sch.chi, double(nu)));
  if (!(v < double(1 << 30))) return 1 << 30;
  return int(v);
}

double default_jsplit(const std::array<double, 3>& omega, int d, double eps,
                      double abs_e) {
  double m = 0.0;
  for (int a = 0; a < d; ++a) m = std::max(m, std::abs(omega[a]));
  if (eps <= 0.0 || abs_e <= 0.0)
    return std::numeric_limits<double>::infinity();
  return 4.0 * m / (eps * abs_e);
}

namespace {

/* Divisor floor of the block pair ((sigma, jbar), (sigma', jbar')) at time
 * offset l: the second Melnikov thresholds at (gamma, tau). Within a pair
 * the divisors are i omega.l and i omega.l +- the pair splitting, hence the
 * <jbar>^{-1} weight; across pairs or components the leading separation is
 * |sigma jbar^2 - sigma' jbar'^2|, which vanishes only for the cross
 * component (0, 0) block whose actual divisor stays near 2 m0. */
double block_floor(int sigma, int jbar, int sigma2, int jbar2,
                   const std::array<int, 3>& l, int d, double gamma,
                   double tau) {
  const double tw = std::pow(double(time_weight(l, d)), tau);
  if (sigma == sigma2 && jbar == jbar2)
    return gamma / (tw * std::max(double(jbar), 1.0));
  const double w = std::abs(double(sigma) * jbar * jbar -
                            double(sigma2) * jbar2 * jbar2);
  return gamma * w / tw;
}

struct PairBlock {
  Eigen::MatrixXcd mat;
  cd mu[2];
  int size = 1;
  Eigen::Matrix2cd U, Uinv;
  bool have_U = false;
};

PairBlock make_pair_block(const NormalForm& nf, int sigma, int jbar) {
  PairBlock pb;
  pb.mat = normal_block(nf, sigma, jbar);
  const BlockEigen be = eigenvalues_of_block(nf, sigma, jbar);
  pb.mu[0] = be.mu_plus;
  pb.mu[1] = be.mu_minus;
  pb.size = int(pb.mat.rows());
  if (pb.size == 2) {
    const Eigen::Matrix2cd M = pb.mat;
    const Eigen::Matrix2cd U = diagonalizing_matrix(M, be.mu_plus, be.mu_minus);
    const cd det = U(0, 0) * U(1, 1) - U(0, 1) * U(1, 0);
    if (std::abs(det) > 1e-8) {
      Eigen::Matrix2cd Uinv;
      Uinv << U(1, 1) / det, -U(0, 1) / det, -U(1, 0) / det, U(0, 0) / det;
      Eigen::Matrix2cd Dg = Uinv * M * U;
      Dg(0, 0) -= be.mu_plus;
      Dg(1, 1) -= be.mu_minus;
      if (Dg.cwiseAbs().maxCoeff() <=
          1e-8 * (1.0 + M.cwiseAbs().maxCoeff())) {
        pb.U = U;
        pb.Uinv = Uinv;
        pb.have_U = true;
      }
    }
  }
  return pb;
}

}  // namespace

HomologicalSolution solve_homological(const NormalForm& nf,
                                      const BlockOperator& R, int N,
                                      const std::array<double, 3>& omega,
                                      double gamma, double tau,
                                      double jsplit) {
  if (nf.J != R.J || nf.d != R.d)
    throw UsageError("solve_homological: normal form and remainder disagree");
  const int d = R.d, J = R.J;
  HomologicalSolution out{BlockOperator(d, J, R.L), BlockOperator(d, J, R.L),
                          0.0, std::numeric_limits<double>::infinity()};

  std::array<std::vector<PairBlock>, 2> blocks;
  for (int si = 0; si < 2; ++si) {
    blocks[si].reserve(std::size_t(J + 1));
    for (int jb = 0; jb <= J; ++jb)
      blocks[si].push_back(make_pair_block(nf, si == 0 ? 1 : -1, jb));
  }
  const Eigen::MatrixXcd Dmat = assemble_diagonal(nf, 0).block({0, 0, 0});

  const TimeBox tb = R.tbox();
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    if (linf(l, d) > N) continue;
    const Eigen::MatrixXcd& Rl = R.mats[std::size_t(t)];
    if (Rl.cwiseAbs().maxCoeff() == 0.0) continue;
    Eigen::MatrixXcd& Psil = out.psi.mats[std::size_t(t)];
    const bool zero_l = l[0] == 0 && l[1] == 0 && l[2] == 0;
    const double wl = dot(omega, l, d);

    for (int si = 0; si < 2; ++si) {
      const int sigma = si == 0 ? 1 : -1;
      for (int si2 = 0; si2 < 2; ++si2) {
        const int sigma2 = si2 == 0 ? 1 : -1;
        for (int jb = 0; jb <= J; ++jb) {
          const PairBlock& BL = blocks[std::size_t(si)][std::size_t(jb)];
          const int rows[2] = {R.row(si, jb), R.row(si, -jb)};
          for (int jb2 = 0; jb2 <= J; ++jb2) {
            if (zero_l && si == si2 && jb == jb2) continue;
            const PairBlock& BR = blocks[std::size_t(si2)][std::size_t(jb2)];
            const int cols[2] = {R.row(si2, jb2), R.row(si2, -jb2)};
            const int n = BL.size, m = BR.size;

            Eigen::MatrixXcd Rb(n, m);
            double amp = 0.0;
            for (int a = 0; a < n; ++a)
              for (int b = 0; b < m; ++b) {
                Rb(a, b) = Rl(rows[a], cols[b]);
                amp = std::max(amp, std::abs(Rb(a, b)));
              }
            if (amp == 0.0) continue;

            const double floor =
                block_floor(sigma, jb, sigma2, jb2, l, d, gamma, tau);
            double gap = std::numeric_limits<double>::infinity();
            for (int a = 0; a < n; ++a)
              for (int b = 0; b < m; ++b)
                gap = std::min(gap,
                               std::abs(cd(0.0, wl) + BL.mu[a] - BR.mu[b]));
            if (gap < floor)
              throw SmallDivisorError("solve_homological", l, d, sigma, jb,
                                      sigma2, jb2, gap, floor);
            if (floor > 0.0)
              out.floor_margin = std::min(out.floor_margin, gap / floor);

            Eigen::MatrixXcd Psib;
            if (n == 2 && m == 2 && jb > jsplit && jb2 > jsplit &&
                BL.have_U && BR.have_U) {
              /* Both pairs are far in the large-mode regime: diagonalize the
               * two blocks once and divide entry by entry. */
              const Eigen::Matrix2cd G = BL.Uinv * Rb * BR.U;
              Eigen::Matrix2cd Y;
              for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                  Y(a, b) = G(a, b) / (cd(0.0, wl) + BL.mu[a] - BR.mu[b]);
              Psib = BL.U * Y * BR.Uinv;
            } else {
              Eigen::MatrixXcd A = BL.mat;
              for (int a = 0; a < n; ++a) A(a, a) += cd(0.0, wl);
              try {
                Psib = solve_sylvester_2x2(A, BR.mat, Rb, floor);
              } catch (const SmallDivisorError& e) {
                throw SmallDivisorError("solve_homological", l, d, sigma, jb,
                                        sigma2, jb2, e.divisor, floor);
              }
            }
            for (int a = 0; a < n; ++a)
              for (int b = 0; b < m; ++b) Psil(rows[a], cols[b]) = Psib(a, b);
          }
        }
      }
    }
    out.bracket.mats[std::size_t(t)] =
        cd(0.0, wl) * Psil + Dmat * Psil - Psil * Dmat;
  }

  /* A posteriori certificate: on the solved range the bracket must equal
   * the remainder outside the kernel blocks. */
  BlockOperator diff = out.bracket;
  OpSplit sp = time_truncate(R, N);
  diff -= sp.low;
  Eigen::MatrixXcd& D0 = diff.block({0, 0, 0});
  for (int si = 0; si < 2; ++si)
    for (int jb = 0; jb <= J; ++jb) {
      const int rr[2] = {R.row(si, jb), R.row(si, -jb)};
      const int nn = jb == 0 ? 1 : 2;
      for (int a = 0; a < nn; ++a)
        for (int b = 0; b < nn; ++b) D0(rr[a], rr[b]) = cd(0.0, 0.0);
    }
  out.residual = decay_norm(diff, 0.0) / (1.0 + decay_norm(sp.low, 0.0));
  return out;
}

namespace {

/* [Psi, X] truncated to the time half-width of X. */
BlockOperator ad_commutator(const BlockOperator& psi, const BlockOperator& x) {
  BlockOperator out = compose(psi, x, x.L);
  out -= compose(x, psi, x.L);
  return out;
}

/* Row-weighted copy of the component-diagonal channels: entry (j, j') of
 * channel (s, s) scaled by max(1, |j|). Bounding its decay norm certifies
 * the one-smoothing-order structure of the reduced remainder. */
BlockOperator diagonal_channel_weighted(const BlockOperator& A) {
  BlockOperator W(A.d, A.J, A.L);
  const TimeBox tb = A.tbox();
  for (long t = 0; t < tb.count(); ++t)
    for (int si = 0; si < 2; ++si)
      for (int j = -A.J; j <= A.J; ++j)
        for (int j2 = -A.J; j2 <= A.J; ++j2)
          W.mats[std::size_t(t)](A.row(si, j), A.row(si, j2)) =
              A.mats[std::size_t(t)](A.row(si, j), A.row(si, j2)) *
              std::max(1.0, std::abs(double(j)));
  return W;
}

}  // namespace

KamState kam_step(const KamState& state, const KamSchedule& sch) {
  const BlockOperator& R = state.R;
  if (R.J != state.nf.J || R.d != state.nf.d)
    throw UsageError("kam_step: state shape mismatch");
  const int d = R.d, J = R.J, L = R.L;
  const int N = schedule_N(sch, state.nu);
  const double gamma_nu =
      sch.gamma * (1.0 + std::pow(2.0, -double(state.nu)));
  const double jsplit = sch.jsplit >= 0.0
                            ? sch.jsplit
                            : default_jsplit(state.omega, d, sch.eps,
                                             sch.abs_e);

  OpSplit sp = time_truncate(R, N);

  /* Absorb the kernel of the truncated remainder into the normal form:
   * for each pair the four offset-zero entries of both component channels
   * give two estimates of the same correction. Their disagreement, the
   * imaginary mass of the diagonal entries and the conjugacy defect of the
   * off-diagonal pair are recorded before the structure is enforced. */
  NormalForm nf2 = state.nf;
  double sigma_cons = 0.0;
  {
    const Eigen::MatrixXcd& R0 = sp.low.block({0, 0, 0});
    for (int jb = 0; jb <= J; ++jb) {
      cd pp[2], mm[2], pm[2], mp[2];
      for (int si = 0; si < 2; ++si) {
        const double sg = si == 0 ? 1.0 : -1.0;
        const cd fac = cd(0.0, -sg);
        const cd e_pp = fac * R0(R.row(si, jb), R.row(si, jb));
        if (jb == 0) {
          pp[si] = e_pp;
          mm[si] = e_pp;
          pm[si] = cd(0.0, 0.0);
          mp[si] = cd(0.0, 0.0);
          continue;
        }
        const cd e_mm = fac * R0(R.row(si, -jb), R.row(si, -jb));
        const cd e_pm = fac * R0(R.row(si, jb), R.row(si, -jb));
        const cd e_mp = fac * R0(R.row(si, -jb), R.row(si, jb));
        if (si == 0) {
          pp[si] = e_pp;
          mm[si] = e_mm;
        } else {
          /* second channel carries the mirrored pair: (j, j) entry sits on
           * the (-j, -j) correction and vice versa */
          pp[si] = e_mm;
          mm[si] = e_pp;
        }
        pm[si] = e_pm;
        mp[si] = e_mp;
      }
      const cd dpp = 0.5 * (pp[0] + pp[1]);
      const cd dmm = 0.5 * (mm[0] + mm[1]);
      const cd dpm_raw = 0.25 * (pm[0] + pm[1] + std::conj(mp[0] + mp[1]));
      sigma_cons = std::max({sigma_cons, std::abs(pp[0] - pp[1]),
                             std::abs(mm[0] - mm[1]),
                             std::abs(pm[0] - pm[1]),
                             std::abs(dpp.imag()), std::abs(dmm.imag()),
                             std::abs(0.5 * (pm[0] + pm[1]) - dpm_raw)});
      PairCorrection& pc = nf2.at(jb);
      pc.r_pp += dpp.real();
      pc.r_mm += jb == 0 ? dpp.real() : dmm.real();
      if (jb > 0) pc.r_pm += dpm_raw;
    }
  }

  double drift = 0.0;
  for (int si = 0; si < 2; ++si)
    for (int jb = 0; jb <= J; ++jb) {
      const BlockEigen a = eigenvalues_of_block(state.nf, si == 0 ? 1 : -1, jb);
      const BlockEigen b = eigenvalues_of_block(nf2, si == 0 ? 1 : -1, jb);
      drift = std::max({drift, std::abs(a.mu_plus - b.mu_plus),
                        std::abs(a.mu_minus - b.mu_minus)});
    }

  HomologicalSolution hs = solve_homological(state.nf, sp.low, N, state.omega,
                                             gamma_nu, sch.tau, jsplit);
  const double psi_s0 = decay_norm(hs.psi, sch.s0);
  if (!(psi_s0 <= sch.smallness_gate))
    throw ReducibilityError(
        state.nu, "kam_step: generator norm " + std::to_string(psi_s0) +
                      " exceeds the smallness gate");

  /* Conjugated coefficient block: with H = [omega.d_phi + D, Psi],
   *
   *   e^{Psi} (omega.d_phi + D + R) e^{-Psi}
   *     = omega.d_phi + D + R - H
   *       - sum_{k>=1} ad_Psi^k(H) / (k+1)!  +  sum_{n>=1} ad_Psi^n(R) / n! ,
   *
   * and the new remainder is this block minus the updated diagonal. */
  BlockOperator K = assemble_diagonal(state.nf, L);
  K += R;
  K -= hs.bracket;
  const double r_scale = std::max(decay_norm(R, sch.s0), 1e-300);
  BlockOperator termH = hs.bracket;
  BlockOperator termR = R;
  bool series_done = false;
  for (int n = 1; n <= sch.series_cap; ++n) {
    termR = ad_commutator(hs.psi, termR);
    termR *= cd(1.0 / double(n), 0.0);
    K += termR;
    termH = ad_commutator(hs.psi, termH);
    termH *= cd(1.0 / double(n), 0.0);
    add_scaled(K, termH, cd(-1.0 / double(n + 1), 0.0));
    const double tn = std::max(decay_norm(termR, sch.s0),
                               decay_norm(termH, sch.s0) / double(n + 1));
    if (tn <= sch.series_rel_tol * r_scale) {
      series_done = true;
      break;
    }
  }
  if (!series_done)
    throw ReducibilityError(state.nu,
                            "kam_step: commutator series hit the term cap "
                            "before reaching tolerance");

  KamState next;
  next.nu = state.nu + 1;
  next.omega = state.omega;
  next.nf = nf2;
  next.R = std::move(K);
  next.R -= assemble_diagonal(nf2, L);
  next.chain = state.chain;
  {
    BlockOperator gen = hs.psi;
    gen *= cd(-1.0, 0.0);
    next.chain.steps.push_back(make_exp_transform(gen));
  }
  next.history = state.history;

  KamIterate row;
  row.nu = next.nu;
  row.N = N;
  row.R_s0 = decay_norm(next.R, sch.s0);
  row.R_sbeta = decay_norm(next.R, sch.s0 + sch.beta());
  row.max_re_mu = eigenvalue_reality_defect(nf2);
  row.psi_s0 = psi_s0;
  row.homological_residual = hs.residual;
  row.hamiltonian_defect_R = hamiltonian_defect(next.R);
  row.realness_defect_R = realness_defect(next.R);
  row.sigma_consistency = sigma_cons;
  row.eigenvalue_drift = drift;
  row.drift_bound = std::max(channel_decay_norm(R, 0, 0, sch.s0),
                             channel_decay_norm(R, 1, 1, sch.s0));
  row.diag_channel_norm =
      decay_norm(diagonal_channel_weighted(next.R), sch.s0);
  row.cross_channel_norm = std::max(channel_decay_norm(next.R, 0, 1, sch.s0),
                                    channel_decay_norm(next.R, 1, 0, sch.s0));
  const double prev = state.history.back().R_s0;
  row.quadratic_tripwire =
      prev > 0.0 && prev < 1e-3 && row.R_s0 > std::pow(prev, 1.2);
  next.history.push_back(row);
  return next;
}

KamResult reduce(const BlockOperator& L7, const NormalForm& nf0,
                 const std::array<double, 3>& omega, const KamSchedule& sch) {
  if (L7.J != nf0.J || L7.d != nf0.d)
    throw UsageError("reduce: operator and normal form disagree");
  KamResult out;
  KamState st;
  st.nu = 0;
  st.omega = omega;
  st.nf = nf0;
  st.R = L7;
  st.R -= assemble_diagonal(nf0, L7.L);
  if (sch.project_structure) {
    BlockOperator proj = structure_project(st.R);
    BlockOperator diff = st.R;
    diff -= proj;
    out.structure_projection = decay_norm(diff, sch.s0);
    st.R = std::move(proj);
  }

  KamIterate row0;
  row0.nu = 0;
  row0.N = 1;
  row0.R_s0 = decay_norm(st.R, sch.s0);
  row0.R_sbeta = decay_norm(st.R, sch.s0 + sch.beta());
  row0.max_re_mu = eigenvalue_reality_defect(nf0);
  row0.hamiltonian_defect_R = hamiltonian_defect(st.R);
  row0.realness_defect_R = realness_defect(st.R);
  st.history.push_back(row0);

  int stall = 0;
  try {
    while (true) {
      if (st.history.back().R_s0 <= sch.stop_tol) {
        out.converged = true;
        out.stop_reason = "remainder below stop_tol";
        break;
      }
      if (st.nu >= sch.max_iters) {
        out.stop_reason = "iteration budget exhausted";
        break;
      }
      const double prev = st.history.back().R_s0;
      st = kam_step(st, sch);
      stall = st.history.back().R_s0 >= prev ? stall + 1 : 0;
      if (stall >= 2) {
        out.stop_reason =
            "stagnation: remainder non-decreasing over two steps";
        break;
      }
    }
  } catch (const SmallDivisorError& e) {
    out.stop_reason = std::string("small divisor: ") + e.what();
  } catch (const ReducibilityError& e) {
    out.stop_reason = e.what();
  }
  out.state = std::move(st);
  out.decay_fit_constant = correction_decay_constant(out.state.nf, sch.eps);
  return out;
}

DecayReport check_decay_schedule(const std::vector<KamIterate>& history,
                                 const KamSchedule& sch, double threshold) {
  (void)sch;
  DecayReport rep;
  rep.threshold = threshold;
  std::vector<double> xs, ys;
  for (const KamIterate& row : history) {
    if (row.R_s0 <= 0.0) continue;
    xs.push_back(std::log(double(std::max(row.N, 1))));
    ys.push_back(std::log(row.R_s0));
  }
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  if (!xs.empty()) {
    xbar /= double(xs.size());
    ybar /= double(xs.size());
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  rep.sufficient_data = xs.size() >= 2 && sxx > 0.0;
  if (rep.sufficient_data) {
    rep.fitted_exponent = -sxy / sxx;
    rep.superlinear = rep.fitted_exponent >= threshold;
  }
  return rep;
}

}  // namespace qpnls
