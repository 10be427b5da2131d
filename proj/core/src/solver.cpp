#include "qpnls/solver.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Dense>

#include "qpnls/melnikov.hpp"

namespace qpnls {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

ScaleStep scale_schedule(int N0, int n, long cap) {
  if (N0 < 2) throw UsageError("scale_schedule: N0 >= 2 required");
  if (n < 0) throw UsageError("scale_schedule: n >= 0 required");
  if (cap < 2) throw UsageError("scale_schedule: cap >= 2 required");
  const double expo = std::pow(1.5, double(n));
  if (expo * std::log(double(N0)) > std::log(double(cap)) + 1e-12)
    return ScaleStep{cap, true};
  const long value = long(std::floor(std::pow(double(N0), expo) + 1e-9));
  if (value > cap) return ScaleStep{cap, true};
  return ScaleStep{value, false};
}

NormalFormInverse invert_normal_form(const NormalForm& nf,
                                     const std::array<double, 3>& omega,
                                     const TorusFunction& g, double gamma,
                                     double tau, double divisor_floor) {
  if (g.ncomp != 2)
    throw UsageError("invert_normal_form: 2-component state expected");
  if (g.d != nf.d) throw UsageError("invert_normal_form: dimension mismatch");
  if (gamma < 0.0 || tau <= 0.0 || divisor_floor < 0.0)
    throw UsageError(
        "invert_normal_form: gamma >= 0, tau > 0, divisor_floor >= 0 "
        "required");

  NormalFormInverse out;
  out.h = TorusFunction(g.d, g.N, 2, g.tag);
  out.min_divisor = kInf;
  out.min_floor_margin = kInf;

  const TimeBox box = g.tbox();
  const cd zero(0.0, 0.0);

  auto meet = [&](double dv, double floor_, const std::array<int, 3>& l,
                  int sigma, int j, int j2) {
    if (dv < floor_)
      throw SmallDivisorError("invert_normal_form", l, g.d, sigma, j, sigma,
                              j2, dv, floor_);
    out.min_divisor = std::min(out.min_divisor, dv);
    out.min_floor_margin =
        std::min(out.min_floor_margin, floor_ > 0.0 ? dv / floor_ : kInf);
  };

  for (int s = 0; s < 2; ++s) {
    const int sigma = (s == 0) ? 1 : -1;
    for (int jb = 0; jb <= g.N; ++jb) {
      const double jw = double(std::max(jb, 1));
      const bool stored = jb <= nf.J;

      /* per-pair data shared across time offsets */
      cd B00, B01, B10, B11, mu_p, mu_m;
      if (jb == 0) {
        mu_p = normal_block(nf, sigma, 0)(0, 0);
      } else if (stored) {
        const Eigen::MatrixXcd B = normal_block(nf, sigma, jb);
        B00 = B(0, 0);
        B01 = B(0, 1);
        B10 = B(1, 0);
        B11 = B(1, 1);
        const BlockEigen be = eigenvalues_of_block(nf, sigma, jb);
        mu_p = be.mu_plus;
        mu_m = be.mu_minus;
      } else {
        mu_p = eigenvalue_of(nf, sigma, jb);
        mu_m = eigenvalue_of(nf, sigma, -jb);
      }

      for (long tf = 0; tf < box.count(); ++tf) {
        const std::array<int, 3> l = box.unflatten(tf);
        const cd iwl(0.0, dot(omega, l, g.d));
        const double floor_ =
            std::max(divisor_floor,
                     gamma * jw * jw /
                         std::pow(double(time_weight(l, g.d)), tau));

        if (jb == 0) {
          const cd rhs = g.at(s, l, 0);
          if (rhs == zero) continue;
          const cd den = iwl + mu_p;
          meet(std::abs(den), floor_, l, sigma, 0, 0);
          const cd hv = rhs / den;
          out.h.at(s, l, 0) = hv;
          out.max_block_residual =
              std::max(out.max_block_residual,
                       std::abs(den * hv - rhs) / std::abs(rhs));
          ++out.blocks;
          continue;
        }

        if (!stored) {
          for (int sj = 0; sj < 2; ++sj) {
            const int j = sj == 0 ? jb : -jb;
            const cd rhs = g.at(s, l, j);
            if (rhs == zero) continue;
            const cd den = iwl + (sj == 0 ? mu_p : mu_m);
            meet(std::abs(den), floor_, l, sigma, j, j);
            const cd hv = rhs / den;
            out.h.at(s, l, j) = hv;
            out.max_block_residual =
                std::max(out.max_block_residual,
                         std::abs(den * hv - rhs) / std::abs(rhs));
            ++out.blocks;
          }
          continue;
        }

        const cd rp = g.at(s, l, jb);
        const cd rm = g.at(s, l, -jb);
        if (rp == zero && rm == zero) continue;
        meet(std::abs(iwl + mu_p), floor_, l, sigma, jb, -jb);
        meet(std::abs(iwl + mu_m), floor_, l, sigma, -jb, jb);

        const cd M00 = iwl + B00, M11 = iwl + B11;
        const cd det = M00 * M11 - B01 * B10;
        const cd hp = (M11 * rp - B01 * rm) / det;
        const cd hm = (M00 * rm - B10 * rp) / det;
        out.h.at(s, l, jb) = hp;
        out.h.at(s, l, -jb) = hm;
        const double rn = std::max(std::abs(rp), std::abs(rm));
        const double resid = std::max(std::abs(M00 * hp + B01 * hm - rp),
                                      std::abs(B10 * hp + M11 * hm - rm));
        out.max_block_residual = std::max(out.max_block_residual, resid / rn);
        ++out.blocks;
      }
    }
  }
  if (out.blocks == 0) {
    out.min_divisor = 0.0;
    out.min_floor_margin = 0.0;
  }
  return out;
}

ConjugationChains conjugation_chains(const RegularizationResult& reg,
                                     const TransformChain& kam_chain) {
  ConjugationChains out;
  out.W1 = reg.V1;
  out.W2 = reg.V2;
  out.W1.steps.insert(out.W1.steps.end(), kam_chain.steps.begin(),
                      kam_chain.steps.end());
  out.W2.steps.insert(out.W2.steps.end(), kam_chain.steps.begin(),
                      kam_chain.steps.end());
  return out;
}

LinearizedInverse invert_L(const LinOp& L, const ConjugationChains& chains,
                           const NormalForm& nf,
                           const std::array<double, 3>& omega,
                           const TorusFunction& g, double gamma, double tau,
                           double s0, double divisor_floor) {
  LinearizedInverse out;
  const TorusFunction g1 = inverse(chains.W1, g);
  out.diagonal_stage =
      invert_normal_form(nf, omega, g1, gamma, tau, divisor_floor);
  out.h = forward(chains.W2, out.diagonal_stage.h);

  TorusFunction r = apply(L, out.h);
  r -= g;
  out.residual_s0 = sobolev_norm(r, s0);
  const double gref = sobolev_norm(g, s0 + 2.0);
  out.residual_rel = gref > 0.0 ? out.residual_s0 / gref : out.residual_s0;
  const double gtame = sobolev_norm(g, s0 + 2.0 * tau + 5.0);
  out.tame_ratio =
      gtame > 0.0 ? sobolev_norm(out.h, s0) * gamma / gtame : 0.0;
  return out;
}

void validate(const SolverConfig& cfg) {
  if (cfg.model.d < 1 || cfg.model.d > 3)
    throw UsageError("solver config: d in {1, 2, 3} required");
  if (cfg.model.epsilon < 0.0)
    throw UsageError("solver config: epsilon >= 0 required");
  if (cfg.a <= 0.0 || cfg.a >= 1.0)
    throw UsageError("solver config: gamma exponent a in (0, 1) required");
  if (cfg.tau <= 0.0 || cfg.tau0 <= 0.0)
    throw UsageError("solver config: tau and tau0 must be positive");
  if (cfg.tol <= 0.0) throw UsageError("solver config: tol > 0 required");
  if (cfg.N0 < 2) throw UsageError("solver config: N0 >= 2 required");
  if (cfg.N_cap < cfg.N0)
    throw UsageError("solver config: N_cap >= N0 required");
  if (cfg.max_iters < 1)
    throw UsageError("solver config: max_iters >= 1 required");
  if (cfg.s0 <= 0.0) throw UsageError("solver config: s0 > 0 required");
  if (cfg.state_N < 1)
    throw UsageError("solver config: state_N >= 1 required");
  if (cfg.divisor_floor < 0.0)
    throw UsageError("solver config: divisor_floor >= 0 required");
  if (cfg.tame_cap <= 0.0)
    throw UsageError("solver config: tame_cap > 0 required");
  if (cfg.dioph_L < 1)
    throw UsageError("solver config: dioph_L >= 1 required");
  if (cfg.omegas.empty() && cfg.grid_points < 1)
    throw UsageError(
        "solver config: either explicit omegas or grid_points >= 1 required");
}

IncrementFit fit_increments(const std::vector<NewtonRecord>& iterates) {
  IncrementFit out;
  std::vector<double> xs, ys;
  for (const NewtonRecord& r : iterates) {
    if (r.increment_s0 > 0.0 && r.N_next >= 2) {
      xs.push_back(std::log(double(r.N_next)));
      ys.push_back(std::log(r.increment_s0));
    }
  }
  const std::size_t n = xs.size();
  if (n < 2) return out;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) return out;
  const double slope = sxy / sxx;
  out.sufficient_data = true;
  out.exponent = -slope;
  out.constant = std::exp(my - slope * mx);
  return out;
}

namespace {

/* Pi_N of a state, kept on its original box. */
TorusFunction project_back(const TorusFunction& f, long Ncut) {
  if (Ncut >= f.N) return f;
  return embed(project(f, int(Ncut)).low, f.N);
}

}  // namespace

SolveResult nash_moser_run(const SolverConfig& cfg) {
  validate(cfg);
  const int d = cfg.model.d;
  const double gamma = cfg.gamma();

  SolveResult out;
  out.gamma = gamma;

  /* frequency sample: explicit list or uniform grid */
  ParamGrid grid;
  if (!cfg.omegas.empty()) {
    grid.d = d;
    grid.per_axis = int(cfg.omegas.size());
    grid.lo = cfg.grid_lo;
    grid.hi = cfg.grid_hi;
    grid.omegas = cfg.omegas;
  } else {
    grid = ParamGrid::make(d, cfg.grid_points, cfg.grid_lo, cfg.grid_hi);
  }
  out.omegas = grid.omegas;
  const long P = grid.size();

  const double g0 = cfg.gamma0 < 0.0 ? gamma : cfg.gamma0;
  std::vector<char> alive = diophantine_mask(grid, g0, cfg.tau0, cfg.dioph_L);
  out.masks.assign(std::size_t(cfg.max_iters) + 1, alive);

  const auto nl = make_nonlinearity(cfg.model.plugin);
  KamSchedule sch = cfg.kam;
  sch.gamma = gamma;
  sch.tau = cfg.tau;
  sch.eps = cfg.model.epsilon;
  sch.abs_e = std::abs(forcing_average(*nl, d));

  out.runs.resize(P);
  long converged_count = 0;

  for (long k = 0; k < P; ++k) {
    OmegaRun& run = out.runs[std::size_t(k)];
    run.omega = grid.omega(k);
    run.u = TorusFunction(d, cfg.state_N, 1, Reality::complex_valued);
    if (!alive[std::size_t(k)]) {
      run.drop_reason = "diophantine prescreen";
      run.drop_iterate = 0;
      continue;
    }

    const std::array<double, 3>& w = run.omega;
    TransformChain prev_kam;
    bool have_prev = false;

    auto drop = [&](int n, const std::string& why) {
      run.drop_reason = why;
      run.drop_iterate = n;
      for (int r = n + 1; r <= cfg.max_iters; ++r)
        out.masks[std::size_t(r)][std::size_t(k)] = 0;
    };

    for (int n = 0;; ++n) {
      const TorusFunction F = residual_F(cfg.model, *nl, w, run.u);
      run.final_residual = sobolev_norm(F, cfg.s0);
      if (run.final_residual <= cfg.tol) {
        run.converged = true;
        break;
      }
      if (n >= cfg.max_iters) break;

      const ScaleStep Nn = scale_schedule(cfg.N0, n + 1, cfg.N_cap);

      RegularizationResult reg;
      try {
        reg = regularize(cfg.model, *nl, w, run.u, cfg.reg);
      } catch (const std::exception& e) {
        drop(n, std::string("regularize: ") + e.what());
        break;
      }

      /* warm start: pull the new operator through the previous generators
       * so the fresh reduction only has to handle the increment */
      BlockOperator L7w = reg.L7;
      TransformChain prefix;
      if (cfg.warm_start && have_prev) {
        try {
          for (const Transformation& st : prev_kam.steps)
            L7w = exp_conjugate(L7w, st.generator, w, 1.0,
                                sch.series_rel_tol, sch.series_cap);
          prefix = prev_kam;
        } catch (const std::exception&) {
          L7w = reg.L7;
          prefix.steps.clear();
        }
      }

      const NormalForm nf0 =
          initial_normal_form(d, cfg.reg.J, reg.m2, reg.m1, reg.m0);
      KamResult red;
      try {
        red = reduce(L7w, nf0, w, sch);
      } catch (const std::exception& e) {
        drop(n, std::string("reduce: ") + e.what());
        break;
      }
      if (!red.converged) {
        drop(n, "reduce: " + red.stop_reason);
        break;
      }

      TransformChain kam_full = prefix;
      kam_full.steps.insert(kam_full.steps.end(),
                            red.state.chain.steps.begin(),
                            red.state.chain.steps.end());
      const ConjugationChains chains = conjugation_chains(reg, kam_full);

      /* Newton right-hand side on the doubled phase space. The linearized
       * operator maps conjugate-pair states to conjugate-pair images and
       * realizes h |-> -i dF[h] on the first component, so the datum lifts
       * as the conjugate pair of -i F. */
      TorusFunction g1 = F;
      g1 *= cd(0.0, -1.0);
      g1 = project_back(g1, Nn.value);
      const TorusFunction g = make_conjugate_pair(g1);
      const LinOp L = linearized_operator(cfg.model, *nl, w, run.u, cfg.reg.J,
                                          cfg.reg.L, cfg.reg.Nf);
      LinearizedInverse inv;
      try {
        inv = invert_L(L, chains, red.state.nf, w, g, gamma, cfg.tau, cfg.s0,
                       cfg.divisor_floor);
      } catch (const SmallDivisorError& e) {
        drop(n, std::string("inversion: ") + e.what());
        break;
      }
      if (!std::isfinite(inv.tame_ratio) || inv.tame_ratio > cfg.tame_cap) {
        drop(n, "inversion: tame ratio above cap");
        break;
      }

      const TorusFunction h = project_back(inv.h.component(0), Nn.value);
      run.u -= h;
      NewtonRecord rec;
      rec.n = n;
      rec.N_next = Nn.value;
      rec.residual_s0 = run.final_residual;
      rec.increment_s0 = sobolev_norm(h, cfg.s0);
      rec.tame_ratio = inv.tame_ratio;
      rec.inversion_residual = inv.residual_rel;
      rec.min_floor_margin = inv.diagonal_stage.min_floor_margin;
      rec.kam_remainder = red.state.history.back().R_s0;
      rec.kam_iters = red.state.nu;
      /* structural diagnostic: with a conjugate-pair datum the solved
       * doubled state should stay on the conjugate-pair class */
      {
        TorusFunction pair = inv.h;
        pair.tag = Reality::conjugate_pair;
        rec.reality_drift = reality_defect(pair);
      }
      run.iterates.push_back(rec);

      run.nf = red.state.nf;
      run.chains = chains;
      prev_kam = kam_full;
      have_prev = true;

      if (Nn.capped) break; /* schedule exhausted */
    }

    run.survived = run.drop_reason.empty();
    run.increment_fit = fit_increments(run.iterates);
    if (run.survived && run.converged) ++converged_count;
  }

  for (char a : out.masks.back()) out.survivors += (a != 0);
  if (out.survivors == 0)
    out.outcome = "no-parameters-survive";
  else if (converged_count == out.survivors)
    out.outcome = "converged";
  else
    out.outcome = "partial";
  return out;
}

CollocationCheck verify_solution(const ModelParams& mp, const Nonlinearity& nl,
                                 const std::array<double, 3>& omega,
                                 const TorusFunction& u, int points,
                                 Rng& rng) {
  if (points < 1) throw UsageError("verify_solution: points >= 1 required");

  const TorusFunction u0 = (u.ncomp == 2) ? u.component(0) : u;
  const int Nbig = 3 * u0.N + 4;
  const NonlinearityEval ev = nl.eval(u0, Nbig);
  const TorusFunction du = derivative(u0, Deriv::omega_dphi, omega);
  const TorusFunction uxx = derivative(derivative(u0, Deriv::x), Deriv::x);
  const TorusFunction f0 = ev.f.component(0);

  CollocationCheck out;
  out.points = points;
  for (int p = 0; p < points; ++p) {
    std::array<double, 3> phi{0.0, 0.0, 0.0};
    for (int a = 0; a < u.d; ++a) phi[a] = rng.uniform(0.0, kTwoPi);
    const double x = rng.uniform(0.0, kTwoPi);
    const cd lhs = cd(0.0, 1.0) * eval_at(du, 0, phi, x);
    const cd rhs = eval_at(uxx, 0, phi, x) +
                   cd(mp.m, 0.0) * eval_at(u0, 0, phi, x) +
                   cd(mp.epsilon, 0.0) * eval_at(f0, 0, phi, x);
    out.max_defect = std::max(out.max_defect, std::abs(lhs - rhs));
    out.scale = std::max({out.scale, std::abs(lhs), std::abs(rhs)});
  }
  return out;
}

StabilityReport stability_check(const NormalForm& nf, const TransformChain& W2,
                                const std::array<double, 3>& omega,
                                const TorusFunction& h0, double T, double s,
                                double epsilon, int samples, double tol_norm,
                                double tol_pair) {
  if (h0.ncomp != 2)
    throw UsageError("stability_check: 2-component state expected");
  if (h0.d != nf.d) throw UsageError("stability_check: dimension mismatch");
  if (!(T > 0.0)) throw UsageError("stability_check: T > 0 required");
  if (samples < 2) throw UsageError("stability_check: samples >= 2 required");
  if (epsilon < 0.0)
    throw UsageError("stability_check: epsilon >= 0 required");

  StabilityReport rep;
  rep.T = T;
  rep.samples = samples;
  rep.eigen_reality = eigenvalue_reality_defect(nf);
  if (rep.eigen_reality > 1e-6)
    throw UsageError(
        "stability_check: block spectrum is not imaginary within tolerance");

  /* seed the flow: collapse the datum at phase 0 and pull it back */
  const TorusFunction h0sec = freeze_phase(h0, {0.0, 0.0, 0.0});
  const TorusFunction v0 = freeze_phase(inverse(W2, h0sec), {0.0, 0.0, 0.0});
  const int N = v0.N;
  const std::array<int, 3> l0{0, 0, 0};

  /* per-pair evolution data: unitary eigenbasis for stored blocks, scalar
   * phases for the closed tail */
  struct PairFlow {
    bool stored = false;
    Eigen::Matrix2cd U;
    double lam0 = 0.0, lam1 = 0.0; /* real eigenvalues of B / i */
    double yp = 0.0, ym = 0.0;     /* tail phases at +j, -j */
  };
  std::vector<std::array<PairFlow, 2>> flows(std::size_t(N) + 1);
  for (int s_idx = 0; s_idx < 2; ++s_idx) {
    const int sigma = s_idx == 0 ? 1 : -1;
    for (int jb = 0; jb <= N; ++jb) {
      PairFlow& pf = flows[std::size_t(jb)][std::size_t(s_idx)];
      if (jb == 0) {
        pf.yp = normal_block(nf, sigma, 0)(0, 0).imag();
      } else if (jb <= nf.J) {
        pf.stored = true;
        const Eigen::MatrixXcd B = normal_block(nf, sigma, jb);
        Eigen::Matrix2cd C;
        C << B(0, 0) / cd(0.0, 1.0), B(0, 1) / cd(0.0, 1.0),
            B(1, 0) / cd(0.0, 1.0), B(1, 1) / cd(0.0, 1.0);
        const Eigen::Matrix2cd Cs = 0.5 * (C + C.adjoint().eval());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(Cs);
        pf.U = es.eigenvectors();
        pf.lam0 = es.eigenvalues()(0);
        pf.lam1 = es.eigenvalues()(1);
      } else {
        pf.yp = eigenvalue_of(nf, sigma, jb).imag();
        pf.ym = eigenvalue_of(nf, sigma, -jb).imag();
      }
    }
  }

  /* pair quantities at t = 0, first channel */
  std::vector<double> q0(std::size_t(N) + 1, 0.0);
  for (int jb = 0; jb <= N; ++jb) {
    const double ap = std::abs(v0.at(0, l0, jb));
    const double am = jb > 0 ? std::abs(v0.at(0, l0, -jb)) : 0.0;
    q0[std::size_t(jb)] = ap * ap + am * am;
  }

  rep.v_norms.resize(std::size_t(samples));
  rep.h_norms.resize(std::size_t(samples));
  const double dt = T / double(samples - 1);

  for (int kq = 0; kq < samples; ++kq) {
    const double t = dt * double(kq);
    TorusFunction vt(v0.d, N, 2, v0.tag);
    for (int s_idx = 0; s_idx < 2; ++s_idx) {
      for (int jb = 0; jb <= N; ++jb) {
        const PairFlow& pf = flows[std::size_t(jb)][std::size_t(s_idx)];
        if (jb == 0) {
          vt.at(s_idx, l0, 0) =
              std::exp(cd(0.0, -pf.yp * t)) * v0.at(s_idx, l0, 0);
          continue;
        }
        const cd wp = v0.at(s_idx, l0, jb);
        const cd wm = v0.at(s_idx, l0, -jb);
        if (pf.stored) {
          Eigen::Vector2cd w;
          w << wp, wm;
          const Eigen::Vector2cd z = pf.U.adjoint() * w;
          Eigen::Vector2cd zt;
          zt << std::exp(cd(0.0, -pf.lam0 * t)) * z(0),
              std::exp(cd(0.0, -pf.lam1 * t)) * z(1);
          const Eigen::Vector2cd wt = pf.U * zt;
          vt.at(s_idx, l0, jb) = wt(0);
          vt.at(s_idx, l0, -jb) = wt(1);
        } else {
          vt.at(s_idx, l0, jb) = std::exp(cd(0.0, -pf.yp * t)) * wp;
          vt.at(s_idx, l0, -jb) = std::exp(cd(0.0, -pf.ym * t)) * wm;
        }
      }
    }

    rep.v_norms[std::size_t(kq)] = sobolev_norm(vt, s);

    /* conservation diagnostics on the first channel */
    for (int jb = 0; jb <= N; ++jb) {
      const double ap = std::abs(vt.at(0, l0, jb));
      const double am = jb > 0 ? std::abs(vt.at(0, l0, -jb)) : 0.0;
      const double q = ap * ap + am * am;
      if (q0[std::size_t(jb)] > 0.0)
        rep.pair_drift_rel =
            std::max(rep.pair_drift_rel,
                     std::abs(q - q0[std::size_t(jb)]) / q0[std::size_t(jb)]);
    }
    for (int s_idx = 0; s_idx < 2; ++s_idx)
      for (int j = -N; j <= N; ++j) {
        const double a0 = std::abs(v0.at(s_idx, l0, j));
        if (a0 <= 0.0) continue;
        rep.mode_drift_rel =
            std::max(rep.mode_drift_rel,
                     std::abs(std::abs(vt.at(s_idx, l0, j)) - a0) / a0);
      }

    /* pullback at the flow phase */
    std::array<double, 3> phi{0.0, 0.0, 0.0};
    for (int a = 0; a < v0.d; ++a) phi[a] = std::fmod(omega[a] * t, kTwoPi);
    const TorusFunction ht = freeze_phase(forward(W2, vt), phi);
    rep.h_norms[std::size_t(kq)] = sobolev_norm(ht, s);
    if (kq == 0) {
      rep.h_norm0 = rep.h_norms[0];
      rep.h_min = rep.h_norms[0];
      rep.h_max = rep.h_norms[0];
      /* oscillation reference scale: one extra derivative on the datum */
      rep.fitted_K = sobolev_norm(ht, s + 1.0);
    }
    rep.h_min = std::min(rep.h_min, rep.h_norms[std::size_t(kq)]);
    rep.h_max = std::max(rep.h_max, rep.h_norms[std::size_t(kq)]);
  }

  rep.v_norm0 = rep.v_norms[0];
  for (double vn : rep.v_norms)
    if (rep.v_norm0 > 0.0)
      rep.norm_drift_rel = std::max(rep.norm_drift_rel,
                                    std::abs(vn - rep.v_norm0) / rep.v_norm0);
  rep.oscillation = std::max(rep.h_max - rep.h_norm0, rep.h_norm0 - rep.h_min);
  const double ref = epsilon * rep.fitted_K; /* eps * ||h(0)||_{s+1} */
  rep.fitted_K = ref > 0.0 ? rep.oscillation / ref : 0.0;
  rep.conserved =
      rep.norm_drift_rel <= tol_norm && rep.pair_drift_rel <= tol_pair;
  return rep;
}

}  // namespace qpnls
