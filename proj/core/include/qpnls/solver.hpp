#pragma once

/*
 * Driver layer on top of regularization and reduction:
 *
 *   - closed-form inversion of the constant-coefficient operator
 *     omega.d_phi + D reached by the reduction (blockwise 2x2 solves),
 *   - the full linearized inverse h = W2 (omega.d_phi + D)^{-1} W1^{-1} g
 *     through the conjugation chains, with an end-to-end residual check,
 *   - the projected Newton iteration over the scale schedule
 *     N_n = floor(N0^{(3/2)^n}), sweeping a frequency grid and shrinking
 *     the surviving mask whenever a divisor floor, a reduction, or a tame
 *     cap fails at some point,
 *   - linear stability of the reduced flow: exact block exponentials,
 *     conservation checks, and the pullback through W2.
 */

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "qpnls/kam.hpp"
#include "qpnls/lin_op.hpp"
#include "qpnls/model.hpp"
#include "qpnls/normal_form.hpp"
#include "qpnls/param_grid.hpp"
#include "qpnls/regularization.hpp"
#include "qpnls/transformation.hpp"

namespace qpnls {

/* Truncation scale N_n = floor(N0^{(3/2)^n}), capped at a hard maximum.
 * capped = true is the schedule-exhausted signal; the driver stops growing
 * the projection box when it sees it. */
struct ScaleStep {
  long value = 0;
  bool capped = false;
};
ScaleStep scale_schedule(int N0, int n, long cap = 1L << 20);

/* Blockwise inverse of omega.d_phi + D for the block-diagonal normal form D:
 * for each component sign sigma, each time offset l of g and each space pair
 * (j, -j) solve
 *
 *   (i omega.l I + D block) h_block = g_block
 *
 * in closed form (2x2 for j >= 1, scalar at j = 0). Pairs beyond the stored
 * correction range J use the closed eigenvalue tail and reduce to scalar
 * divisions. Every divisor of a block that carries data must clear
 *
 *   max(divisor_floor, gamma <j>^2 / <l>^tau) ,
 *
 * the first-order non-resonance floor; the first failure throws
 * SmallDivisorError naming (l, sigma, j). Blocks where g vanishes are
 * skipped, so only divisors needed for g's support are tested. Each solved
 * block is re-substituted and the largest relative residual is reported. */
struct NormalFormInverse {
  TorusFunction h;
  double min_divisor = 0.0;        /* smallest divisor over solved blocks   */
  double min_floor_margin = 0.0;   /* smallest divisor / floor ratio        */
  double max_block_residual = 0.0; /* largest relative block residual       */
  long blocks = 0;                 /* number of solved (data-carrying) blocks */
};
NormalFormInverse invert_normal_form(const NormalForm& nf,
                                     const std::array<double, 3>& omega,
                                     const TorusFunction& g, double gamma,
                                     double tau, double divisor_floor);

/* W1 = V1 Phi and W2 = V2 Phi: the regularization chains extended by the
 * product Phi of the reduction generators. The original linearized operator
 * factors as L = W1 (omega.d_phi + D) W2^{-1} up to the reduction remainder,
 * so its inverse is W2 (omega.d_phi + D)^{-1} W1^{-1}. */
struct ConjugationChains {
  TransformChain W1, W2;
};
ConjugationChains conjugation_chains(const RegularizationResult& reg,
                                     const TransformChain& kam_chain);

/* Full linearized inverse through the chains, with diagnostics:
 * residual_s0 applies L to the result directly and compares against g. */
struct LinearizedInverse {
  TorusFunction h;
  NormalFormInverse diagonal_stage;
  double residual_s0 = 0.0;  /* || L h - g ||_{s0}                          */
  double residual_rel = 0.0; /* residual_s0 / ||g||_{s0+2}                  */
  double tame_ratio = 0.0;   /* ||h||_{s0} gamma / ||g||_{s0 + 2 tau + 5}   */
};
LinearizedInverse invert_L(const LinOp& L, const ConjugationChains& chains,
                           const NormalForm& nf,
                           const std::array<double, 3>& omega,
                           const TorusFunction& g, double gamma, double tau,
                           double s0, double divisor_floor);

/* Configuration of the Newton sweep. The driver derives gamma = epsilon^a,
 * fills the cross-cutting fields of the KAM schedule (gamma, tau, eps,
 * abs_e) from the solver-level values, and uses the regularization options
 * as given. The frequency sample is either the explicit omega list (when
 * nonempty) or a uniform grid on [grid_lo, grid_hi]. */
struct SolverConfig {
  ModelParams model;  /* d, m, epsilon, plugin                              */
  double a = 0.5;     /* gamma = epsilon^a, 0 < a < 1                       */
  double tau = 3.0;   /* non-resonance exponent of the divisor floors       */
  double tau0 = 2.0;  /* diophantine prescreen exponent                     */
  double gamma0 = -1.0; /* prescreen constant; < 0 selects gamma            */
  int dioph_L = 8;    /* prescreen time box |l|_inf <= dioph_L              */

  std::vector<std::array<double, 3>> omegas; /* explicit points win         */
  int grid_points = 0;
  double grid_lo = 0.5, grid_hi = 1.5;

  int N0 = 8;            /* base of the projection schedule                 */
  long N_cap = 4096;     /* hard maximum of the schedule                    */
  int max_iters = 8;     /* Newton updates per point                        */
  double tol = 1e-11;    /* stop once ||F(u)||_{s0} <= tol                  */
  double s0 = 1.5;
  int state_N = 8;       /* working box of the unknown                      */

  RegularizationOptions reg{12, 8, 6, 1e-10, 0.05, true, 0, 1234};
  KamSchedule kam;

  double divisor_floor = 1e-9; /* absolute guard under the gamma floors     */
  double tame_cap = 1e8;       /* good-at-this-iterate cap on tame ratios   */
  bool warm_start = true;      /* reuse the previous iterate's generators   */

  double gamma() const { return std::pow(model.epsilon, a); }
};

/* Throws UsageError when the configuration violates its invariants. */
void validate(const SolverConfig& cfg);

/* One Newton update at one frequency. residual_s0 is ||F(u_n)||_{s0} before
 * the update; increment_s0 is the size of the accepted correction. */
struct NewtonRecord {
  int n = 0;
  long N_next = 0;              /* projection cutoff of this update         */
  double residual_s0 = 0.0;
  double increment_s0 = 0.0;
  double tame_ratio = 0.0;
  double inversion_residual = 0.0; /* end-to-end relative residual          */
  double min_floor_margin = 0.0;
  double kam_remainder = 0.0;   /* final |R|_{s0} of this iterate's reduce  */
  int kam_iters = 0;
  double reality_drift = 0.0;   /* conjugate-pair defect of the solved
                                   doubled-state correction                 */
};

/* Least-squares fit of log(increment) against log(N_next) over the recorded
 * updates: increment ~ constant * N^{-exponent}. */
struct IncrementFit {
  bool sufficient_data = false;
  double exponent = 0.0;
  double constant = 0.0;
};
IncrementFit fit_increments(const std::vector<NewtonRecord>& iterates);

/* Outcome at one frequency. survived = the point never failed a divisor
 * floor, a reduction, or a tame cap; converged = the final residual beat
 * the tolerance. The last built normal form and chains are kept so that
 * stability and inversion checks can reuse them. */
struct OmegaRun {
  std::array<double, 3> omega{};
  bool survived = false;
  bool converged = false;
  int drop_iterate = -1;
  std::string drop_reason;
  double final_residual = 0.0;
  std::vector<NewtonRecord> iterates;
  TorusFunction u;              /* scalar unknown u(phi, x), one component  */
  NormalForm nf;
  ConjugationChains chains;
  IncrementFit increment_fit;
};

struct SolveResult {
  double gamma = 0.0;
  std::vector<std::array<double, 3>> omegas;
  std::vector<OmegaRun> runs;           /* one per grid point               */
  std::vector<std::vector<char>> masks; /* masks[k]: alive entering iterate
                                           k; row 0 is the diophantine
                                           prescreen; rows are nested       */
  long survivors = 0;
  std::string outcome; /* "converged", "partial", "no-parameters-survive"   */
};

/* Projected Newton sweep: per surviving frequency, iterate
 *
 *   u_{n+1} = u_n - Pi_{N_{n+1}} L(u_n)^{-1} Pi_{N_{n+1}} (-i F(u_n))
 *
 * with the chain rebuilt by regularize + reduce at every iterate (warm
 * started from the previous generators when enabled). Failures at one point
 * drop that point from the mask and are reported, never thrown. */
SolveResult nash_moser_run(const SolverConfig& cfg);

/* Independent verification of the equation
 *
 *   i omega.d_phi u = u_xx + m u + eps f(phi, x, u, u_x, u_xx)
 *
 * at random collocation points by direct mode summation, with the forcing
 * re-expanded on a generous box. Accepts the scalar unknown directly or a
 * doubled state (first component is used). max_defect is the largest
 * pointwise equation error; scale is the largest term met, for reference. */
struct CollocationCheck {
  double max_defect = 0.0;
  double scale = 0.0;
  int points = 0;
};
CollocationCheck verify_solution(const ModelParams& mp, const Nonlinearity& nl,
                                 const std::array<double, 3>& omega,
                                 const TorusFunction& u, int points, Rng& rng);

/* Linear stability of the reduced flow. The initial datum h0 (an x-section
 * state; time modes are collapsed at phase 0 first) is pulled back to
 * v(0) = W2(0)^{-1} h(0), evolved in closed form through the exact block
 * exponentials of the normal form (unitary because the blocks are i times
 * Hermitian matrices), and pushed forward again at sampled times:
 * h(t) = W2(omega t) v(t). Reported:
 *
 *   - relative drift of ||v(t)||_{H_x^s} and of every pair quantity
 *     |v_{1,j}|^2 + |v_{1,-j}|^2 (conserved exactly by the flow),
 *   - the per-mode amplitude drift (exactly zero for diagonal blocks),
 *   - the oscillation of the pullback norm ||h(t)||_{H_x^s} around its
 *     t = 0 value, and the fitted constant oscillation / (eps ||h(0)||_{s+1}).
 */
struct StabilityReport {
  double T = 0.0;
  int samples = 0;
  double v_norm0 = 0.0;          /* ||v(0)||_{H_x^s}                        */
  double norm_drift_rel = 0.0;   /* max_t relative drift of ||v(t)||        */
  double pair_drift_rel = 0.0;   /* max_{j,t} relative drift of the pair    */
  double mode_drift_rel = 0.0;   /* max per-mode amplitude drift            */
  double h_norm0 = 0.0;          /* pullback norm at t = 0                  */
  double h_min = 0.0, h_max = 0.0;
  double oscillation = 0.0;      /* max_t | ||h(t)|| - ||h(0)|| |           */
  double fitted_K = 0.0;         /* oscillation / (eps ||h(0)||_{s+1})      */
  double eigen_reality = 0.0;    /* reality defect of the block spectrum    */
  bool conserved = false;
  std::vector<double> v_norms;   /* ||v(t_k)|| per sample                   */
  std::vector<double> h_norms;   /* ||h(t_k)|| per sample                   */
};
StabilityReport stability_check(const NormalForm& nf, const TransformChain& W2,
                                const std::array<double, 3>& omega,
                                const TorusFunction& h0, double T, double s,
                                double epsilon, int samples = 128,
                                double tol_norm = 1e-8,
                                double tol_pair = 1e-10);

}  // namespace qpnls
