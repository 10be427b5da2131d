#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpnls/block_operator.hpp"
#include "qpnls/common.hpp"
#include "qpnls/normal_form.hpp"
#include "qpnls/transformation.hpp"

namespace qpnls {

/* Truncation schedule N_nu = floor(N0^(chi^nu)) and the tolerances, floors
 * and thresholds of the quadratic reduction. */
struct KamSchedule {
  int N0 = 8;
  double chi = 1.5;
  double tau = 3.0;
  double gamma = 0.03;
  double s0 = 1.5;          /* low certificate norm index                   */
  double beta_exp = -1.0;   /* high norm offset; < 0 selects 7 tau + 5      */
  double alpha_exp = -1.0;  /* decay exponent target; < 0 selects 7 tau + 3 */
  int max_iters = 12;
  double stop_tol = 1e-12;  /* stop once |R|_{s0} falls below this          */
  int series_cap = 30;      /* hard cap on commutator series terms          */
  double series_rel_tol = 1e-16; /* relative series stopping threshold      */
  double jsplit = -1.0;     /* pair threshold for the diagonalized solve;
                               < 0 selects 4 max|omega| / (eps |e|)         */
  double eps = 1e-3;        /* perturbation size (thresholds, decay fits)   */
  double abs_e = 1.0;       /* |average forcing| entering the jsplit default */
  double smallness_gate = 0.5; /* require |Psi|_{s0} <= gate before exp     */
  bool project_structure = true; /* structure_project the input remainder;
                               the defect part of the zero-offset pair blocks
                               is invisible to both the homological solve and
                               the normal-form absorption, so an unprojected
                               input stalls the decay at the defect size     */

  double beta() const { return beta_exp < 0.0 ? 7.0 * tau + 5.0 : beta_exp; }
  double alpha() const { return alpha_exp < 0.0 ? 7.0 * tau + 3.0 : alpha_exp; }
};

/* N_nu for nu >= 0; nu = -1 returns 1 (the fit anchor). */
int schedule_N(const KamSchedule& sch, int nu);

double default_jsplit(const std::array<double, 3>& omega, int d, double eps,
                      double abs_e);

/* One row of the iteration log. */
struct KamIterate {
  int nu = 0;
  int N = 0;                        /* cutoff used to produce this iterate  */
  double R_s0 = 0.0;                /* |R_nu|_{s0}                          */
  double R_sbeta = 0.0;             /* |R_nu|_{s0 + beta}                   */
  double max_re_mu = 0.0;           /* eigenvalue reality defect            */
  double psi_s0 = 0.0;              /* |Psi_{nu-1}|_{s0} (0 on the first row) */
  double homological_residual = 0.0;
  double hamiltonian_defect_R = 0.0;
  double realness_defect_R = 0.0;
  double sigma_consistency = 0.0;   /* component independence of the kernel */
  double eigenvalue_drift = 0.0;    /* max |mu_new - mu_old| over blocks    */
  double drift_bound = 0.0;         /* |R_sigma^sigma|_{s0} of the old R    */
  double diag_channel_norm = 0.0;   /* |D R_s^s|_{s0}-type smoothed norm    */
  double cross_channel_norm = 0.0;  /* |R_s^{-s}|_{s0}                      */
  bool quadratic_tripwire = false;  /* |R_new| > |R_old|^{1.2} while small  */
  int mask_size = 1;                /* filled by the driver sweep           */
};

struct KamState {
  int nu = 0;
  std::array<double, 3> omega{};
  NormalForm nf;
  BlockOperator R;
  TransformChain chain;             /* exp(Psi_0), exp(Psi_1), ...          */
  std::vector<KamIterate> history;  /* history[nu] describes iterate nu     */
};

struct ReducibilityError : std::runtime_error {
  int nu;
  explicit ReducibilityError(int nu_, const std::string& what)
      : std::runtime_error(what), nu(nu_) {}
};

/* Generator and byproducts of one homological solve. */
struct HomologicalSolution {
  BlockOperator psi;
  BlockOperator bracket;  /* [omega.d_phi + D, Psi], computed blockwise; it
                             equals R_low minus its kernel when the solve is
                             exact */
  double residual = 0.0;  /* |bracket - (R_low - kernel)| / (1 + |R_low|) */
  double floor_margin = 0.0; /* smallest divisor / its floor over blocks */
};

/* Solve, block by block for |l|_inf <= N,
 *
 *   i omega.l Psi(l) + Omega_{sigma, jbar} Psi(l) - Psi(l) Omega_{sigma', jbar'}
 *       = R(l)_{(sigma, jbar), (sigma', jbar')} ,
 *
 * skipping the kernel blocks (l = 0, sigma = sigma', jbar = jbar') that the
 * diagonal update absorbs. Divisor floors follow the second Melnikov
 * thresholds at (gamma, tau): gamma |sigma jbar^2 - sigma' jbar'^2| / <l>^tau
 * across pairs or components, gamma / (<l>^tau <jbar>) within a pair. Blocks
 * with both pairs above jsplit are solved through the diagonalizing matrices
 * and scalar division; everything else goes through the small vectorized
 * solver. The returned residual certifies the equation a posteriori. */
HomologicalSolution solve_homological(const NormalForm& nf,
                                      const BlockOperator& R, int N,
                                      const std::array<double, 3>& omega,
                                      double gamma, double tau, double jsplit);

/* One quadratic step: truncate, absorb the kernel into the normal form,
 * solve for the generator, and push the conjugated remainder through the
 * commutator series. Throws SmallDivisorError / ReducibilityError when a
 * divisor floor or a smallness gate fails. */
KamState kam_step(const KamState& state, const KamSchedule& sch);

struct KamResult {
  KamState state;
  bool converged = false;
  std::string stop_reason;
  double decay_fit_constant = 0.0;  /* max_j <j> |r_j| / eps */
  double structure_projection = 0.0; /* |R0 - structure_project(R0)|_{s0} */
};

/* Full reduction of  omega.d_phi + L7:  split off the normal form described
 * by nf0, then iterate kam_step until the remainder falls below stop_tol,
 * the schedule is exhausted, or the iteration stagnates. Small-divisor and
 * gate failures are reported through converged/stop_reason so that a
 * parameter sweep can drop the point and move on. */
KamResult reduce(const BlockOperator& L7, const NormalForm& nf0,
                 const std::array<double, 3>& omega, const KamSchedule& sch);

/* Least-squares fit of log |R_nu|_{s0} against log N_{nu-1} over the
 * recorded history (the nu = 0 row anchors the fit at N_{-1} = 1). */
struct DecayReport {
  bool sufficient_data = false;
  double fitted_exponent = 0.0;  /* minus the slope */
  double threshold = 0.0;
  bool superlinear = false;      /* fitted_exponent >= threshold */
};
DecayReport check_decay_schedule(const std::vector<KamIterate>& history,
                                 const KamSchedule& sch, double threshold);

}  // namespace qpnls
