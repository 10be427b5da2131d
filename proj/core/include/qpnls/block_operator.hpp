#pragma once

#include <functional>

#include <Eigen/Core>

#include "qpnls/torus_function.hpp"

namespace qpnls {

/* Linear operator on 2-component states, block-Toplitz in the time indices:
 *
 *   (A u)_{sigma, l, j} = sum_{l', sigma', j'}
 *        A[l - l'](sigma, j; sigma', j') u_{sigma', l', j'}
 *
 * One dense matrix is stored per time offset |l|_inf <= L; rows and columns
 * are indexed by (sigma, j) with |j| <= J, sigma index 0 for the first
 * component. Everything the scheme conjugates, composes or diagonalizes is
 * a finite section of this form (the transport term c(phi) omega.d_phi is
 * carried separately, since its symbol depends on the absolute time index). */
struct BlockOperator {
  int d = 1, J = 0, L = 0;
  std::vector<Eigen::MatrixXcd> mats;

  BlockOperator() = default;
  BlockOperator(int d_, int J_, int L_) : d(d_), J(J_), L(L_) {
    mats.assign(tbox().count(), Eigen::MatrixXcd::Zero(nrow(), nrow()));
  }

  TimeBox tbox() const { return TimeBox{d, L}; }
  int nspace() const { return 2 * J + 1; }
  int nrow() const { return 2 * nspace(); }
  /* sigma_idx: 0 first component, 1 second */
  int row(int sigma_idx, int j) const { return sigma_idx * nspace() + (j + J); }

  Eigen::MatrixXcd& block(const std::array<int, 3>& l) { return mats[tbox().flatten(l)]; }
  const Eigen::MatrixXcd& block(const std::array<int, 3>& l) const {
    return mats[tbox().flatten(l)];
  }
  cd entry(int s, int j, int s2, int j2, const std::array<int, 3>& l) const {
    if (!tbox().contains(l)) return cd(0.0, 0.0);
    return mats[tbox().flatten(l)](row(s, j), row(s2, j2));
  }

  bool same_shape(const BlockOperator& o) const {
    return d == o.d && J == o.J && L == o.L;
  }

  BlockOperator& operator+=(const BlockOperator& o);
  BlockOperator& operator-=(const BlockOperator& o);
  BlockOperator& operator*=(cd s);

  static BlockOperator identity(int d, int J, int L);
};

/* A += c B; B may have a smaller time half-width. */
void add_scaled(BlockOperator& A, const BlockOperator& B, cd c);

/* Toplitz product, exact up to time half-width Lout (default La + Lb). */
BlockOperator compose(const BlockOperator& A, const BlockOperator& B, int Lout = -1);

/* Apply the finite section to a 2-component state. Space modes of u beyond J
 * are ignored and output time modes beyond u's box are dropped. */
TorusFunction apply(const BlockOperator& A, const TorusFunction& u);

/* (A*)  with  <A u, v> = <u, A* v>  in the unweighted l2 pairing. */
BlockOperator adjoint(const BlockOperator& A);

/* Add, on channel (sr, sc), the multiplication operator by the
 * single-component function a, scaled by c. Returns the l2 mass of
 * coefficients of a whose time index does not fit in the operator box. */
double add_mult(BlockOperator& A, int sr, int sc, const TorusFunction& a, cd c);

/* Add, on the diagonal of channel (s, s), the space symbol fn(j) at time
 * offset zero (Fourier multipliers such as d_xx). */
void add_symbol(BlockOperator& A, int s, const std::function<cd(int)>& fn);

/* Decay norm: |A|_s^2 = max over channel pairs of
 *   sum_{(l, h)} <(l, h)>^{2s} ( sup_{j - j' = h} |A[l](j, j')| )^2 ,
 * the operator analogue of the Sobolev norm of a coefficient. */
double decay_norm(const BlockOperator& A, double s);

/* Same sum restricted to one component channel (row/column sigma index). */
double channel_decay_norm(const BlockOperator& A, int sr, int sc, double s);

struct OpSplit {
  BlockOperator low;   /* stripes with max(|l|_inf, |j - j'|) <= Nc */
  BlockOperator high;  /* complement */
};
OpSplit smooth_truncate(const BlockOperator& A, int Nc);

/* Truncation in the time offsets only: low keeps the matrices with
 * |l|_inf <= Nc unchanged, high the complement. This is the projector the
 * reduction iterates with; smooth_truncate cuts the space stripes as well. */
OpSplit time_truncate(const BlockOperator& A, int Nc);

/* Frozen-phase matrix  M(phi) = sum_l A[l] e^{i l.phi}. */
Eigen::MatrixXcd phase_slice(const BlockOperator& A, const std::array<double, 3>& phi);

/* Largest violation of the entry symmetries satisfied by a linear
 * Hamiltonian vector field on the doubled phase space (infinitesimal
 * invariance of the symplectic pairing, offset by offset):
 *   diagonal channels   A_{-,j}^{-,j'}(l)  = -A_{+,-j'}^{+,-j}(l)
 *   cross channels      A_{s,j}^{-s,j'}(l) =  A_{s,-j'}^{-s,-j}(l)
 * Together with realness these make each diagonal channel anti-Hermitian
 * as a Toplitz family. */
double hamiltonian_defect(const BlockOperator& A);

/* Largest violation of realness (the operator maps conjugate-pair states to
 * conjugate-pair states):
 *   A_{-,j}^{-,j'}(l) = conj(A_{+,-j}^{+,-j'}(-l))
 *   A_{-,j}^{+,j'}(l) = conj(A_{+,-j}^{-,-j'}(-l))                           */
double realness_defect(const BlockOperator& A);

/* Infinitesimal invariance of the symplectic pairing
 *   S(u, v) = sum_j ( u^+_j v^-_{-j} - u^-_j v^+_{-j} )
 * under the frozen-phase slice: max over sampled phi of |S(Mu, v) + S(u, Mv)|
 * on random unit vectors. An independent cross-check of hamiltonian_defect. */
double slice_symplectic_defect(const BlockOperator& A, Rng& rng, int nphi = 4,
                               int nvec = 4);

/* Orthogonal projection onto the subspace where hamiltonian_defect and
 * realness_defect vanish identically: average of A over the group generated
 * by the two entry symmetries (both are involutions and they commute, so the
 * average over the four group elements is the projector). Both symmetries
 * map the index boxes to themselves, so the projection commutes with every
 * truncation used by the reduction; applying it once to the input remainder
 * keeps all later iterates structured to rounding error. */
BlockOperator structure_project(const BlockOperator& A);

/* Band-limited random operator with stripe decay <(l,h)>^{-decay}. */
BlockOperator random_operator(Rng& rng, int d, int J, int L, double decay,
                              double amplitude = 1.0);

/* Solve A X - X B = R for the small blocks of the pair decomposition (sizes
 * up to 2x2; rectangular R allowed when the blocks differ in size). The
 * relevant divisors are the eigenvalue gaps lambda_i(A) - lambda_k(B); the
 * smallest gap in modulus must clear divisor_floor, else a SmallDivisorError
 * carrying the gap is thrown. Solved through the vectorized linear system
 * (A (x) 1 - 1 (x) B^T) vec(X) = vec(R). */
Eigen::MatrixXcd solve_sylvester_2x2(const Eigen::MatrixXcd& A,
                                     const Eigen::MatrixXcd& B,
                                     const Eigen::MatrixXcd& R,
                                     double divisor_floor);

}  // namespace qpnls
