#pragma once

#include <vector>

#include <Eigen/Core>

#include "qpnls/block_operator.hpp"
#include "qpnls/common.hpp"

namespace qpnls {

/* Correction accumulated on the space-mode pair (j, -j), j = jbar >= 0.
 * The reduction keeps the diagonal entries real, the two off-diagonal
 * entries conjugate, and the whole correction independent of the component
 * sign; those three facts are what keep the block eigenvalues imaginary. */
struct PairCorrection {
  double r_pp = 0.0;  /* entry at ( j,  j) */
  double r_mm = 0.0;  /* entry at (-j, -j) */
  cd r_pm{0.0, 0.0};  /* entry at ( j, -j); the (-j, j) entry is conj(r_pm) */
};

/* Time-independent block-diagonal part of  omega.d_phi + D + R:  constant
 * second / first / zero order coefficients plus one PairCorrection per
 * jbar. The first-order constant m1 is purely imaginary, so blocks couple
 * only j with -j and the whole of D is described by this small record.
 *
 * Entry convention, matching the regularized operator: for the first
 * component channel (sigma = +1, sigma index 0)
 *
 *   D_{+,j}^{+,j}   = i (-m2 j^2 + m0) - m1 j + i r_pp    (j = jbar)
 *   D_{+,-j}^{+,-j} = i (-m2 j^2 + m0) + m1 j + i r_mm
 *   D_{+,j}^{+,-j}  = i r_pm,   D_{+,-j}^{+,j} = i conj(r_pm)
 *
 * and the second channel is fixed by reality, entrywise conjugate at the
 * mirrored indices. Since m1 is imaginary, m1 j = i Im(m1) j sits inside
 * the same i(...) bracket as everything else. */
struct NormalForm {
  int d = 1;
  int J = 0;
  double m2 = 1.0;
  cd m1{0.0, 0.0};
  double m0 = 1.0;
  std::vector<PairCorrection> r;  /* index jbar in [0, J] */

  const PairCorrection& at(int jbar) const { return r[std::size_t(jbar)]; }
  PairCorrection& at(int jbar) { return r[std::size_t(jbar)]; }
};

NormalForm initial_normal_form(int d, int J, double m2, cd m1, double m0);

/* Dense block at (sigma, jbar): 2x2 with rows/columns ordered (j, -j) for
 * jbar >= 1, 1x1 for jbar = 0. sigma = +1 or -1. */
Eigen::MatrixXcd normal_block(const NormalForm& nf, int sigma, int jbar);

/* Eigenvalues of the block, computed from trace and determinant and then
 * ordered so that mu_plus matches the closed branch formula
 *
 *   mu_plus = trace/2 + i sigma (a_j b_j) / 2 ,
 *   b_j = sqrt( (-2 Im m1 + (r_pp - r_mm)/a_j)^2 + 4 |r_pm|^2 / a_j^2 ) ,
 *
 * with a_j = jbar for jbar >= 1 and a_0 = 1. branch_gap records the
 * distance between the matched root and the formula value; it vanishes as
 * long as the corrections have the exact pair structure. */
struct BlockEigen {
  cd mu_plus;
  cd mu_minus;
  double branch_gap;
};
BlockEigen eigenvalues_of_block(const NormalForm& nf, int sigma, int jbar);

/* b_j of the branch formula; |a_j b_j| is the within-pair eigenvalue
 * splitting |mu_plus - mu_minus|. */
double pair_splitting(const NormalForm& nf, int jbar);

/* Certificate: largest |Re mu| / (1 + |mu|) over all blocks. */
double eigenvalue_reality_defect(const NormalForm& nf);

/* Decay certificate for the accumulated corrections: the largest value of
 * max(jbar, 1) * (largest correction entry of the pair) / eps. */
double correction_decay_constant(const NormalForm& nf, double eps);

/* The normal form as a block-Toplitz operator (time offset zero only),
 * with time box |l|_inf <= L. */
BlockOperator assemble_diagonal(const NormalForm& nf, int L);

/* Diagonalizing matrix of a 2x2 block from its resolved eigenvalues:
 * U^{-1} M U = diag(mu_first, mu_second), normalized so that U = 1 when M
 * is already diagonal (with the eigenvalues in the given order). */
Eigen::Matrix2cd diagonalizing_matrix(const Eigen::Matrix2cd& M, cd mu_first,
                                      cd mu_second);

}  // namespace qpnls
