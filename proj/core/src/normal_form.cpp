#include "qpnls/normal_form.hpp"

#include <cmath>
#include <complex>

#include <Eigen/Dense>

namespace qpnls {

NormalForm initial_normal_form(int d, int J, double m2, cd m1, double m0) {
  NormalForm nf;
  nf.d = d;
  nf.J = J;
  nf.m2 = m2;
  nf.m1 = m1;
  nf.m0 = m0;
  nf.r.assign(std::size_t(J + 1), PairCorrection{});
  return nf;
}

/* Real Hermitian core of the first-component block: the block itself is
 * i * core for sigma = +1 and the conjugate-mirrored -i * core' for
 * sigma = -1, which is what makes every eigenvalue purely imaginary. */
namespace {

Eigen::MatrixXcd core_plus(const NormalForm& nf, int jbar) {
  const double mh = nf.m1.imag();
  const PairCorrection& pc = nf.at(jbar);
  const double base = -nf.m2 * double(jbar) * double(jbar) + nf.m0;
  if (jbar == 0) {
    Eigen::MatrixXcd M(1, 1);
    M(0, 0) = base + pc.r_pp;
    return M;
  }
  Eigen::MatrixXcd M(2, 2);
  M(0, 0) = base - mh * jbar + pc.r_pp;
  M(1, 1) = base + mh * jbar + pc.r_mm;
  M(0, 1) = pc.r_pm;
  M(1, 0) = std::conj(pc.r_pm);
  return M;
}

}  // namespace

Eigen::MatrixXcd normal_block(const NormalForm& nf, int sigma, int jbar) {
  if (jbar < 0 || jbar > nf.J)
    throw UsageError("normal_block: pair index out of range");
  if (sigma != 1 && sigma != -1)
    throw UsageError("normal_block: sigma must be +1 or -1");
  const Eigen::MatrixXcd C = core_plus(nf, jbar);
  if (sigma == 1) return cd(0.0, 1.0) * C;
  /* Reality pins the second channel entrywise: the (j, j') entry equals the
   * conjugate of the first-channel (-j, -j') entry, i.e. rows/columns of the
   * core are swapped and the overall factor i becomes -i. */
  if (jbar == 0) return cd(0.0, -1.0) * C;
  Eigen::MatrixXcd S(2, 2);
  S(0, 0) = C(1, 1);
  S(1, 1) = C(0, 0);
  S(0, 1) = C(0, 1);
  S(1, 0) = C(1, 0);
  return cd(0.0, -1.0) * S;
}

double pair_splitting(const NormalForm& nf, int jbar) {
  const PairCorrection& pc = nf.at(jbar);
  const double aj = jbar >= 1 ? double(jbar) : 1.0;
  const double diag = -2.0 * nf.m1.imag() + (pc.r_pp - pc.r_mm) / aj;
  const double off = jbar >= 1 ? 2.0 * std::abs(pc.r_pm) / aj : 0.0;
  return std::sqrt(diag * diag + off * off);
}

BlockEigen eigenvalues_of_block(const NormalForm& nf, int sigma, int jbar) {
  const Eigen::MatrixXcd M = normal_block(nf, sigma, jbar);
  if (M.rows() == 1) return BlockEigen{M(0, 0), M(0, 0), 0.0};
  const cd tr = M(0, 0) + M(1, 1);
  const cd det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  const cd disc = std::sqrt(tr * tr / 4.0 - det);
  const cd e1 = tr / 2.0 + disc;
  const cd e2 = tr / 2.0 - disc;
  const cd target =
      tr / 2.0 + cd(0.0, sigma * double(jbar) * pair_splitting(nf, jbar) / 2.0);
  BlockEigen out{};
  if (std::abs(e1 - target) <= std::abs(e2 - target)) {
    out.mu_plus = e1;
    out.mu_minus = e2;
  } else {
    out.mu_plus = e2;
    out.mu_minus = e1;
  }
  out.branch_gap = std::abs(out.mu_plus - target);
  return out;
}

double eigenvalue_reality_defect(const NormalForm& nf) {
  double worst = 0.0;
  for (int sigma : {1, -1})
    for (int jbar = 0; jbar <= nf.J; ++jbar) {
      const BlockEigen be = eigenvalues_of_block(nf, sigma, jbar);
      for (const cd mu : {be.mu_plus, be.mu_minus})
        worst = std::max(worst, std::abs(mu.real()) / (1.0 + std::abs(mu)));
    }
  return worst;
}

double correction_decay_constant(const NormalForm& nf, double eps) {
  double worst = 0.0;
  for (int jbar = 0; jbar <= nf.J; ++jbar) {
    const PairCorrection& pc = nf.at(jbar);
    const double amp = std::max({std::abs(pc.r_pp), std::abs(pc.r_mm),
                                 std::abs(pc.r_pm)});
    worst = std::max(worst, std::max(double(jbar), 1.0) * amp / eps);
  }
  return worst;
}

BlockOperator assemble_diagonal(const NormalForm& nf, int L) {
  BlockOperator D(nf.d, nf.J, L);
  Eigen::MatrixXcd& M0 = D.block({0, 0, 0});
  for (int si = 0; si < 2; ++si) {
    const int sigma = si == 0 ? 1 : -1;
    for (int jbar = 0; jbar <= nf.J; ++jbar) {
      const Eigen::MatrixXcd B = normal_block(nf, sigma, jbar);
      if (jbar == 0) {
        M0(D.row(si, 0), D.row(si, 0)) = B(0, 0);
        continue;
      }
      M0(D.row(si, jbar), D.row(si, jbar)) = B(0, 0);
      M0(D.row(si, jbar), D.row(si, -jbar)) = B(0, 1);
      M0(D.row(si, -jbar), D.row(si, jbar)) = B(1, 0);
      M0(D.row(si, -jbar), D.row(si, -jbar)) = B(1, 1);
    }
  }
  return D;
}

Eigen::Matrix2cd diagonalizing_matrix(const Eigen::Matrix2cd& M, cd mu_first,
                                      cd mu_second) {
  const cd a = M(0, 0), b = M(0, 1), c = M(1, 0), d = M(1, 1);
  /* (mu - d, c) and (b, mu - a) are both eigenvectors for any root mu of the
   * characteristic polynomial; pick per column the better conditioned one
   * and scale so a diagonal M with ordered eigenvalues gives the identity. */
  const auto ratio = [](cd num, cd den) {
    return den == cd(0.0, 0.0) ? cd(0.0, 0.0) : num / den;
  };
  Eigen::Matrix2cd U;
  if (std::abs(mu_first - d) >= std::abs(mu_first - a)) {
    U(0, 0) = 1.0;
    U(1, 0) = ratio(c, mu_first - d);
  } else {
    U(0, 0) = ratio(b, mu_first - a);
    U(1, 0) = 1.0;
  }
  if (std::abs(mu_second - a) >= std::abs(mu_second - d)) {
    U(0, 1) = ratio(b, mu_second - a);
    U(1, 1) = 1.0;
  } else {
    U(0, 1) = 1.0;
    U(1, 1) = ratio(c, mu_second - d);
  }
  return U;
}

}  // namespace qpnls
