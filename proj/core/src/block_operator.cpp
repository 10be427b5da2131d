#include "qpnls/block_operator.hpp"

#include <limits>

#include <Eigen/Dense>

namespace qpnls {

BlockOperator& BlockOperator::operator+=(const BlockOperator& o) {
  if (!same_shape(o)) throw UsageError("BlockOperator sum: shape mismatch");
  for (std::size_t i = 0; i < mats.size(); ++i) mats[i] += o.mats[i];
  return *this;
}
BlockOperator& BlockOperator::operator-=(const BlockOperator& o) {
  if (!same_shape(o)) throw UsageError("BlockOperator difference: shape mismatch");
  for (std::size_t i = 0; i < mats.size(); ++i) mats[i] -= o.mats[i];
  return *this;
}
BlockOperator& BlockOperator::operator*=(cd s) {
  for (auto& m : mats) m *= s;
  return *this;
}

BlockOperator BlockOperator::identity(int d, int J, int L) {
  BlockOperator A(d, J, L);
  A.block({0, 0, 0}).setIdentity();
  return A;
}

void add_scaled(BlockOperator& A, const BlockOperator& B, cd c) {
  if (A.d != B.d || A.J != B.J || B.L > A.L)
    throw UsageError("add_scaled: incompatible shapes");
  const TimeBox tb = B.tbox();
  for (long t = 0; t < tb.count(); ++t)
    A.block(tb.unflatten(t)) += c * B.mats[t];
  return;
}

BlockOperator compose(const BlockOperator& A, const BlockOperator& B, int Lout) {
  if (A.d != B.d || A.J != B.J) throw UsageError("compose: incompatible shapes");
  if (Lout < 0) Lout = A.L + B.L;
  BlockOperator C(A.d, A.J, Lout);
  const TimeBox ta = A.tbox(), tb = B.tbox(), tc = C.tbox();
  for (long ia = 0; ia < ta.count(); ++ia) {
    const auto la = ta.unflatten(ia);
    if (A.mats[ia].isZero(0.0)) continue;
    for (long ib = 0; ib < tb.count(); ++ib) {
      const auto lb = tb.unflatten(ib);
      const std::array<int, 3> lc{la[0] + lb[0], la[1] + lb[1], la[2] + lb[2]};
      if (!tc.contains(lc)) continue;
      if (B.mats[ib].isZero(0.0)) continue;
      C.block(lc) += A.mats[ia] * B.mats[ib];
    }
  }
  return C;
}

TorusFunction apply(const BlockOperator& A, const TorusFunction& u) {
  if (u.ncomp != 2) throw UsageError("apply: 2-component state expected");
  if (u.d != A.d) throw UsageError("apply: dimension mismatch");
  const TimeBox tu = u.tbox(), ta = A.tbox();
  const int Jc = std::min(A.J, u.N);
  const int n = A.nspace();

  /* gather the input as per-time-mode stacked vectors */
  std::vector<Eigen::VectorXcd> in(tu.count(), Eigen::VectorXcd::Zero(2 * n));
  for (long t = 0; t < tu.count(); ++t) {
    const auto l = tu.unflatten(t);
    for (int s = 0; s < 2; ++s)
      for (int j = -Jc; j <= Jc; ++j) in[t](A.row(s, j)) = u.at(s, l, j);
  }
  std::vector<Eigen::VectorXcd> out(tu.count(), Eigen::VectorXcd::Zero(2 * n));
  for (long toff = 0; toff < ta.count(); ++toff) {
    if (A.mats[toff].isZero(0.0)) continue;
    const auto off = ta.unflatten(toff);
    for (long t = 0; t < tu.count(); ++t) {
      const auto l = tu.unflatten(t);
      const std::array<int, 3> lo{l[0] + off[0], l[1] + off[1], l[2] + off[2]};
      if (!tu.contains(lo)) continue;
      out[tu.flatten(lo)] += A.mats[toff] * in[t];
    }
  }
  TorusFunction res(u.d, u.N, 2, u.tag);
  for (long t = 0; t < tu.count(); ++t) {
    const auto l = tu.unflatten(t);
    for (int s = 0; s < 2; ++s)
      for (int j = -Jc; j <= Jc; ++j) res.at(s, l, j) = out[t](A.row(s, j));
  }
  return res;
}

BlockOperator adjoint(const BlockOperator& A) {
  BlockOperator B(A.d, A.J, A.L);
  const TimeBox tb = A.tbox();
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
    B.block(ml) = A.mats[t].adjoint();
  }
  return B;
}

double add_mult(BlockOperator& A, int sr, int sc, const TorusFunction& a, cd c) {
  if (a.ncomp != 1) throw UsageError("add_mult: 1-component coefficient expected");
  if (a.d != A.d) throw UsageError("add_mult: dimension mismatch");
  const TimeBox tf = a.tbox(), to = A.tbox();
  double dropped2 = 0.0;
  for (long t = 0; t < tf.count(); ++t) {
    const auto l = tf.unflatten(t);
    if (!to.contains(l)) {
      for (int h = -a.N; h <= a.N; ++h) dropped2 += std::norm(a.at(0, l, h));
      continue;
    }
    Eigen::MatrixXcd& M = A.block(l);
    for (int j = -A.J; j <= A.J; ++j)
      for (int j2 = -A.J; j2 <= A.J; ++j2) {
        const cd coef = a.get(0, l, j - j2);
        if (coef != cd(0.0, 0.0)) M(A.row(sr, j), A.row(sc, j2)) += c * coef;
      }
  }
  return std::sqrt(dropped2);
}

void add_symbol(BlockOperator& A, int s, const std::function<cd(int)>& fn) {
  Eigen::MatrixXcd& M = A.block({0, 0, 0});
  for (int j = -A.J; j <= A.J; ++j) M(A.row(s, j), A.row(s, j)) += fn(j);
}

double channel_decay_norm(const BlockOperator& A, int sr, int sc, double s) {
  const TimeBox tb = A.tbox();
  std::vector<double> stripe(std::size_t(4 * A.J + 1));
  double acc = 0.0;
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    std::fill(stripe.begin(), stripe.end(), 0.0);
    const Eigen::MatrixXcd& M = A.mats[t];
    for (int j = -A.J; j <= A.J; ++j)
      for (int j2 = -A.J; j2 <= A.J; ++j2) {
        const double v = std::abs(M(A.row(sr, j), A.row(sc, j2)));
        double& sl = stripe[std::size_t(j - j2 + 2 * A.J)];
        sl = std::max(sl, v);
      }
    for (int h = -2 * A.J; h <= 2 * A.J; ++h) {
      const double sl = stripe[std::size_t(h + 2 * A.J)];
      if (sl == 0.0) continue;
      acc += sl * sl * std::pow(double(mode_weight(l, h, A.d)), 2.0 * s);
    }
  }
  return std::sqrt(acc);
}

double decay_norm(const BlockOperator& A, double s) {
  double best = 0.0;
  for (int sr = 0; sr < 2; ++sr)
    for (int sc = 0; sc < 2; ++sc)
      best = std::max(best, channel_decay_norm(A, sr, sc, s));
  return best;
}

OpSplit smooth_truncate(const BlockOperator& A, int Nc) {
  OpSplit sp{BlockOperator(A.d, A.J, A.L), BlockOperator(A.d, A.J, A.L)};
  const TimeBox tb = A.tbox();
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    const bool tlow = linf(l, A.d) <= Nc;
    const Eigen::MatrixXcd& M = A.mats[t];
    Eigen::MatrixXcd& lo = sp.low.mats[t];
    Eigen::MatrixXcd& hi = sp.high.mats[t];
    for (int sr = 0; sr < 2; ++sr)
      for (int sc = 0; sc < 2; ++sc)
        for (int j = -A.J; j <= A.J; ++j)
          for (int j2 = -A.J; j2 <= A.J; ++j2) {
            const cd v = M(A.row(sr, j), A.row(sc, j2));
            if (v == cd(0.0, 0.0)) continue;
            if (tlow && std::abs(j - j2) <= Nc)
              lo(A.row(sr, j), A.row(sc, j2)) = v;
            else
              hi(A.row(sr, j), A.row(sc, j2)) = v;
          }
  }
  return sp;
}

OpSplit time_truncate(const BlockOperator& A, int Nc) {
  OpSplit sp{BlockOperator(A.d, A.J, A.L), BlockOperator(A.d, A.J, A.L)};
  const TimeBox tb = A.tbox();
  for (long t = 0; t < tb.count(); ++t) {
    if (linf(tb.unflatten(t), A.d) <= Nc)
      sp.low.mats[t] = A.mats[t];
    else
      sp.high.mats[t] = A.mats[t];
  }
  return sp;
}

Eigen::MatrixXcd phase_slice(const BlockOperator& A, const std::array<double, 3>& phi) {
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(A.nrow(), A.nrow());
  const TimeBox tb = A.tbox();
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    double ang = 0.0;
    for (int a = 0; a < A.d; ++a) ang += l[a] * phi[a];
    M += std::polar(1.0, ang) * A.mats[t];
  }
  return M;
}

double hamiltonian_defect(const BlockOperator& A) {
  const TimeBox tb = A.tbox();
  double worst = 0.0;
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    for (int j = -A.J; j <= A.J; ++j)
      for (int j2 = -A.J; j2 <= A.J; ++j2) {
        /* diagonal channels */
        worst = std::max(worst, std::abs(A.entry(1, j, 1, j2, l) +
                                         A.entry(0, -j2, 0, -j, l)));
        /* cross channels */
        worst = std::max(worst, std::abs(A.entry(0, j, 1, j2, l) -
                                         A.entry(0, -j2, 1, -j, l)));
        worst = std::max(worst, std::abs(A.entry(1, j, 0, j2, l) -
                                         A.entry(1, -j2, 0, -j, l)));
      }
  }
  return worst;
}

double realness_defect(const BlockOperator& A) {
  const TimeBox tb = A.tbox();
  double worst = 0.0;
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
    for (int j = -A.J; j <= A.J; ++j)
      for (int j2 = -A.J; j2 <= A.J; ++j2) {
        worst = std::max(worst, std::abs(A.entry(1, j, 1, j2, l) -
                                         std::conj(A.entry(0, -j, 0, -j2, ml))));
        worst = std::max(worst, std::abs(A.entry(1, j, 0, j2, l) -
                                         std::conj(A.entry(0, -j, 1, -j2, ml))));
      }
  }
  return worst;
}

double slice_symplectic_defect(const BlockOperator& A, Rng& rng, int nphi,
                               int nvec) {
  const int n = A.nspace();
  auto pairing = [&](const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
    cd s(0.0, 0.0);
    for (int j = -A.J; j <= A.J; ++j) {
      s += u(A.row(0, j)) * v(A.row(1, -j));
      s -= u(A.row(1, j)) * v(A.row(0, -j));
    }
    return s;
  };
  double worst = 0.0;
  for (int ip = 0; ip < nphi; ++ip) {
    std::array<double, 3> phi{0, 0, 0};
    for (int a = 0; a < A.d; ++a) phi[a] = rng.uniform(0.0, kTwoPi);
    const Eigen::MatrixXcd M = phase_slice(A, phi);
    for (int iv = 0; iv < nvec; ++iv) {
      Eigen::VectorXcd u(2 * n), v(2 * n);
      for (int k = 0; k < 2 * n; ++k) {
        u(k) = rng.complex_ball(1.0);
        v(k) = rng.complex_ball(1.0);
      }
      u.normalize();
      v.normalize();
      worst = std::max(worst, std::abs(pairing(M * u, v) + pairing(u, M * v)));
    }
  }
  return worst;
}

BlockOperator structure_project(const BlockOperator& A) {
  const TimeBox tb = A.tbox();

  /* Image of A under the hamiltonian entry symmetry (a linear involution). */
  auto ham_image = [&](const BlockOperator& X) {
    BlockOperator Y(X.d, X.J, X.L);
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      auto& M = Y.block(l);
      for (int si = 0; si < 2; ++si)
        for (int si2 = 0; si2 < 2; ++si2) {
          const cd sign = (si == si2) ? cd(-1.0, 0.0) : cd(1.0, 0.0);
          const int sr = (si == si2) ? 1 - si : si;
          const int sc = (si == si2) ? 1 - si2 : si2;
          for (int j = -X.J; j <= X.J; ++j)
            for (int j2 = -X.J; j2 <= X.J; ++j2)
              M(X.row(si, j), X.row(si2, j2)) =
                  sign * X.entry(sr, -j2, sc, -j, l);
        }
    }
    return Y;
  };

  /* Image under the realness symmetry (an antilinear involution). */
  auto real_image = [&](const BlockOperator& X) {
    BlockOperator Y(X.d, X.J, X.L);
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
      auto& M = Y.block(l);
      for (int si = 0; si < 2; ++si)
        for (int si2 = 0; si2 < 2; ++si2)
          for (int j = -X.J; j <= X.J; ++j)
            for (int j2 = -X.J; j2 <= X.J; ++j2)
              M(X.row(si, j), X.row(si2, j2)) =
                  std::conj(X.entry(1 - si, -j, 1 - si2, -j2, ml));
    }
    return Y;
  };

  BlockOperator H = ham_image(A);
  BlockOperator C = real_image(A);
  BlockOperator HC = ham_image(C);
  BlockOperator P = A;
  add_scaled(P, H, cd(1.0, 0.0));
  add_scaled(P, C, cd(1.0, 0.0));
  add_scaled(P, HC, cd(1.0, 0.0));
  P *= cd(0.25, 0.0);
  return P;
}

Eigen::MatrixXcd solve_sylvester_2x2(const Eigen::MatrixXcd& A,
                                     const Eigen::MatrixXcd& B,
                                     const Eigen::MatrixXcd& R,
                                     double divisor_floor) {
  const int n = int(A.rows());
  const int m = int(B.rows());
  if (A.cols() != n || B.cols() != m || n < 1 || n > 2 || m < 1 || m > 2)
    throw UsageError("solve_sylvester_2x2: factors must be 1x1 or 2x2");
  if (R.rows() != n || R.cols() != m)
    throw UsageError("solve_sylvester_2x2: right-hand side shape mismatch");

  /* The map X -> A X - X B has spectrum lambda_i(A) - lambda_k(B); its
   * invertibility margin is the smallest gap in modulus. */
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ea(A, false);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eb(B, false);
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < m; ++k)
      gap = std::min(gap, std::abs(ea.eigenvalues()(i) - eb.eigenvalues()(k)));
  if (!(gap >= divisor_floor))
    throw SmallDivisorError("solve_sylvester_2x2", {0, 0, 0}, 0, 0, 0, 0, 0,
                            gap, divisor_floor);

  /* Column-stacked vectorization: vec(A X) = (1 (x) A) vec(X) and
   * vec(X B) = (B^T (x) 1) vec(X) with index c*n + r for X(r, c). */
  const int nm = n * m;
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(nm, nm);
  Eigen::VectorXcd rhs(nm);
  for (int c = 0; c < m; ++c) {
    K.block(c * n, c * n, n, n) += A;
    for (int r = 0; r < n; ++r) {
      rhs(c * n + r) = R(r, c);
      for (int k = 0; k < m; ++k) K(c * n + r, k * n + r) -= B(k, c);
    }
  }
  const Eigen::VectorXcd x = K.fullPivLu().solve(rhs);

  Eigen::MatrixXcd X(n, m);
  for (int c = 0; c < m; ++c)
    for (int r = 0; r < n; ++r) X(r, c) = x(c * n + r);

  const double scale = R.cwiseAbs().maxCoeff();
  const double res = (A * X - X * B - R).cwiseAbs().maxCoeff();
  if (scale > 0.0 && res > 1e-10 * scale * (1.0 + 1.0 / gap))
    throw UsageError("solve_sylvester_2x2: verification residual too large");
  return X;
}

BlockOperator random_operator(Rng& rng, int d, int J, int L, double decay,
                              double amplitude) {
  BlockOperator A(d, J, L);
  const TimeBox tb = A.tbox();
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    for (int sr = 0; sr < 2; ++sr)
      for (int sc = 0; sc < 2; ++sc)
        for (int j = -J; j <= J; ++j)
          for (int j2 = -J; j2 <= J; ++j2)
            A.mats[t](A.row(sr, j), A.row(sc, j2)) =
                rng.complex_ball(amplitude) /
                std::pow(double(mode_weight(l, j - j2, d)), decay);
  }
  return A;
}

}  // namespace qpnls
