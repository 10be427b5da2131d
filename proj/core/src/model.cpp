#include "qpnls/model.hpp"

namespace qpnls {

namespace {

/* Gradient-density forcing
 *   f = h - 2 i p u_x - i p_x u
 *       - 2 kappa  ( conj(u) u_x^2 + |u|^2 u_xx )
 *       + kappa2   ( u u_x^2 - u conj(u_x)^2 - 2 conj(u) |u_x|^2
 *                    - 2 |u|^2 conj(u_xx) )
 * with p = 1 + cos(phi_1 + x) and h = cos(phi_1) cos(x). Every term comes
 * from a real density in (u, u_x), so the Hamiltonian pointwise conditions
 * hold identically; the kappa2 term switches on a nonzero cross coefficient
 * in the second order. */
class BuiltinNonlinearity final : public Nonlinearity {
 public:
  BuiltinNonlinearity(std::string name, double kappa, double kappa2)
      : name_(std::move(name)), kappa_(kappa), kappa2_(kappa2) {}

  std::string name() const override { return name_; }

  NonlinearityEval eval(const TorusFunction& u, int Nout) const override {
    if (u.ncomp != 1) throw UsageError("Nonlinearity eval: 1-component state");
    const int d = u.d;
    /* trig degree of f is 3 Nu + 1; a grid of size >= degree + Nout + 1
     * keeps every recovered coefficient below Nout alias-free */
    const int degree = 3 * u.N + 1;
    int M = std::max(degree + Nout + 1, 2 * Nout + 1);
    if (M % 2 == 0) ++M;

    const GridValues g0 = to_grid(u, 0, M, M);
    const GridValues g1 = to_grid(derivative(u, Deriv::x), 0, M, M);
    const GridValues g2 =
        to_grid(derivative(derivative(u, Deriv::x), Deriv::x), 0, M, M);

    GridValues f = g0, p0 = g0, p0b = g0, p1 = g0, p1b = g0, p2 = g0, p2b = g0;
    const long tcount = g0.tcount();
    long stride = 1;
    for (int a = 1; a < d; ++a) stride *= M;
    for (long t = 0; t < tcount; ++t) {
      const double phi1 = kTwoPi * double((t / stride) % M) / M;
      for (int ip = 0; ip < M; ++ip) {
        const double x = kTwoPi * ip / M;
        const double p = 1.0 + std::cos(phi1 + x);
        const double px = -std::sin(phi1 + x);
        const double h = std::cos(phi1) * std::cos(x);
        const cd z0 = g0.at(t, ip), z1 = g1.at(t, ip), z2 = g2.at(t, ip);
        const cd c0 = std::conj(z0), c1 = std::conj(z1), c2 = std::conj(z2);
        const cd I(0.0, 1.0);

        f.at(t, ip) = h - 2.0 * I * p * z1 - I * px * z0 -
                      2.0 * kappa_ * (c0 * z1 * z1 + c0 * z0 * z2) +
                      kappa2_ * (z0 * z1 * z1 - z0 * c1 * c1 -
                                 2.0 * c0 * z1 * c1 - 2.0 * z0 * c0 * c2);
        p0.at(t, ip) = -I * px - 2.0 * kappa_ * c0 * z2 +
                       kappa2_ * (z1 * z1 - c1 * c1 - 2.0 * c0 * c2);
        p0b.at(t, ip) = -2.0 * kappa_ * (z1 * z1 + z0 * z2) +
                        kappa2_ * (-2.0 * z1 * c1 - 2.0 * z0 * c2);
        p1.at(t, ip) = -2.0 * I * p - 4.0 * kappa_ * c0 * z1 +
                       kappa2_ * (2.0 * z0 * z1 - 2.0 * c0 * c1);
        p1b.at(t, ip) = kappa2_ * (-2.0 * z0 * c1 - 2.0 * c0 * z1);
        p2.at(t, ip) = -2.0 * kappa_ * z0 * c0;
        p2b.at(t, ip) = -2.0 * kappa2_ * z0 * c0;
      }
    }
    NonlinearityEval ev;
    auto back = from_grid(f, d, Nout);
    ev.f = std::move(back.value);
    ev.tail = back.tail;
    const GridValues* gs[6] = {&p0, &p0b, &p1, &p1b, &p2, &p2b};
    TorusFunction* out[6] = {&ev.fz[0], &ev.fzbar[0], &ev.fz[1],
                             &ev.fzbar[1], &ev.fz[2], &ev.fzbar[2]};
    for (int k = 0; k < 6; ++k) *out[k] = from_grid(*gs[k], d, Nout).value;
    return ev;
  }

 private:
  std::string name_;
  double kappa_, kappa2_;
};

}  // namespace

std::unique_ptr<Nonlinearity> make_nonlinearity(const std::string& id) {
  if (id == "builtin")
    return std::make_unique<BuiltinNonlinearity>("builtin", 1.0, 0.0);
  if (id == "builtin_mixed")
    return std::make_unique<BuiltinNonlinearity>("builtin_mixed", 1.0, 1.0);
  throw UsageError("unknown nonlinearity: " + id);
}

cd forcing_average(const Nonlinearity& nl, int d) {
  TorusFunction zero(d, 1, 1);
  const auto ev = nl.eval(zero, 0);
  return ev.fz[1].get(0, {0, 0, 0}, 0);
}

double hamiltonian_conditions_defect(const NonlinearityEval& ev) {
  auto imag_part = [](const TorusFunction& g) {
    TorusFunction out = g;
    out -= conj_function(g);
    out *= cd(0.0, -0.5);
    return out;
  };
  auto real_part = [](const TorusFunction& g) {
    TorusFunction out = g;
    out += conj_function(g);
    out *= cd(0.5, 0.0);
    return out;
  };
  double worst = 0.0;
  worst = std::max(worst, sobolev_norm(imag_part(ev.fz[2]), 0.0));
  {
    TorusFunction c = real_part(ev.fz[1]);
    c -= derivative(ev.fz[2], Deriv::x);
    worst = std::max(worst, sobolev_norm(c, 0.0));
  }
  {
    TorusFunction c = ev.fzbar[1];
    c -= derivative(ev.fzbar[2], Deriv::x);
    worst = std::max(worst, sobolev_norm(c, 0.0));
  }
  {
    TorusFunction c = imag_part(ev.fz[0]);
    TorusFunction rhs = derivative(imag_part(ev.fz[1]), Deriv::x);
    rhs *= cd(0.5, 0.0);
    c -= rhs;
    worst = std::max(worst, sobolev_norm(c, 0.0));
  }
  return worst;
}

TorusFunction residual_F(const ModelParams& mp, const Nonlinearity& nl,
                         const std::array<double, 3>& omega,
                         const TorusFunction& u) {
  const auto ev = nl.eval(u, u.N);
  TorusFunction F = derivative(u, Deriv::omega_dphi, omega);
  F *= cd(0.0, 1.0);
  F -= derivative(derivative(u, Deriv::x), Deriv::x);
  TorusFunction mu = u;
  mu *= cd(mp.m, 0.0);
  F -= mu;
  TorusFunction ef = ev.f;
  ef *= cd(mp.epsilon, 0.0);
  F -= ef;
  return F;
}

LinOp linearized_operator(const ModelParams& mp, const Nonlinearity& nl,
                          const std::array<double, 3>& omega,
                          const TorusFunction& u, int J, int L, int Ncoef) {
  const auto ev = nl.eval(u, Ncoef);
  LinOp lin;
  lin.omega = omega;
  lin.drift = LinOp::unit_drift(mp.d);
  lin.T = BlockOperator(mp.d, J, L);

  add_symbol(lin.T, 0, [&](int j) { return cd(0, 1) * (-double(j) * j + mp.m); });
  add_symbol(lin.T, 1, [&](int j) { return cd(0, -1) * (-double(j) * j + mp.m); });

  const cd ie = cd(0.0, 1.0) * mp.epsilon;
  for (int k = 0; k < 3; ++k) {
    BlockOperator Mk(mp.d, J, L);
    add_mult(Mk, 0, 0, ev.fz[k], ie);
    add_mult(Mk, 0, 1, ev.fzbar[k], ie);
    add_mult(Mk, 1, 0, conj_function(ev.fzbar[k]), -ie);
    add_mult(Mk, 1, 1, conj_function(ev.fz[k]), -ie);
    if (k == 0) {
      lin.T += Mk;
    } else {
      BlockOperator Dk(mp.d, J, 0);
      add_symbol(Dk, 0, [&](int j) { return std::pow(cd(0, j), k); });
      add_symbol(Dk, 1, [&](int j) { return std::pow(cd(0, j), k); });
      add_scaled(lin.T, compose(Mk, Dk, L), cd(1, 0));
    }
  }
  return lin;
}

double symplectic_form(const TorusFunction& u, const TorusFunction& v,
                       const std::array<double, 3>& phi) {
  if (u.ncomp != 1 || v.ncomp != 1)
    throw UsageError("symplectic_form: 1-component sections expected");
  if (u.d != v.d) throw UsageError("symplectic_form: dimension mismatch");
  const int Nj = std::max(u.N, v.N);
  cd acc(0.0, 0.0);
  for (int j = -Nj; j <= Nj; ++j) {
    cd cu(0.0, 0.0), cv(0.0, 0.0);
    const TimeBox tu = u.tbox(), tv = v.tbox();
    for (long t = 0; t < tu.count(); ++t) {
      const auto l = tu.unflatten(t);
      double ang = 0.0;
      for (int a = 0; a < u.d; ++a) ang += l[a] * phi[a];
      cu += u.get(0, l, j) * std::polar(1.0, ang);
    }
    for (long t = 0; t < tv.count(); ++t) {
      const auto l = tv.unflatten(t);
      double ang = 0.0;
      for (int a = 0; a < v.d; ++a) ang += l[a] * phi[a];
      cv += v.get(0, l, j) * std::polar(1.0, ang);
    }
    acc += std::conj(cu) * cv;
  }
  return kTwoPi * acc.imag();
}

}  // namespace qpnls
