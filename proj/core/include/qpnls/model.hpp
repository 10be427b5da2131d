#pragma once

#include <memory>

#include "qpnls/lin_op.hpp"

namespace qpnls {

/* f and its partial derivatives with respect to d_x^k u and conj(d_x^k u),
 * k = 0, 1, 2, all projected to a common cutoff. */
struct NonlinearityEval {
  TorusFunction f;
  std::array<TorusFunction, 3> fz;
  std::array<TorusFunction, 3> fzbar;
  double tail = 0.0; /* l2 mass of f content beyond the requested cutoff */
};

/* Quasi-linear forcing term f(phi, x, u, u_x, u_xx) entering
 *   i omega.d_phi u = u_xx + m u + eps f .
 * Implementations must derive from a real Hamiltonian density, which is
 * what hamiltonian_conditions_defect certifies pointwise. */
class Nonlinearity {
 public:
  virtual ~Nonlinearity() = default;
  virtual std::string name() const = 0;
  virtual NonlinearityEval eval(const TorusFunction& u, int Nout) const = 0;
};

/* Registry: "builtin" (gradient density with a transport coefficient and a
 * cubic |u_x|^2 |u|^2 term) and "builtin_mixed" (same plus a cubic term that
 * produces a nonzero cross second-order coefficient). */
std::unique_ptr<Nonlinearity> make_nonlinearity(const std::string& id);

struct ModelParams {
  int d = 1;
  double m = 1.0;
  double epsilon = 1e-3;
  std::string plugin = "builtin";
};

/* Average of the first-order coefficient at u = 0; the forcing is
 * nondegenerate iff this does not vanish. */
cd forcing_average(const Nonlinearity& nl, int d);

/* Largest violation of the pointwise conditions a Hamiltonian density
 * imposes on the partials:
 *   Im fz2 = 0,   Re fz1 = dx fz2,   fz1bar = dx fz2bar,
 *   Im fz0 = (1/2) dx Im fz1 .                                              */
double hamiltonian_conditions_defect(const NonlinearityEval& ev);

/* F(u) = i omega.d_phi u - u_xx - m u - eps f(u), projected to u's box. */
TorusFunction residual_F(const ModelParams& mp, const Nonlinearity& nl,
                         const std::array<double, 3>& omega,
                         const TorusFunction& u);

/* Linearization of -i F at the state u as a transport + Toplitz operator:
 *   omega.d_phi + i (E + A2) dxx + i A1 dx + i (m E + A0),
 * with A_k the multiplication pattern [[a_k, b_k], [-conj b_k, -conj a_k]],
 * a_k = eps fzk(u), b_k = eps fzkbar(u). Coefficients are evaluated at
 * cutoff Ncoef and installed in a (J, L) section. */
LinOp linearized_operator(const ModelParams& mp, const Nonlinearity& nl,
                          const std::array<double, 3>& omega,
                          const TorusFunction& u, int J, int L, int Ncoef);

/* Symplectic pairing of two x-sections at frozen phase:
 *   Im integral conj(u) v dx  =  2 pi Im sum_j conj(u_j(phi)) v_j(phi). */
double symplectic_form(const TorusFunction& u, const TorusFunction& v,
                       const std::array<double, 3>& phi = {0.0, 0.0, 0.0});

}  // namespace qpnls
