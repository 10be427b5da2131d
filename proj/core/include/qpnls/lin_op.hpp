#pragma once

#include "qpnls/block_operator.hpp"

namespace qpnls {

/* Full linearized operator: a transport part c(phi) omega.d_phi acting the
 * same way on both components, plus a block-Toplitz tail. The transport
 * symbol depends on the absolute time index, so it cannot live inside the
 * Toplitz storage; c is a real x-independent scalar (constant 1 along most
 * of the reduction chain). */
struct LinOp {
  std::array<double, 3> omega{1.0, 0.0, 0.0};
  TorusFunction drift;  /* 1-component, x-independent, real */
  BlockOperator T;

  static TorusFunction unit_drift(int d) {
    auto one = TorusFunction(d, 0, 1, Reality::real_valued);
    one.at(0, {0, 0, 0}, 0) = cd(1.0, 0.0);
    return one;
  }
};

inline TorusFunction apply(const LinOp& L, const TorusFunction& u) {
  if (u.ncomp != 2) throw UsageError("LinOp apply: 2-component state expected");
  TorusFunction out(u.d, u.N, 2, u.tag);
  for (int s = 0; s < 2; ++s) {
    TorusFunction der = derivative(u.component(s), Deriv::omega_dphi, L.omega);
    TorusFunction scaled = multiply(L.drift, der, u.N).value;
    std::copy(scaled.data.begin(), scaled.data.end(),
              out.data.begin() + s * out.per_comp());
  }
  out += apply(L.T, u);
  return out;
}

}  // namespace qpnls
