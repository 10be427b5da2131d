#pragma once

#include "qpnls/common.hpp"

namespace qpnls {

/* Finite sample of the frequency window [1/2, 3/2]^d. All parameter-dependent
 * quantities in the scheme are families indexed by this grid; exclusion steps
 * deactivate points rather than remove them, so indices stay stable. */
struct ParamGrid {
  int d = 1;
  int per_axis = 1;
  double lo = 0.5, hi = 1.5;
  std::vector<std::array<double, 3>> omegas;

  static ParamGrid make(int d, int per_axis, double lo = 0.5, double hi = 1.5) {
    ParamGrid g;
    g.d = d;
    g.per_axis = per_axis;
    g.lo = lo;
    g.hi = hi;
    long total = 1;
    for (int a = 0; a < d; ++a) total *= per_axis;
    g.omegas.resize(total);
    for (long i = 0; i < total; ++i) {
      std::array<double, 3> w{0.0, 0.0, 0.0};
      long idx = i;
      for (int a = d - 1; a >= 0; --a) {
        const int k = int(idx % per_axis);
        idx /= per_axis;
        w[a] = (per_axis == 1) ? 0.5 * (lo + hi)
                               : lo + (hi - lo) * double(k) / (per_axis - 1);
      }
      g.omegas[i] = w;
    }
    return g;
  }

  long size() const { return long(omegas.size()); }
  const std::array<double, 3>& omega(long i) const { return omegas[i]; }

  double distance(long i, long k) const {
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      const double t = omegas[i][a] - omegas[k][a];
      s += t * t;
    }
    return std::sqrt(s);
  }
};

/* Values attached to every grid point, with an activity mask. */
template <class T>
struct ParamFamily {
  std::vector<T> values;
  std::vector<char> active;

  ParamFamily() = default;
  explicit ParamFamily(long n, const T& init = T())
      : values(n, init), active(n, 1) {}

  long size() const { return long(values.size()); }
  long active_count() const {
    long c = 0;
    for (char a : active) c += (a != 0);
    return c;
  }
};

struct LipNorm {
  double sup = 0.0;   /* max over active points of the value norm */
  double lip = 0.0;   /* max difference quotient over active pairs */
  double total = 0.0; /* sup + gamma * lip */
  bool degenerate = false; /* fewer than two active points: lip part vacuous */
};

/* Weighted Lipschitz norm of a grid family: sup ||f|| + gamma *
 * sup ||f(w) - f(w')|| / |w - w'|. norm_of(T) and diff_norm(T, T) supply the
 * value norm and the norm of a difference. */
template <class T, class NormOf, class DiffNorm>
LipNorm lip_norm(const ParamGrid& g, const std::vector<T>& vals,
                 const std::vector<char>& active, double gamma,
                 NormOf norm_of, DiffNorm diff_norm) {
  if (long(vals.size()) != g.size() || vals.size() != active.size())
    throw UsageError("lip_norm: family size does not match grid");
  LipNorm out;
  long nact = 0;
  for (long i = 0; i < g.size(); ++i) {
    if (!active[i]) continue;
    ++nact;
    out.sup = std::max(out.sup, norm_of(vals[i]));
    for (long k = i + 1; k < g.size(); ++k) {
      if (!active[k]) continue;
      const double dist = g.distance(i, k);
      if (dist <= 0.0) continue;
      out.lip = std::max(out.lip, diff_norm(vals[i], vals[k]) / dist);
    }
  }
  out.degenerate = (nact < 2);
  out.total = out.sup + gamma * out.lip;
  return out;
}

inline LipNorm lip_norm(const ParamGrid& g, const std::vector<double>& vals,
                        const std::vector<char>& active, double gamma) {
  return lip_norm(g, vals, active, gamma,
                  [](double v) { return std::abs(v); },
                  [](double a, double b) { return std::abs(a - b); });
}

inline LipNorm lip_norm(const ParamGrid& g, const std::vector<cd>& vals,
                        const std::vector<char>& active, double gamma) {
  return lip_norm(g, vals, active, gamma,
                  [](cd v) { return std::abs(v); },
                  [](cd a, cd b) { return std::abs(a - b); });
}

}  // namespace qpnls
