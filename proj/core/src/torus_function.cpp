#include "qpnls/torus_function.hpp"

#include <algorithm>
#include <cstring>

namespace qpnls {

const char* to_string(Reality r) {
  switch (r) {
    case Reality::complex_valued: return "complex";
    case Reality::real_valued: return "real-valued";
    case Reality::conjugate_pair: return "conjugate-pair";
  }
  return "?";
}

TorusFunction& TorusFunction::operator+=(const TorusFunction& o) {
  if (!same_shape(o)) throw UsageError("TorusFunction sum: shape mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  return *this;
}
TorusFunction& TorusFunction::operator-=(const TorusFunction& o) {
  if (!same_shape(o)) throw UsageError("TorusFunction difference: shape mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
  return *this;
}
TorusFunction& TorusFunction::operator*=(cd s) {
  for (auto& c : data) c *= s;
  return *this;
}

TorusFunction TorusFunction::single_mode(int d, int N, const std::array<int, 3>& l,
                                         int j, cd value, int ncomp, int comp) {
  TorusFunction u(d, N, ncomp);
  u.at(comp, l, j) = value;
  return u;
}

TorusFunction TorusFunction::component(int comp) const {
  TorusFunction out(d, N, 1, tag == Reality::conjugate_pair ? Reality::complex_valued : tag);
  std::copy(data.begin() + comp * per_comp(), data.begin() + (comp + 1) * per_comp(),
            out.data.begin());
  return out;
}

double sobolev_norm(const TorusFunction& u, double s) {
  const TimeBox tb = u.tbox();
  double best = 0.0;
  for (int comp = 0; comp < u.ncomp; ++comp) {
    double acc = 0.0;
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      for (int j = -u.N; j <= u.N; ++j) {
        double a = std::abs(u.data[(comp * tb.count() + t) * u.nspace() + (j + u.N)]);
        if (a == 0.0) continue;
        acc += a * a * std::pow(double(mode_weight(l, j, u.d)), 2.0 * s);
      }
    }
    best = std::max(best, std::sqrt(acc));
  }
  return best;
}

TorusFunction embed(const TorusFunction& u, int Nnew) {
  TorusFunction out(u.d, Nnew, u.ncomp, u.tag);
  const TimeBox tb = u.tbox();
  const int Nc = std::min(u.N, Nnew);
  for (int comp = 0; comp < u.ncomp; ++comp)
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      if (linf(l, u.d) > Nc) continue;
      for (int j = -Nc; j <= Nc; ++j) out.at(comp, l, j) = u.at(comp, l, j);
    }
  return out;
}

Projection project(const TorusFunction& u, int N) {
  if (N > u.N) throw UsageError("project: cutoff exceeds stored cutoff");
  Projection pr{TorusFunction(u.d, N, u.ncomp, u.tag), u};
  const TimeBox tb = u.tbox();
  for (int comp = 0; comp < u.ncomp; ++comp)
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      if (linf(l, u.d) > N) continue;
      for (int j = -N; j <= N; ++j) {
        pr.low.at(comp, l, j) = u.at(comp, l, j);
        pr.high.at(comp, l, j) = cd(0.0, 0.0);
      }
    }
  return pr;
}

namespace {

struct SparseMode {
  std::array<int, 3> l;
  int j;
  cd c;
};

std::vector<SparseMode> nonzero_modes(const TorusFunction& f) {
  std::vector<SparseMode> m;
  const TimeBox tb = f.tbox();
  for (long a = 0; a < tb.count(); ++a) {
    const auto l = tb.unflatten(a);
    for (int j = -f.N; j <= f.N; ++j) {
      const cd c = f.at(0, l, j);
      if (c != cd(0.0, 0.0)) m.push_back({l, j, c});
    }
  }
  return m;
}

}  // namespace

ProductResult multiply(const TorusFunction& u, const TorusFunction& v, int Nout) {
  if (u.ncomp != 1 || v.ncomp != 1)
    throw UsageError("multiply: single-component inputs expected");
  if (u.d != v.d) throw UsageError("multiply: dimension mismatch");
  if (Nout < 0) Nout = std::max(u.N, v.N);
  const int Nbig = u.N + v.N;
  TorusFunction big(u.d, Nbig, 1);
  const TimeBox tbig = big.tbox();

  /* Two exact evaluation routes: the sparse convolution wins when the inputs
   * have few occupied modes; the grid route (sample both factors on the
   * product Nyquist grid, multiply pointwise, transform back) wins when they
   * are dense. The grid at 2 Nbig + 1 nodes per axis holds the full product
   * spectrum, so both give the complete convolution. */
  const auto mu = nonzero_modes(u), mv = nonzero_modes(v);
  const int M = 2 * Nbig + 1;
  double nodes = M;
  for (int a = 0; a < u.d; ++a) nodes *= M;
  const bool use_grid =
      double(mu.size()) * double(mv.size()) > 4.0 * nodes * M;
  if (use_grid) {
    GridValues gu = to_grid(u, 0, M, M);
    const GridValues gv = to_grid(v, 0, M, M);
    for (std::size_t i = 0; i < gu.v.size(); ++i) gu.v[i] *= gv.v[i];
    big = from_grid(gu, u.d, Nbig).value;
  } else {
    for (const SparseMode& a : mu) {
      for (const SparseMode& b : mv) {
        const std::array<int, 3> lc{a.l[0] + b.l[0], a.l[1] + b.l[1],
                                    a.l[2] + b.l[2]};
        big.data[tbig.flatten(lc) * big.nspace() + (a.j + b.j + Nbig)] +=
            a.c * b.c;
      }
    }
  }
  ProductResult res{TorusFunction(u.d, Nout, 1), 0.0};
  double tail2 = 0.0;
  for (long t = 0; t < tbig.count(); ++t) {
    const auto l = tbig.unflatten(t);
    const bool lin = linf(l, u.d) <= Nout;
    for (int j = -Nbig; j <= Nbig; ++j) {
      const cd c = big.data[t * big.nspace() + (j + Nbig)];
      if (c == cd(0.0, 0.0)) continue;
      if (lin && std::abs(j) <= Nout)
        res.value.at(0, l, j) = c;
      else
        tail2 += std::norm(c);
    }
  }
  res.tail = std::sqrt(tail2);
  return res;
}

TorusFunction derivative(const TorusFunction& u, Deriv kind,
                         const std::array<double, 3>& omega, int axis) {
  TorusFunction out = u;
  const TimeBox tb = u.tbox();
  for (int comp = 0; comp < u.ncomp; ++comp)
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      cd sym(0.0, 0.0);
      if (kind == Deriv::phi) sym = cd(0.0, double(l[axis]));
      if (kind == Deriv::omega_dphi) sym = cd(0.0, dot(omega, l, u.d));
      for (int j = -u.N; j <= u.N; ++j) {
        const cd m = (kind == Deriv::x) ? cd(0.0, double(j)) : sym;
        out.data[(comp * tb.count() + t) * u.nspace() + (j + u.N)] *= m;
      }
    }
  return out;
}

TorusFunction dx_inverse(const TorusFunction& u) {
  TorusFunction out = u;
  const TimeBox tb = u.tbox();
  for (int comp = 0; comp < u.ncomp; ++comp)
    for (long t = 0; t < tb.count(); ++t)
      for (int j = -u.N; j <= u.N; ++j) {
        cd& c = out.data[(comp * tb.count() + t) * u.nspace() + (j + u.N)];
        c = (j == 0) ? cd(0.0, 0.0) : c / cd(0.0, double(j));
      }
  return out;
}

TorusFunction omega_dphi_inverse(const TorusFunction& u,
                                 const std::array<double, 3>& omega,
                                 double divisor_floor) {
  TorusFunction out = u;
  const TimeBox tb = u.tbox();
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    const bool zero = (linf(l, u.d) == 0);
    const double wl = dot(omega, l, u.d);
    if (!zero && std::abs(wl) < divisor_floor) {
      bool active = false;
      for (int comp = 0; comp < u.ncomp && !active; ++comp)
        for (int j = -u.N; j <= u.N; ++j)
          if (u.data[(comp * tb.count() + t) * u.nspace() + (j + u.N)] != cd(0.0, 0.0)) {
            active = true;
            break;
          }
      if (active)
        throw SmallDivisorError("omega_dphi_inverse", l, u.d, 0, 0, 0, 0,
                                std::abs(wl), divisor_floor);
    }
    for (int comp = 0; comp < u.ncomp; ++comp)
      for (int j = -u.N; j <= u.N; ++j) {
        cd& c = out.data[(comp * tb.count() + t) * u.nspace() + (j + u.N)];
        c = zero ? cd(0.0, 0.0) : c / cd(0.0, wl);
      }
  }
  return out;
}

TorusFunction conj_function(const TorusFunction& u) {
  TorusFunction out(u.d, u.N, u.ncomp, u.tag);
  const TimeBox tb = u.tbox();
  for (int comp = 0; comp < u.ncomp; ++comp)
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
      for (int j = -u.N; j <= u.N; ++j)
        out.at(comp, l, j) = std::conj(u.at(comp, ml, -j));
    }
  return out;
}

double reality_defect(const TorusFunction& u) {
  const TimeBox tb = u.tbox();
  double worst = 0.0;
  if (u.tag == Reality::real_valued) {
    for (int comp = 0; comp < u.ncomp; ++comp)
      for (long t = 0; t < tb.count(); ++t) {
        const auto l = tb.unflatten(t);
        const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
        for (int j = -u.N; j <= u.N; ++j)
          worst = std::max(worst,
                           std::abs(u.at(comp, ml, -j) - std::conj(u.at(comp, l, j))));
      }
  } else if (u.tag == Reality::conjugate_pair) {
    if (u.ncomp != 2) throw UsageError("conjugate-pair tag requires 2 components");
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
      for (int j = -u.N; j <= u.N; ++j)
        worst = std::max(worst,
                         std::abs(u.at(1, l, j) - std::conj(u.at(0, ml, -j))));
    }
  }
  return worst;
}

void symmetrize_reality(TorusFunction& u) {
  const TimeBox tb = u.tbox();
  if (u.tag == Reality::real_valued) {
    for (int comp = 0; comp < u.ncomp; ++comp)
      for (long t = 0; t < tb.count(); ++t) {
        const auto l = tb.unflatten(t);
        const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
        for (int j = -u.N; j <= u.N; ++j) {
          const cd a = u.at(comp, l, j), b = u.at(comp, ml, -j);
          const cd avg = 0.5 * (a + std::conj(b));
          u.at(comp, l, j) = avg;
          u.at(comp, ml, -j) = std::conj(avg);
        }
      }
  } else if (u.tag == Reality::conjugate_pair) {
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      const std::array<int, 3> ml{-l[0], -l[1], -l[2]};
      for (int j = -u.N; j <= u.N; ++j)
        u.at(1, l, j) = std::conj(u.at(0, ml, -j));
    }
  }
}

TorusFunction make_conjugate_pair(const TorusFunction& uplus) {
  if (uplus.ncomp != 1) throw UsageError("make_conjugate_pair: 1-component input");
  TorusFunction out(uplus.d, uplus.N, 2, Reality::conjugate_pair);
  std::copy(uplus.data.begin(), uplus.data.end(), out.data.begin());
  const TorusFunction cu = conj_function(uplus);
  std::copy(cu.data.begin(), cu.data.end(), out.data.begin() + out.per_comp());
  return out;
}

/* ---- grid machinery ----------------------------------------------------- */

namespace {

/* Apply the out_n x dims[axis] matrix T (row-major) along one axis of a
 * row-major tensor; dims is updated in place. */
std::vector<cd> axis_apply(const std::vector<cd>& in, std::vector<int>& dims,
                           int axis, int out_n, const std::vector<cd>& T) {
  long outer = 1, inner = 1;
  const int n = dims[axis];
  for (int a = 0; a < axis; ++a) outer *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) inner *= dims[a];
  std::vector<cd> out(std::size_t(outer) * out_n * inner, cd(0.0, 0.0));
  for (long o = 0; o < outer; ++o)
    for (int r = 0; r < out_n; ++r) {
      cd* dst = &out[(o * out_n + r) * inner];
      const cd* Trow = &T[std::size_t(r) * n];
      for (int c = 0; c < n; ++c) {
        const cd t = Trow[c];
        if (t == cd(0.0, 0.0)) continue;
        const cd* src = &in[(o * long(n) + c) * inner];
        for (long i = 0; i < inner; ++i) dst[i] += t * src[i];
      }
    }
  dims[axis] = out_n;
  return out;
}

/* M x (2N+1) synthesis: value at node p of mode k is e^{i k 2 pi p / M}. */
std::vector<cd> synthesis_matrix(int N, int M) {
  std::vector<cd> T(std::size_t(M) * (2 * N + 1));
  for (int p = 0; p < M; ++p)
    for (int k = -N; k <= N; ++k)
      T[std::size_t(p) * (2 * N + 1) + (k + N)] = std::polar(1.0, k * kTwoPi * p / M);
  return T;
}

/* (2K+1) x M analysis, exact on series band-limited below the Nyquist K. */
std::vector<cd> analysis_matrix(int K, int M) {
  std::vector<cd> T(std::size_t(2 * K + 1) * M);
  for (int k = -K; k <= K; ++k)
    for (int p = 0; p < M; ++p)
      T[std::size_t(k + K) * M + p] = std::polar(1.0 / M, -k * kTwoPi * p / M);
  return T;
}

std::vector<cd> comp_slice(const TorusFunction& u, int comp) {
  return std::vector<cd>(u.data.begin() + comp * u.per_comp(),
                         u.data.begin() + (comp + 1) * u.per_comp());
}

}  // namespace

int grid_size(int N, int oversample) {
  int M = std::max(1, oversample) * (2 * N + 1);
  if (M % 2 == 0) ++M;
  return M;
}

GridValues to_grid(const TorusFunction& u, int comp, int Mt, int Mx) {
  std::vector<int> dims(u.d + 1, u.tbox().per_axis());
  dims[u.d] = u.nspace();
  std::vector<cd> cur = comp_slice(u, comp);
  const auto Tt = synthesis_matrix(u.N, Mt);
  for (int a = 0; a < u.d; ++a) cur = axis_apply(cur, dims, a, Mt, Tt);
  const auto Tx = synthesis_matrix(u.N, Mx);
  cur = axis_apply(cur, dims, u.d, Mx, Tx);
  GridValues g{u.d, Mt, Mx, std::move(cur)};
  return g;
}

GridProjection from_grid(const GridValues& g, int d, int N) {
  if (g.Mt % 2 == 0 || g.Mx % 2 == 0)
    throw UsageError("from_grid: odd grid sizes required");
  const int Kt = (g.Mt - 1) / 2, Kx = (g.Mx - 1) / 2;
  if (Kt < N || Kx < N) throw UsageError("from_grid: grid below target cutoff");
  std::vector<int> dims(d + 1, g.Mt);
  dims[d] = g.Mx;
  std::vector<cd> cur = g.v;
  const auto Wt = analysis_matrix(Kt, g.Mt);
  for (int a = 0; a < d; ++a) cur = axis_apply(cur, dims, a, 2 * Kt + 1, Wt);
  const auto Wx = analysis_matrix(Kx, g.Mx);
  cur = axis_apply(cur, dims, d, 2 * Kx + 1, Wx);

  GridProjection out{TorusFunction(d, N, 1), 0.0};
  double tail2 = 0.0;
  /* cur is a rectangle: time axes of size 2Kt+1, space of size 2Kx+1 */
  const long tcount = [&] {
    long c = 1;
    for (int a = 0; a < d; ++a) c *= (2 * Kt + 1);
    return c;
  }();
  for (long t = 0; t < tcount; ++t) {
    std::array<int, 3> l{0, 0, 0};
    long idx = t;
    for (int a = d - 1; a >= 0; --a) {
      l[a] = int(idx % (2 * Kt + 1)) - Kt;
      idx /= (2 * Kt + 1);
    }
    const bool lin = linf(l, d) <= N;
    for (int j = -Kx; j <= Kx; ++j) {
      const cd c = cur[t * (2 * Kx + 1) + (j + Kx)];
      if (lin && std::abs(j) <= N)
        out.value.at(0, l, j) = c;
      else
        tail2 += std::norm(c);
    }
  }
  out.tail = std::sqrt(tail2);
  return out;
}

GridProjection pointwise_map(const TorusFunction& u, cd (*fn)(cd), int oversample) {
  if (u.ncomp != 1) throw UsageError("pointwise_map: 1-component input");
  const int M = grid_size(u.N, oversample);
  GridValues g = to_grid(u, 0, M, M);
  for (auto& v : g.v) v = fn(v);
  return from_grid(g, u.d, u.N);
}

cd eval_at(const TorusFunction& u, int comp, const std::array<double, 3>& phi,
           double x) {
  const TimeBox tb = u.tbox();
  cd acc(0.0, 0.0);
  for (long t = 0; t < tb.count(); ++t) {
    const auto l = tb.unflatten(t);
    double ang = 0.0;
    for (int a = 0; a < u.d; ++a) ang += l[a] * phi[a];
    cd ex = std::polar(1.0, ang - u.N * x);
    const cd step = std::polar(1.0, x);
    for (int j = -u.N; j <= u.N; ++j) {
      acc += u.data[(comp * tb.count() + t) * u.nspace() + (j + u.N)] * ex;
      ex *= step;
    }
  }
  return acc;
}

/* ---- diffeomorphisms ---------------------------------------------------- */

namespace {

void require_real(const TorusFunction& f, const char* who) {
  TorusFunction g = f;
  g.tag = Reality::real_valued;
  double scale = sobolev_norm(f, 0.0);
  if (reality_defect(g) > 1e-10 * (1.0 + scale))
    throw UsageError(std::string(who) + ": real-valued input required");
}

/* Time axes to values, space kept spectral: rows indexed by the Mt^d grid,
 * columns by j. */
std::vector<cd> half_transform_time(const TorusFunction& u, int comp, int Mt) {
  std::vector<int> dims(u.d + 1, u.tbox().per_axis());
  dims[u.d] = u.nspace();
  std::vector<cd> cur(u.data.begin() + comp * u.per_comp(),
                      u.data.begin() + (comp + 1) * u.per_comp());
  const auto Tt = synthesis_matrix(u.N, Mt);
  for (int a = 0; a < u.d; ++a) cur = axis_apply(cur, dims, a, Mt, Tt);
  return cur;
}

cd eval_space_series(const cd* row, int N, double y) {
  cd acc(0.0, 0.0);
  cd ex = std::polar(1.0, -N * y);
  const cd step = std::polar(1.0, y);
  for (int j = -N; j <= N; ++j) {
    acc += row[j + N] * ex;
    ex *= step;
  }
  return acc;
}

}  // namespace

ComposeResult compose_space_diffeo(const TorusFunction& u, const TorusFunction& xi,
                                   bool with_jacobian_sqrt, int oversample) {
  if (u.ncomp != 1) throw UsageError("compose_space_diffeo: 1-component input");
  if (u.d != xi.d) throw UsageError("compose_space_diffeo: dimension mismatch");
  require_real(xi, "compose_space_diffeo");
  const int Nw = std::max(u.N, xi.N);
  const int Mt = grid_size(Nw, oversample), Mx = Mt;

  const GridValues xiv = to_grid(xi, 0, Mt, Mx);
  const GridValues xixv = to_grid(derivative(xi, Deriv::x), 0, Mt, Mx);
  double supxx = 0.0;
  for (const auto& v : xixv.v) supxx = std::max(supxx, std::abs(v.real()));
  if (supxx > 0.5 + 1e-12)
    throw UsageError("compose_space_diffeo: sup|xi_x| exceeds 1/2");

  const std::vector<cd> half = half_transform_time(u, 0, Mt);
  GridValues out{u.d, Mt, Mx, std::vector<cd>(xiv.v.size())};
  const long tcount = out.tcount();
  for (long t = 0; t < tcount; ++t) {
    const cd* row = &half[t * u.nspace()];
    for (int p = 0; p < Mx; ++p) {
      const double xp = kTwoPi * p / Mx;
      const double y = xp + xiv.at(t, p).real();
      cd val = eval_space_series(row, u.N, y);
      if (with_jacobian_sqrt) val *= std::sqrt(1.0 + xixv.at(t, p).real());
      out.at(t, p) = val;
    }
  }
  GridProjection pr = from_grid(out, u.d, u.N);
  return ComposeResult{std::move(pr.value), pr.tail};
}

DiffeoInverse invert_diffeo(const TorusFunction& xi, double tol, int maxit,
                            int oversample) {
  require_real(xi, "invert_diffeo");
  const int Mt = grid_size(xi.N, oversample), Mx = Mt;
  const std::vector<cd> half = half_transform_time(xi, 0, Mt);
  const TorusFunction xix = derivative(xi, Deriv::x);
  const std::vector<cd> halfx = half_transform_time(xix, 0, Mt);

  GridValues hat{xi.d, Mt, Mx, {}};
  hat.v.assign(std::size_t(hat.tcount()) * Mx, cd(0.0, 0.0));
  double worst_resid = 0.0;
  const long tcount = hat.tcount();
  for (long t = 0; t < tcount; ++t) {
    const cd* row = &half[t * xi.nspace()];
    for (int p = 0; p < Mx; ++p) {
      const double y = kTwoPi * p / Mx;
      double z = -eval_space_series(row, xi.N, y).real();
      double resid = 1.0;
      for (int it = 0; it < maxit && resid > tol; ++it) {
        const double znew = -eval_space_series(row, xi.N, y + z).real();
        resid = std::abs(znew - z);
        z = znew;
      }
      worst_resid = std::max(worst_resid, resid);
      hat.at(t, p) = cd(z, 0.0);
    }
  }
  GridProjection pr = from_grid(hat, xi.d, xi.N);
  pr.value.tag = Reality::real_valued;
  symmetrize_reality(pr.value);

  /* composition identity at the nodes: xi_x(x) + xihat_y(y) + product = 0
   * where x = y + xihat(y) */
  const TorusFunction haty = derivative(pr.value, Deriv::x);
  const GridValues hatyv = to_grid(haty, 0, Mt, Mx);
  double defect = 0.0;
  for (long t = 0; t < tcount; ++t) {
    const cd* rowx = &halfx[t * xi.nspace()];
    for (int p = 0; p < Mx; ++p) {
      const double y = kTwoPi * p / Mx;
      const double x = y + hat.at(t, p).real();
      const double a = eval_space_series(rowx, xi.N, x).real();
      const double b = hatyv.at(t, p).real();
      defect = std::max(defect, std::abs(a + b + a * b));
    }
  }
  return DiffeoInverse{std::move(pr.value), worst_resid, defect};
}

ComposeResult compose_time_diffeo(const TorusFunction& u, const TorusFunction& alpha,
                                  const std::array<double, 3>& omega,
                                  int oversample) {
  if (u.ncomp != 1) throw UsageError("compose_time_diffeo: 1-component input");
  if (u.d != alpha.d) throw UsageError("compose_time_diffeo: dimension mismatch");
  require_real(alpha, "compose_time_diffeo");
  /* alpha must not depend on x */
  {
    const TimeBox tb = alpha.tbox();
    double offx = 0.0;
    for (long t = 0; t < tb.count(); ++t)
      for (int j = -alpha.N; j <= alpha.N; ++j)
        if (j != 0)
          offx = std::max(offx,
                          std::abs(alpha.data[t * alpha.nspace() + (j + alpha.N)]));
    if (offx > 1e-12) throw UsageError("compose_time_diffeo: alpha must be x-independent");
  }
  const int Nw = std::max(u.N, alpha.N);
  const int Mt = grid_size(Nw, oversample), Mx = grid_size(Nw, oversample);

  /* Jacobian 1 + omega.d_phi alpha must stay positive */
  {
    const GridValues jv = to_grid(derivative(alpha, Deriv::omega_dphi, omega), 0, Mt, 1);
    for (const auto& v : jv.v)
      if (1.0 + v.real() <= 0.05)
        throw UsageError("compose_time_diffeo: Jacobian not positive");
  }

  /* space to values, time axes spectral */
  std::vector<int> dims(u.d + 1, u.tbox().per_axis());
  dims[u.d] = u.nspace();
  std::vector<cd> cur(u.data.begin(), u.data.begin() + u.per_comp());
  const auto Tx = synthesis_matrix(u.N, Mx);
  cur = axis_apply(cur, dims, u.d, Mx, Tx);  /* [tbox..., Mx] */

  const GridValues av = to_grid(alpha, 0, Mt, 1);
  const TimeBox tb = u.tbox();
  GridValues out{u.d, Mt, Mx, {}};
  out.v.assign(std::size_t(out.tcount()) * Mx, cd(0.0, 0.0));

  const long tcount = out.tcount();
  std::vector<cd> phase(tb.count());
  std::vector<std::vector<cd>> axis_tab(u.d, std::vector<cd>(tb.per_axis()));
  for (long tp = 0; tp < tcount; ++tp) {
    /* node angles */
    std::array<double, 3> phi{0, 0, 0};
    long idx = tp;
    for (int a = u.d - 1; a >= 0; --a) {
      phi[a] = kTwoPi * double(idx % Mt) / Mt;
      idx /= Mt;
    }
    const double shift = av.v[tp].real();
    for (int a = 0; a < u.d; ++a) {
      const double ang = phi[a] + omega[a] * shift;
      for (int k = -u.N; k <= u.N; ++k)
        axis_tab[a][k + u.N] = std::polar(1.0, k * ang);
    }
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      cd ph(1.0, 0.0);
      for (int a = 0; a < u.d; ++a) ph *= axis_tab[a][l[a] + u.N];
      phase[t] = ph;
    }
    cd* dst = &out.v[tp * Mx];
    for (long t = 0; t < tb.count(); ++t) {
      const cd ph = phase[t];
      const cd* src = &cur[t * Mx];
      for (int p = 0; p < Mx; ++p) dst[p] += ph * src[p];
    }
  }
  GridProjection pr = from_grid(out, u.d, u.N);
  return ComposeResult{std::move(pr.value), pr.tail};
}

DiffeoInverse invert_time_diffeo(const TorusFunction& alpha,
                                 const std::array<double, 3>& omega, double tol,
                                 int maxit, int oversample) {
  require_real(alpha, "invert_time_diffeo");
  const int Mt = grid_size(alpha.N, oversample);
  const TimeBox tb = alpha.tbox();

  /* direct evaluation of the x-independent alpha at arbitrary phi */
  auto eval_alpha = [&](const std::array<double, 3>& phi) {
    double acc = 0.0;
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      double ang = 0.0;
      for (int a = 0; a < alpha.d; ++a) ang += l[a] * phi[a];
      acc += (alpha.data[t * alpha.nspace() + alpha.N] * std::polar(1.0, ang)).real();
    }
    return acc;
  };

  GridValues hat{alpha.d, Mt, 1, {}};
  hat.v.assign(std::size_t(hat.tcount()), cd(0.0, 0.0));
  double worst = 0.0;
  for (long tp = 0; tp < hat.tcount(); ++tp) {
    std::array<double, 3> theta{0, 0, 0};
    long idx = tp;
    for (int a = alpha.d - 1; a >= 0; --a) {
      theta[a] = kTwoPi * double(idx % Mt) / Mt;
      idx /= Mt;
    }
    double z = -eval_alpha(theta);
    double resid = 1.0;
    for (int it = 0; it < maxit && resid > tol; ++it) {
      std::array<double, 3> phi = theta;
      for (int a = 0; a < alpha.d; ++a) phi[a] += omega[a] * z;
      const double znew = -eval_alpha(phi);
      resid = std::abs(znew - z);
      z = znew;
    }
    worst = std::max(worst, resid);
    hat.v[tp] = cd(z, 0.0);
  }
  /* from_grid needs odd Mx >= 2N+1; synthesize constant-in-x data */
  const int Mx = 2 * alpha.N + 1;
  GridValues full{alpha.d, Mt, Mx, {}};
  full.v.assign(std::size_t(full.tcount()) * Mx, cd(0.0, 0.0));
  for (long tp = 0; tp < full.tcount(); ++tp)
    for (int p = 0; p < Mx; ++p) full.at(tp, p) = hat.v[tp];
  GridProjection pr = from_grid(full, alpha.d, alpha.N);
  pr.value.tag = Reality::real_valued;
  symmetrize_reality(pr.value);

  /* identity defect: alpha(phi) + alphahat(theta(phi)) ... checked by the
   * composition residual theta + omega*alphahat(theta) mapping back */
  double defect = 0.0;
  for (long tp = 0; tp < hat.tcount(); ++tp) {
    std::array<double, 3> theta{0, 0, 0};
    long idx = tp;
    for (int a = alpha.d - 1; a >= 0; --a) {
      theta[a] = kTwoPi * double(idx % Mt) / Mt;
      idx /= Mt;
    }
    const double z = hat.v[tp].real();
    std::array<double, 3> phi = theta;
    for (int a = 0; a < alpha.d; ++a) phi[a] += omega[a] * z;
    defect = std::max(defect, std::abs(z + eval_alpha(phi)));
  }
  return DiffeoInverse{std::move(pr.value), worst, defect};
}

TorusFunction random_function(Rng& rng, int d, int N, double decay, int ncomp,
                              double amplitude) {
  TorusFunction u(d, N, ncomp);
  const TimeBox tb = u.tbox();
  for (int comp = 0; comp < ncomp; ++comp)
    for (long t = 0; t < tb.count(); ++t) {
      const auto l = tb.unflatten(t);
      for (int j = -N; j <= N; ++j)
        u.at(comp, l, j) = rng.complex_ball(amplitude) /
                           std::pow(double(mode_weight(l, j, d)), decay);
    }
  return u;
}

}  // namespace qpnls
