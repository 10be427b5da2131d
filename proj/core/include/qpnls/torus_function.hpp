#pragma once

#include "qpnls/common.hpp"

namespace qpnls {

/* Reality tags for truncated Fourier data on T^{d+1}.
 *   real_valued:    u_{-l,-j} = conj(u_{l,j}) componentwise
 *   conjugate_pair: two components with h^-_{l,j} = conj(h^+_{-l,-j}),
 *                   i.e. the second component is the conjugate function
 *                   of the first. */
enum class Reality { complex_valued, real_valued, conjugate_pair };

const char* to_string(Reality r);

/* Index box l in Z^d, |l|_inf <= N, flattened row-major. */
struct TimeBox {
  int d = 1;
  int N = 0;
  int per_axis() const { return 2 * N + 1; }
  long count() const {
    long c = 1;
    for (int a = 0; a < d; ++a) c *= per_axis();
    return c;
  }
  bool contains(const std::array<int, 3>& l) const { return linf(l, d) <= N; }
  long flatten(const std::array<int, 3>& l) const {
    long idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * per_axis() + (l[a] + N);
    return idx;
  }
  std::array<int, 3> unflatten(long idx) const {
    std::array<int, 3> l{0, 0, 0};
    for (int a = d - 1; a >= 0; --a) {
      l[a] = int(idx % per_axis()) - N;
      idx /= per_axis();
    }
    return l;
  }
};

/* Truncated Fourier series u(phi, x) = sum u_{l,j} e^{i(l.phi + j x)} with
 * |l|_inf <= N and |j| <= N, with one or two components. Two-component
 * objects are states (h^+, h^-) of the doubled phase space; each component
 * is expanded in its own physical exponentials. */
struct TorusFunction {
  int d = 1;
  int N = 0;
  int ncomp = 1;
  Reality tag = Reality::complex_valued;
  std::vector<cd> data;

  TorusFunction() = default;
  TorusFunction(int d_, int N_, int ncomp_ = 1,
                Reality tag_ = Reality::complex_valued)
      : d(d_), N(N_), ncomp(ncomp_), tag(tag_) {
    data.assign(std::size_t(ncomp) * per_comp(), cd(0.0, 0.0));
  }

  TimeBox tbox() const { return TimeBox{d, N}; }
  int nspace() const { return 2 * N + 1; }
  long per_comp() const { return tbox().count() * nspace(); }

  long flat(int comp, const std::array<int, 3>& l, int j) const {
    return (comp * tbox().count() + tbox().flatten(l)) * nspace() + (j + N);
  }
  cd& at(int comp, const std::array<int, 3>& l, int j) {
    return data[flat(comp, l, j)];
  }
  const cd& at(int comp, const std::array<int, 3>& l, int j) const {
    return data[flat(comp, l, j)];
  }
  /* Zero outside the box. */
  cd get(int comp, const std::array<int, 3>& l, int j) const {
    if (std::abs(j) > N || !tbox().contains(l)) return cd(0.0, 0.0);
    return data[flat(comp, l, j)];
  }

  bool same_shape(const TorusFunction& o) const {
    return d == o.d && N == o.N && ncomp == o.ncomp;
  }

  TorusFunction& operator+=(const TorusFunction& o);
  TorusFunction& operator-=(const TorusFunction& o);
  TorusFunction& operator*=(cd s);
  friend TorusFunction operator+(TorusFunction a, const TorusFunction& b) { return a += b; }
  friend TorusFunction operator-(TorusFunction a, const TorusFunction& b) { return a -= b; }
  friend TorusFunction operator*(cd s, TorusFunction a) { return a *= s; }

  static TorusFunction zero(int d, int N, int ncomp = 1,
                            Reality tag = Reality::complex_valued) {
    return TorusFunction(d, N, ncomp, tag);
  }
  static TorusFunction single_mode(int d, int N, const std::array<int, 3>& l,
                                   int j, cd value, int ncomp = 1, int comp = 0);

  /* Extract one component as a 1-component function. */
  TorusFunction component(int comp) const;
};

/* || u ||_s = sqrt( sum |u_i|^2 <i>^{2s} ), maximum over components. */
double sobolev_norm(const TorusFunction& u, double s);

/* Change cutoff, keeping what fits (grow or shrink; shrinking drops tails). */
TorusFunction embed(const TorusFunction& u, int Nnew);

struct Projection {
  TorusFunction low;   /* cutoff N */
  TorusFunction high;  /* original cutoff, low modes zeroed */
};
/* Split u = Pi_N u + (1 - Pi_N) u exactly. Requires N <= u.N. */
Projection project(const TorusFunction& u, int N);

struct ProductResult {
  TorusFunction value;
  double tail = 0.0;  /* l2 mass of convolution modes beyond the output cutoff */
};
/* Exact convolution of single-component functions, re-projected to cutoff
 * Nout (default max(Nu, Nv)). */
ProductResult multiply(const TorusFunction& u, const TorusFunction& v, int Nout = -1);

enum class Deriv { x, phi, omega_dphi };
/* kind x: multiply modes by ij; kind phi: by i l_axis; kind omega_dphi: by
 * i omega.l. */
TorusFunction derivative(const TorusFunction& u, Deriv kind,
                         const std::array<double, 3>& omega = {0, 0, 0},
                         int axis = 0);

/* Inverse of d/dx on zero-x-average functions: divide mode j != 0 by ij and
 * annihilate j = 0 content. */
TorusFunction dx_inverse(const TorusFunction& u);

/* Inverse of omega . d/dphi on zero-phi-average data: modes with l != 0 are
 * divided by i omega.l, l = 0 is annihilated. Throws SmallDivisorError naming
 * the offending l when |omega.l| < divisor_floor. */
TorusFunction omega_dphi_inverse(const TorusFunction& u,
                                 const std::array<double, 3>& omega,
                                 double divisor_floor);

/* Coefficientwise conjugate function: (conj u)_{l,j} = conj(u_{-l,-j}). */
TorusFunction conj_function(const TorusFunction& u);

/* Largest violation of the declared reality tag. */
double reality_defect(const TorusFunction& u);
/* Project onto the declared symmetry class (averages mirror coefficients). */
void symmetrize_reality(TorusFunction& u);

/* Build the state (u, conj u) from a single-component u. */
TorusFunction make_conjugate_pair(const TorusFunction& uplus);

/* ---- physical-grid sampling -------------------------------------------- */

/* Values on the uniform (d+1)-grid with Mt nodes per time axis and Mx space
 * nodes, angles 2 pi k / M. Layout: time axes row-major, space fastest. */
struct GridValues {
  int d = 1, Mt = 1, Mx = 1;
  std::vector<cd> v;
  long tcount() const {
    long c = 1;
    for (int a = 0; a < d; ++a) c *= Mt;
    return c;
  }
  cd& at(long tflat, int p) { return v[tflat * Mx + p]; }
  const cd& at(long tflat, int p) const { return v[tflat * Mx + p]; }
};

GridValues to_grid(const TorusFunction& u, int comp, int Mt, int Mx);

struct GridProjection {
  TorusFunction value;
  double tail = 0.0;  /* l2 mass between the target cutoff and grid Nyquist */
};
/* Recover coefficients from grid samples (exact below the grid Nyquist,
 * which requires odd Mt, Mx), truncated to cutoff N. */
GridProjection from_grid(const GridValues& g, int d, int N);

/* Odd grid size with the requested oversampling of a cutoff-N series. */
int grid_size(int N, int oversample);

/* Apply fn pointwise on an oversampled grid and re-project. */
GridProjection pointwise_map(const TorusFunction& u, cd (*fn)(cd),
                             int oversample = 4);

/* Evaluate at an arbitrary point by direct mode summation. */
cd eval_at(const TorusFunction& u, int comp, const std::array<double, 3>& phi,
           double x);

/* ---- torus diffeomorphisms --------------------------------------------- */

struct ComposeResult {
  TorusFunction value;
  double tail = 0.0;
};

/* u(phi, x + xi(phi, x)), optionally with the sqrt(1 + xi_x) factor that
 * makes the substitution symplectic. Requires xi real with sup|xi_x| <= 1/2. */
ComposeResult compose_space_diffeo(const TorusFunction& u, const TorusFunction& xi,
                                   bool with_jacobian_sqrt, int oversample = 4);

struct DiffeoInverse {
  TorusFunction value;     /* xi_hat with x = y + xi_hat(phi, y) */
  double fp_residual = 0;  /* final fixed-point update size */
  double identity_defect = 0;  /* max | xi_x + xi_hat_y + xi_x xi_hat_y | on nodes */
};
/* Invert x -> x + xi(phi, x) for each frozen phi by fixed-point iteration. */
DiffeoInverse invert_diffeo(const TorusFunction& xi, double tol = 1e-13,
                            int maxit = 80, int oversample = 4);

/* u(phi + omega alpha(phi), x) for a real x-independent alpha. The Jacobian
 * 1 + omega.d_phi alpha must stay positive. */
ComposeResult compose_time_diffeo(const TorusFunction& u, const TorusFunction& alpha,
                                  const std::array<double, 3>& omega,
                                  int oversample = 4);

/* Scalar alpha_hat with phi = theta + omega alpha_hat(theta) inverting
 * theta = phi + omega alpha(phi). */
DiffeoInverse invert_time_diffeo(const TorusFunction& alpha,
                                 const std::array<double, 3>& omega,
                                 double tol = 1e-13, int maxit = 80,
                                 int oversample = 4);

/* Band-limited random function with coefficients ~ ball / <i>^decay. */
TorusFunction random_function(Rng& rng, int d, int N, double decay,
                              int ncomp = 1, double amplitude = 1.0);

}  // namespace qpnls
