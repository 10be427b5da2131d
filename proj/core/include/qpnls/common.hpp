#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpnls {

using cd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/* Frequency indices on the (d+1)-torus. l lives in Z^d (time angles), j in Z
 * (space). d <= 3 throughout; unused slots of l stay zero so comparisons and
 * hashing are uniform. */
struct Multiindex {
  std::array<int, 3> l{0, 0, 0};
  int j = 0;
};

inline int linf(const std::array<int, 3>& l, int d) {
  int m = 0;
  for (int a = 0; a < d; ++a) m = std::max(m, std::abs(l[a]));
  return m;
}

/* <i> = max(|l|_inf, |j|, 1): the weight that defines the Sobolev scale. */
inline int mode_weight(const std::array<int, 3>& l, int j, int d) {
  return std::max({linf(l, d), std::abs(j), 1});
}

/* <l> = max(|l|_inf, 1): the weight in small-divisor thresholds. */
inline int time_weight(const std::array<int, 3>& l, int d) {
  return std::max(linf(l, d), 1);
}

inline double dot(const std::array<double, 3>& w, const std::array<int, 3>& l, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += w[a] * l[a];
  return s;
}

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/* Thrown when a divisor that the algorithm must invert falls below its
 * non-resonance floor. Carries enough context to name the offending index. */
struct SmallDivisorError : std::runtime_error {
  SmallDivisorError(const std::string& where, std::array<int, 3> l_, int d_,
                    int sigma_, int j_, int sigma2_, int j2_, double div, double floor_)
      : std::runtime_error(where + ": divisor " + std::to_string(div) +
                           " below floor " + std::to_string(floor_)),
        l(l_), d(d_), sigma(sigma_), j(j_), sigma2(sigma2_), j2(j2_),
        divisor(div), floor(floor_) {}
  std::array<int, 3> l;
  int d;
  int sigma, j, sigma2, j2;
  double divisor, floor;
};

/* Deterministic RNG used by every randomized check so reruns are bit-exact. */
struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double a, double b) {
    std::uniform_real_distribution<double> u(a, b);
    return u(gen);
  }
  int integer(int lo, int hi) {
    std::uniform_int_distribution<int> u(lo, hi);
    return u(gen);
  }
  cd complex_ball(double radius = 1.0) {
    double r = radius * std::sqrt(uniform(0.0, 1.0));
    double t = uniform(0.0, kTwoPi);
    return cd(r * std::cos(t), r * std::sin(t));
  }
};

}  // namespace qpnls
