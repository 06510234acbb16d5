#pragma once
//
// Numerical kernels shared by every module:
//
//   * Neumaier compensated summation (all large lattice sums),
//   * fixed-order Gauss-Legendre rules with runtime-generated nodes,
//   * adaptive Gauss-Kronrod 7/15 quadrature, including a rational
//     substitution for integrals over [0, infinity),
//   * closed-form power-law tail integrals used to bracket lattice-sum tails
//     by unit-cube volume comparison,
//   * a deterministic parallel-for (results land in caller-indexed slots;
//     every reduction is then performed serially in a fixed order),
//   * a seeded RNG fan-out so each named consumer gets an independent,
//     reproducible stream.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>
#include <random>

namespace fermicorr::num {

// ---------------------------------------------------------------------------
// Compensated summation (Neumaier's variant of Kahan summation): the
// correction term also absorbs the case |x| > |sum|.
class Neumaier {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// ---------------------------------------------------------------------------
// Gauss-Legendre rule on [-1,1].  Nodes are the roots of the Legendre
// polynomial P_n found by Newton iteration from Chebyshev initial guesses;
// weights w_i = 2 / ((1-x_i^2) P_n'(x_i)^2).
struct GaussLegendre {
  std::vector<double> x;  // ascending
  std::vector<double> w;
};

// Cached per order; thread-safe.
const GaussLegendre& gauss_legendre(int n);

// Integrate f over [0,1] with the n-node rule.
double integrate_gl01(const std::function<double(double)>& f, int n);

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod 7/15 on a finite interval.  The interval with the
// largest error estimate is bisected until the global estimate satisfies
// |error| <= rel_tol * |value| (with a tiny absolute floor), or the
// subdivision budget is exhausted.
struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  int subdivisions = 0;
  bool converged = false;
  std::string diagnostics;  // filled when not converged
};

QuadResult integrate_gk15(const std::function<double(double)>& f, double a,
                          double b, double rel_tol, int max_subdivisions);

// Same machinery for a vector-valued integrand (all components share one
// subdivision tree; the error metric is the max-abs over components).
struct QuadResultVec {
  std::vector<double> value;
  double abs_error = 0.0;
  int subdivisions = 0;
  bool converged = false;
  std::string diagnostics;
};

QuadResultVec integrate_gk15_vec(const std::function<std::vector<double>(double)>& f,
                                 int dim, double a, double b, double rel_tol,
                                 int max_subdivisions);

// Integral over [0, infinity) via the substitution t = scale * u / (1-u),
// dt = scale / (1-u)^2 du, mapping to u in [0,1).  `scale` should sit at the
// natural scale of the integrand (for our integrands: the smallest
// excitation energy), so the node distribution resolves the knee.
QuadResult integrate_semi_infinite(const std::function<double(double)>& f,
                                   double scale, double rel_tol,
                                   int max_subdivisions);

QuadResultVec integrate_semi_infinite_vec(
    const std::function<std::vector<double>(double)>& f, int dim, double scale,
    double rel_tol, int max_subdivisions);

// ---------------------------------------------------------------------------
// log(1+x) - x evaluated without cancellation: series for small x (the
// leading behavior is -x^2/2), std::log1p otherwise.  This is the function
// applied to the one-body resolvent sums inside the correlation integrals.
[[nodiscard]] double log1p_minus_x(double x);

// ---------------------------------------------------------------------------
// Closed form of  integral_A^infinity u^{-m} (u+c)^2 du  for m >= 4, A > 0.
// Used to bracket sums over lattice shells: associating to each integer point
// the unit cube centered on it gives, for f nonneg. decreasing,
//   sum_{|k| > R} f(|k|)  <=  4*pi * integral_{R-sqrt3}^inf f(u) (u+sqrt3/2)^2 du
//   sum_{|k| > R} f(|k|)  >=  4*pi * integral_{R+sqrt3}^inf f(u) (u-sqrt3/2)^2 du
// (cubes containing points of the region cover/avoid the corresponding solid
// shells; sqrt3 is the cube diagonal, sqrt3/2 its half-diagonal).
double integral_power_tail(double A, int m, double c);

// ---------------------------------------------------------------------------
// Deterministic parallel map: calls fn(i) for every i in [0,n) using up to
// `threads` workers.  fn must write its result into caller-owned slot i and
// must not touch shared mutable state.  With threads <= 1 everything runs on
// the calling thread.  Work distribution never affects results because no
// reduction happens here.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Seeded RNG fan-out: an independent mt19937_64 per (master seed, name),
// stable across runs and thread counts.
[[nodiscard]] std::mt19937_64 rng_for(std::uint64_t master_seed, std::string_view name);

}  // namespace fermicorr::num
