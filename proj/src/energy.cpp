#include "fermicorr/energy.hpp"

#include <algorithm>
#include <array>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fermicorr/constants.hpp"
#include "fermicorr/errors.hpp"
#include "fermicorr/numerics.hpp"

namespace fermicorr {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Orbit bookkeeping.  V_hat(k) = V_hat(|k|) makes every per-k quantity
// invariant under the 48-element group of signed coordinate permutations, so
// radial models are evaluated once per orbit at the canonical representative
// (coordinates |.|-sorted descending) and the value is replicated.  Table
// models only guarantee V_hat(k) = V_hat(-k): their representative is the
// lexicographically larger of {k, -k}.  Replication makes the per-k output
// exactly symmetric, bit for bit.

std::int64_t absi(std::int64_t v) { return v < 0 ? -v : v; }

LatticeVector orbit_rep(const LatticeVector& k) {
  std::array<std::int64_t, 3> a{absi(k.x), absi(k.y), absi(k.z)};
  std::sort(a.begin(), a.end(), std::greater<>());
  return {a[0], a[1], a[2]};
}

LatticeVector mirror_rep(const LatticeVector& k) { return std::max(k, -k); }

// ---------------------------------------------------------------------------
// k enumeration, always in lexicographic order.

// Integer points with norm^2 in [n^2, (n+1)^2), n >= 1 (the unit shell
// "band" n).  Any such point has every coordinate <= n in magnitude.
std::vector<LatticeVector> band_points(int n) {
  std::vector<LatticeVector> out;
  const std::int64_t lo = static_cast<std::int64_t>(n) * n;
  const std::int64_t hi = static_cast<std::int64_t>(n + 1) * (n + 1);
  for (std::int64_t x = -n; x <= n; ++x)
    for (std::int64_t y = -n; y <= n; ++y)
      for (std::int64_t z = -n; z <= n; ++z) {
        const std::int64_t n2 = x * x + y * y + z * z;
        if (n2 >= lo && n2 < hi) out.push_back({x, y, z});
      }
  return out;
}

// Nonzero integer points with r_lo < |k| <= r_hi.
std::vector<LatticeVector> shell_points(double r_lo, double r_hi) {
  std::vector<LatticeVector> out;
  const auto m = static_cast<std::int64_t>(std::floor(r_hi)) + 1;
  for (std::int64_t x = -m; x <= m; ++x)
    for (std::int64_t y = -m; y <= m; ++y)
      for (std::int64_t z = -m; z <= m; ++z) {
        const LatticeVector k{x, y, z};
        if (k.norm2() == 0) continue;
        if (inside_radius(k, r_hi) && !(r_lo > 0.0 && inside_radius(k, r_lo)))
          out.push_back(k);
      }
  return out;
}

std::vector<LatticeVector> sorted_support(const PotentialModel& model) {
  std::vector<LatticeVector> ks;
  ks.reserve(model.table_entries().size());
  for (const auto& [k, v] : model.table_entries()) ks.push_back(k);
  std::sort(ks.begin(), ks.end());
  return ks;
}

// ---------------------------------------------------------------------------
// Excitation-energy histogram.  2*lambda_{k,p} is an integer, so grouping the
// lune by it turns O(|L_k|) integrand sums into O(#distinct) ones, and makes
// the summation order canonical (ascending lambda) independent of how the
// lune was enumerated.  For |k| > 2 k_F no point of B_F + k is excluded, so
// the histogram comes straight from the ball: 2*lambda = 2 h.k + |k|^2.

struct LambdaBins {
  std::vector<std::pair<double, double>> bins;  // (lambda, multiplicity), ascending
  double lambda_min = 0.0;
  std::size_t lune_size = 0;
};

LambdaBins bins_from_two_lambda(std::vector<std::int64_t>& ms) {
  std::sort(ms.begin(), ms.end());
  LambdaBins b;
  b.lune_size = ms.size();
  for (std::size_t i = 0; i < ms.size();) {
    std::size_t j = i;
    while (j < ms.size() && ms[j] == ms[i]) ++j;
    b.bins.emplace_back(0.5 * static_cast<double>(ms[i]), static_cast<double>(j - i));
    i = j;
  }
  b.lambda_min = b.bins.front().first;
  return b;
}

LambdaBins bins_from_lune(const Lune& lu) {
  std::vector<std::int64_t> ms;
  ms.reserve(lu.size());
  for (const double l : lu.lambdas) ms.push_back(std::llround(2.0 * l));
  return bins_from_two_lambda(ms);
}

LambdaBins lambda_bins(const FermiBall& ball, const LatticeVector& k) {
  if (!inside_radius(k, 2.0 * ball.k_F)) {
    std::vector<std::int64_t> ms;
    ms.reserve(ball.N());
    const std::int64_t k2 = k.norm2();
    for (const auto& h : ball.points) ms.push_back(2 * h.dot(k) + k2);
    return bins_from_two_lambda(ms);
  }
  return bins_from_lune(lune(ball, k));
}

// ---------------------------------------------------------------------------
// Per-k evaluations.

struct TermEval {
  double value = 0.0;
  int subdivisions = 0;
};

TermEval bos_from_bins(const LambdaBins& b, double g_k, const QuadratureSpec& quad,
                       const LatticeVector& k) {
  const auto integrand = [&b, g_k](double t) {
    const double t2 = t * t;
    double s = 0.0;
    for (const auto& [lam, cnt] : b.bins) s += cnt * lam / (lam * lam + t2);
    return num::log1p_minus_x(g_k * s);
  };
  const num::QuadResult r = num::integrate_semi_infinite(
      integrand, b.lambda_min, quad.rel_tol, quad.max_subdivisions);
  if (!r.converged) {
    throw numerical_error("e_corr_bos: quadrature failed at k=" + k.str() + ": " +
                          r.diagnostics);
  }
  return {r.value / kPi, r.subdivisions};
}

// sum_{p,q in L_k} V_hat(p+q-k) / (lambda_p + lambda_q), by explicit pairs.
double ex_pair_sum_lune(const Lune& lu, const PotentialModel& model) {
  num::Neumaier acc;
  const std::size_t n = lu.size();
  for (std::size_t i = 0; i < n; ++i) {
    const LatticeVector pi = lu.points[i];
    const double li = lu.lambdas[i];
    const double vd = v_hat(model, pi + pi - lu.k);
    if (vd != 0.0) acc.add(vd / (2.0 * li));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = v_hat(model, pi + lu.points[j] - lu.k);
      if (v != 0.0) acc.add(2.0 * v / (li + lu.lambdas[j]));
    }
  }
  return acc.value();
}

// For |k| > 2 k_F the lune is the whole shifted ball, so with p = h1 + k,
// q = h2 + k the pair sum collapses onto the autocorrelation of the ball:
//   lambda_p + lambda_q = (h1+h2).k + |k|^2,   p + q - k = (h1+h2) + k,
// and only the distribution of s = h1 + h2 matters.  count2 is built once
// per Fermi ball on a dense [-2F, 2F]^3 grid (F = coordinate bound).
struct Count2 {
  std::int64_t F = 0;
  std::int64_t D = 0;              // grid side, 4F + 1
  std::vector<double> counts;      // lex order over s
};

Count2 build_count2(const FermiBall& ball) {
  Count2 c2;
  for (const auto& p : ball.points) {
    c2.F = std::max({c2.F, absi(p.x), absi(p.y), absi(p.z)});
  }
  c2.D = 4 * c2.F + 1;
  c2.counts.assign(static_cast<std::size_t>(c2.D * c2.D * c2.D), 0.0);
  const std::int64_t off = 2 * c2.F;
  for (const auto& a : ball.points)
    for (const auto& b : ball.points) {
      const LatticeVector s = a + b;
      const std::size_t idx = static_cast<std::size_t>(
          ((s.x + off) * c2.D + (s.y + off)) * c2.D + (s.z + off));
      c2.counts[idx] += 1.0;
    }
  return c2;
}

double ex_pair_sum_fast(const Count2& c2, const PotentialModel& model,
                        const LatticeVector& k) {
  num::Neumaier acc;
  const double k2 = static_cast<double>(k.norm2());
  std::size_t idx = 0;
  const std::int64_t off = 2 * c2.F;
  for (std::int64_t sx = -off; sx <= off; ++sx)
    for (std::int64_t sy = -off; sy <= off; ++sy)
      for (std::int64_t sz = -off; sz <= off; ++sz, ++idx) {
        const double cnt = c2.counts[idx];
        if (cnt == 0.0) continue;
        const LatticeVector s{sx, sy, sz};
        const double v = v_hat(model, s + k);
        if (v == 0.0) continue;
        acc.add(cnt * v / (static_cast<double>(s.dot(k)) + k2));
      }
  return acc.value();
}

// ---------------------------------------------------------------------------
// Tail brackets.  Both correlation sums admit the same rigorous per-k
// majorant skeleton for |k| = u > 2 k_F (all lune energies satisfy
// lambda >= u(u - 2 k_F)/2, the lune has N points, V_hat(k) <= g/u^2 for
// both infinite-support models, and |p+q-k| >= u - 2 k_F):
//
//   |bos_k| <= (g_k^2/4) sum_{p,q} 1/(lambda_p+lambda_q)
//           <= C u^{-5} (u - 2k_F)^{-1}          (|F(x)| <= x^2/2)
//   ex_k    <= C u^{-3} (u - 2k_F)^{-3}
//
// with the shared constant C = g^2 N^2 / (4 (2pi)^6 k_F^2).  Pulling the
// (u - 2k_F) factors out at the integration edge A leaves a clean u^{-6}
// power law for the unit-cube volume comparison (numerics.hpp).  A is kept
// >= 2 k_F + 1 by construction so the edge factors stay modest.
double continuum_tail(const PotentialModel& model, double k_F, double n_ball,
                      double bracket_start, bool is_bos) {
  const double a = bracket_start - kSqrt3;
  const double g = model.g();
  const double c =
      g * g * n_ball * n_ball / (4.0 * kTwoPiCubed * kTwoPiCubed * k_F * k_F);
  const double edge = 1.0 / (1.0 - 2.0 * k_F / a);
  const double phi = is_bos ? edge : edge * edge * edge;
  return 4.0 * kPi * c * phi * num::integral_power_tail(a, 6, 0.5 * kSqrt3);
}

// Earliest unit band n for which the continuum bracket starting at n + 1 is
// valid (needs n + 1 - sqrt3 > 2 k_F, padded to >= 2 k_F + 1).
int first_bracket_band(double k_F) {
  return static_cast<int>(std::ceil(2.0 * k_F + kSqrt3));
}

// ---------------------------------------------------------------------------
// The shared k-sum driver.

using TermFn = std::function<TermEval(const LatticeVector&)>;

// Evaluates term() once per representative (in deterministic map order,
// parallel across representatives), replicates to every k, appends to `out`
// and returns the group sum.  Worker exceptions are captured per slot and
// rethrown in slot order, so failures are deterministic and keep their type.
double eval_group(const std::vector<LatticeVector>& ks, bool radial,
                  const TermFn& term, int threads, std::vector<PerKValue>& out,
                  int& max_sub, long& n_evals) {
  std::map<LatticeVector, int> rep_slot;
  std::vector<LatticeVector> reps;
  std::vector<int> slot_of(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const LatticeVector r = radial ? orbit_rep(ks[i]) : mirror_rep(ks[i]);
    const auto [it, inserted] = rep_slot.try_emplace(r, static_cast<int>(reps.size()));
    if (inserted) reps.push_back(r);
    slot_of[i] = it->second;
  }
  std::vector<TermEval> vals(reps.size());
  std::vector<std::exception_ptr> errs(reps.size());
  num::parallel_for(reps.size(), threads, [&](std::size_t i) {
    try {
      vals[i] = term(reps[i]);
    } catch (...) {
      errs[i] = std::current_exception();
    }
  });
  for (const auto& e : errs)
    if (e) std::rethrow_exception(e);
  num::Neumaier group;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double v = vals[static_cast<std::size_t>(slot_of[i])].value;
    out.push_back({ks[i], v});
    group.add(v);
  }
  for (const auto& v : vals) max_sub = std::max(max_sub, v.subdivisions);
  n_evals += static_cast<long>(reps.size());
  return group.value();
}

struct KSumOutcome {
  double value = 0.0;
  double tail_halfwidth = 0.0;
  std::vector<PerKValue> per_k;
  std::string diag_ksum;
  int max_sub = 0;
  long n_evals = 0;
};

// term: the per-k contribution at a representative.  bound: a rigorous upper
// bound on |term| used for bridge shells an exhaustive policy leaves between
// its radius and the start of the continuum bracket.  is_bos fixes the sign
// of the bracket interval ([-T, 0] for the bosonic sum, [0, T] for exchange).
KSumOutcome drive_ksum(const char* label, const PotentialModel& model, double k_F,
                       double n_ball, const KSumPolicy& policy, bool is_bos,
                       const TermFn& term, const TermFn& bound, int threads) {
  KSumOutcome out;
  if (model.is_zero()) {
    out.diag_ksum = std::string(label) + ": zero potential, empty sum";
    return out;
  }

  char buf[256];
  const bool finite_support = model.support_radius().has_value();
  double bracket_start = 0.0;  // 0 = no bracket needed (sum is exact)
  double bridge_sum = 0.0;

  if (finite_support) {
    eval_group(sorted_support(model), model.radial(), term, threads, out.per_k,
               out.max_sub, out.n_evals);
    std::snprintf(buf, sizeof buf, "%s: exact over %zu support points", label,
                  out.per_k.size());
    out.diag_ksum = buf;
  } else if (policy.mode == KSumPolicy::Mode::exhaustive) {
    eval_group(shell_points(0.0, policy.radius), true, term, threads, out.per_k,
               out.max_sub, out.n_evals);
    if (policy.tail == KSumPolicy::TailEstimator::analytic_bracket) {
      bracket_start = std::max(policy.radius,
                               static_cast<double>(first_bracket_band(k_F)) + 1.0);
      if (bracket_start > policy.radius) {
        // Bound the shells between the cutoff and the continuum edge with the
        // exact per-k majorant (exact lambda_min, exact lune size).
        std::vector<PerKValue> scratch;
        num::Neumaier bridge;
        int dummy_sub = 0;
        long dummy_evals = 0;
        bridge_sum = eval_group(shell_points(policy.radius, bracket_start), true,
                                bound, threads, scratch, dummy_sub, dummy_evals);
      }
    }
    std::snprintf(buf, sizeof buf,
                  "%s: exhaustive |k| <= %.17g, %zu k-points, %ld orbit evals",
                  label, policy.radius, out.per_k.size(), out.n_evals);
    out.diag_ksum = buf;
  } else {
    const double r_max = policy.r_max > 0.0 ? policy.r_max : std::max(64.0, 8.0 * k_F);
    const int n_stop_min = first_bracket_band(k_F);
    const int n_last = static_cast<int>(std::ceil(r_max)) - 1;
    num::Neumaier running;
    bool stopped = false;
    double last_ratio = -1.0;
    int n = 1;
    for (; n <= n_last; ++n) {
      const double band_sum = eval_group(band_points(n), model.radial(), term,
                                         threads, out.per_k, out.max_sub, out.n_evals);
      running.add(band_sum);
      if (n < n_stop_min) continue;
      last_ratio = std::abs(band_sum) / std::max(std::abs(running.value()), DBL_MIN);
      if (last_ratio < policy.rel_tail_tol) {
        stopped = true;
        break;
      }
    }
    if (!stopped) {
      std::snprintf(buf, sizeof buf,
                    "%s: adaptive k-sum not converged by R_max=%.17g (last shell "
                    "ratio %.3g, tol %.3g); partial value %.17g over %zu k-points",
                    label, r_max, last_ratio, policy.rel_tail_tol, running.value(),
                    out.per_k.size());
      throw numerical_error(buf);
    }
    if (policy.tail == KSumPolicy::TailEstimator::analytic_bracket)
      bracket_start = n + 1.0;
    std::snprintf(buf, sizeof buf,
                  "%s: adaptive stop after band [%d,%d) (shell ratio %.3g), %zu "
                  "k-points, %ld orbit evals",
                  label, n, n + 1, last_ratio, out.per_k.size(), out.n_evals);
    out.diag_ksum = buf;
  }

  // The reported value is definitionally the compensated sum of the per-k
  // entries in lexicographic k order, plus the bracket midpoint.
  std::sort(out.per_k.begin(), out.per_k.end(),
            [](const PerKValue& a, const PerKValue& b) { return a.k < b.k; });
  num::Neumaier acc;
  for (const auto& e : out.per_k) acc.add(e.value);
  out.value = acc.value();

  if (bracket_start > 0.0) {
    const double t_hi =
        bridge_sum + continuum_tail(model, k_F, n_ball, bracket_start, is_bos);
    out.value += is_bos ? -0.5 * t_hi : 0.5 * t_hi;
    out.tail_halfwidth = 0.5 * t_hi;
  }
  return out;
}

double checked_g_k(const PotentialModel& model, const LatticeVector& k, double k_F) {
  return v_hat(model, k) / (kTwoPiCubed * k_F);
}

void require_positive_kf(double k_F) {
  if (!(k_F > 0.0) || !std::isfinite(k_F))
    throw std::invalid_argument("k_F must be positive and finite");
}

}  // namespace

// ---------------------------------------------------------------------------
// Policy / spec validation

void QuadratureSpec::validate() const {
  if (!(rel_tol > 0.0) || rel_tol > 1e-4)
    throw std::invalid_argument("quadrature rel_tol must lie in (0, 1e-4]");
  if (max_subdivisions < 1)
    throw std::invalid_argument("quadrature max_subdivisions must be >= 1");
}

KSumPolicy KSumPolicy::exhaustive(double R) {
  KSumPolicy p;
  p.mode = Mode::exhaustive;
  p.radius = R;
  return p;
}

KSumPolicy KSumPolicy::adaptive(double rel_tail_tol, double r_max) {
  KSumPolicy p;
  p.mode = Mode::adaptive;
  p.rel_tail_tol = rel_tail_tol;
  p.r_max = r_max;
  return p;
}

void KSumPolicy::validate(double k_F) const {
  require_positive_kf(k_F);
  if (mode == Mode::exhaustive) {
    if (!std::isfinite(radius) || radius < 2.0 * k_F)
      throw std::invalid_argument(
          "exhaustive k-sum radius must cover |k| <= 2 k_F (every lune with "
          "|L_k| < N)");
  } else {
    if (!(rel_tail_tol > 0.0) || rel_tail_tol > 0.5)
      throw std::invalid_argument("adaptive rel_tail_tol must lie in (0, 0.5]");
    const double r = r_max > 0.0 ? r_max : std::max(64.0, 8.0 * k_F);
    if (r < first_bracket_band(k_F) + 1.0)
      throw std::invalid_argument(
          "adaptive R_max leaves no unit shell beyond |k| = 2 k_F + sqrt(3) "
          "where the sum could stop");
  }
}

// ---------------------------------------------------------------------------
// Fermi-state energy

FermiStateEnergy e_fs(const FermiBall& ball, const PotentialModel& model, double k_F) {
  require_positive_kf(k_F);
  FermiStateEnergy r;
  num::Neumaier kin;
  for (const auto& p : ball.points) kin.add(static_cast<double>(p.norm2()));
  r.kinetic = kin.value();
  if (model.is_zero()) return r;

  // (1/(2 (2pi)^3 k_F)) Sum_k V_hat(k) (|L_k| - N).  The count defect is
  // -|B_F intersect (B_F + k)|, identically zero for |k| > 2 k_F, so the sum
  // is finite; only the overlap count is needed, never the lune itself.
  const TermFn overlap_term = [&ball](const LatticeVector& k) -> TermEval {
    long common = 0;
    for (const auto& h : ball.points)
      if (inside_radius(h - k, ball.k_F)) ++common;
    return {static_cast<double>(common), 0};
  };
  const std::vector<LatticeVector> ks = model.support_radius().has_value()
                                            ? sorted_support(model)
                                            : shell_points(0.0, 2.0 * k_F);
  std::vector<PerKValue> overlaps;
  int max_sub = 0;
  long n_evals = 0;
  eval_group(ks, model.radial(), overlap_term, 1, overlaps, max_sub, n_evals);
  num::Neumaier acc;
  for (const auto& e : overlaps) acc.add(-v_hat(model, e.k) * e.value);
  r.interaction = acc.value() / (2.0 * kTwoPiCubed * k_F);
  return r;
}

// ---------------------------------------------------------------------------
// Bosonic correlation

double bos_integrand(const Lune& lu, const PotentialModel& model, double k_F,
                     double t) {
  require_positive_kf(k_F);
  const double g_k = checked_g_k(model, lu.k, k_F);
  if (g_k == 0.0 || lu.size() == 0) return 0.0;
  num::Neumaier s;
  const double t2 = t * t;
  for (const double lam : lu.lambdas) s.add(lam / (lam * lam + t2));
  return num::log1p_minus_x(g_k * s.value());
}

double e_corr_bos_k(const Lune& lu, const PotentialModel& model, double k_F,
                    const QuadratureSpec& quad) {
  require_positive_kf(k_F);
  quad.validate();
  const double g_k = checked_g_k(model, lu.k, k_F);
  if (g_k == 0.0 || lu.size() == 0) return 0.0;
  return bos_from_bins(bins_from_lune(lu), g_k, quad, lu.k).value;
}

ValueWithTail e_corr_bos(const PotentialModel& model, double k_F,
                         const KSumPolicy& policy, const QuadratureSpec& quad,
                         std::vector<PerKValue>* per_k, int threads,
                         std::string* ksum_diag, std::string* quad_diag) {
  require_positive_kf(k_F);
  quad.validate();
  policy.validate(k_F);
  const FermiBall ball = fermi_ball(k_F);

  const TermFn term = [&](const LatticeVector& k) -> TermEval {
    const double g_k = checked_g_k(model, k, k_F);
    if (g_k == 0.0) return {};
    return bos_from_bins(lambda_bins(ball, k), g_k, quad, k);
  };
  const TermFn bound = [&](const LatticeVector& k) -> TermEval {
    const double g_k = checked_g_k(model, k, k_F);
    if (g_k == 0.0) return {};
    const LambdaBins b = lambda_bins(ball, k);
    const double n = static_cast<double>(b.lune_size);
    return {g_k * g_k * n * n / (8.0 * b.lambda_min), 0};
  };

  KSumOutcome out =
      drive_ksum("e_corr_bos", model, k_F, static_cast<double>(ball.N()), policy,
                 /*is_bos=*/true, term, bound, threads);
  if (ksum_diag) *ksum_diag = out.diag_ksum;
  if (quad_diag) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "e_corr_bos: %ld semi-infinite integrals, max subdivisions %d, "
                  "rel_tol %.3g",
                  out.n_evals, out.max_sub, quad.rel_tol);
    *quad_diag = buf;
  }
  if (per_k) *per_k = std::move(out.per_k);
  return {out.value, out.tail_halfwidth};
}

// ---------------------------------------------------------------------------
// Exchange correction

ValueWithTail e_corr_ex(const PotentialModel& model, double k_F,
                        const KSumPolicy& policy, std::vector<PerKValue>* per_k,
                        int threads, std::string* ksum_diag) {
  require_positive_kf(k_F);
  policy.validate(k_F);
  const FermiBall ball = fermi_ball(k_F);
  const double pref = 1.0 / (4.0 * kTwoPiCubed * kTwoPiCubed * k_F * k_F);

  Count2 c2;
  if (model.radial() && !model.is_zero()) c2 = build_count2(ball);

  const TermFn term = [&](const LatticeVector& k) -> TermEval {
    const double vk = v_hat(model, k);
    if (vk == 0.0) return {};
    const bool beyond = !inside_radius(k, 2.0 * ball.k_F);
    const double pairs = (beyond && model.radial())
                             ? ex_pair_sum_fast(c2, model, k)
                             : ex_pair_sum_lune(lune(ball, k), model);
    return {pref * vk * pairs, 0};
  };
  const TermFn bound = [&](const LatticeVector& k) -> TermEval {
    const double vk = v_hat(model, k);
    if (vk == 0.0) return {};
    const LambdaBins b = lambda_bins(ball, k);
    const double n = static_cast<double>(b.lune_size);
    return {pref * vk * model.max_coefficient() * n * n / (2.0 * b.lambda_min), 0};
  };

  KSumOutcome out =
      drive_ksum("e_corr_ex", model, k_F, static_cast<double>(ball.N()), policy,
                 /*is_bos=*/false, term, bound, threads);
  if (ksum_diag) *ksum_diag = out.diag_ksum;
  if (per_k) *per_k = std::move(out.per_k);
  return {out.value, out.tail_halfwidth};
}

// ---------------------------------------------------------------------------
// Quadratic-expansion identity

BoundReport quadratic_expansion_check(const Lune& lu) {
  if (lu.size() == 0) throw std::invalid_argument("empty lune");
  const LambdaBins b = bins_from_lune(lu);

  const auto integrand = [&b](double t) {
    const double t2 = t * t;
    double s = 0.0;
    for (const auto& [lam, cnt] : b.bins) s += cnt * lam / (lam * lam + t2);
    return s * s;
  };
  const num::QuadResult q =
      num::integrate_semi_infinite(integrand, b.lambda_min, 1e-10, 200);
  if (!q.converged) {
    throw numerical_error("quadratic_expansion_check: quadrature failed at k=" +
                          lu.k.str() + ": " + q.diagnostics);
  }
  const double lhs = 2.0 / kPi * q.value;

  num::Neumaier rhs;
  for (std::size_t i = 0; i < b.bins.size(); ++i) {
    const auto [li, ci] = b.bins[i];
    rhs.add(ci * ci / (2.0 * li));
    for (std::size_t j = i + 1; j < b.bins.size(); ++j) {
      const auto [lj, cj] = b.bins[j];
      rhs.add(2.0 * ci * cj / (li + lj));
    }
  }

  BoundReport r;
  r.name = "quadratic-expansion k=" + lu.k.str();
  r.max_violation =
      std::abs(lhs - rhs.value()) / std::max({1.0, std::abs(lhs), std::abs(rhs.value())});
  r.t = std::nan("");
  r.pass = r.max_violation <= 1e-8;
  return r;
}

// ---------------------------------------------------------------------------
// Assembled report

EnergyReport upper_bound(const PotentialModel& model, double k_F,
                         const KSumPolicy& policy, const QuadratureSpec& quad,
                         bool with_per_k, int threads, std::uint64_t seed) {
  require_positive_kf(k_F);
  quad.validate();
  policy.validate(k_F);

  EnergyReport rep;
  rep.k_F = k_F;
  rep.seed = seed;
  rep.potential_spec = model.spec_string();

  const FermiBall ball = fermi_ball(k_F);
  rep.N = static_cast<long>(ball.N());
  const FermiStateEnergy fs = e_fs(ball, model, k_F);
  rep.e_fs_kinetic = fs.kinetic;
  rep.e_fs_interaction = fs.interaction;

  std::vector<PerKValue> bos_k, ex_k;
  std::string bos_ksum, bos_quad, ex_ksum;
  const ValueWithTail bos =
      e_corr_bos(model, k_F, policy, quad, with_per_k ? &bos_k : nullptr, threads,
                 &bos_ksum, &bos_quad);
  const ValueWithTail ex = e_corr_ex(model, k_F, policy,
                                     with_per_k ? &ex_k : nullptr, threads, &ex_ksum);
  rep.e_corr_bos = bos.value;
  rep.bos_tail_halfwidth = bos.halfwidth;
  rep.e_corr_ex = ex.value;
  rep.ex_tail_halfwidth = ex.halfwidth;

  const ValueWithTail err = error_term(model, k_F);
  rep.error_functional = err.value;
  rep.error_functional_halfwidth = err.halfwidth;

  rep.quadrature_diagnostics = bos_quad;
  rep.ksum_diagnostics = bos_ksum + "; " + ex_ksum;

  if (with_per_k) {
    // Merge the two lex-sorted per-k lists on their union of keys.
    rep.per_k.reserve(std::max(bos_k.size(), ex_k.size()));
    std::size_t i = 0, j = 0;
    while (i < bos_k.size() || j < ex_k.size()) {
      if (j >= ex_k.size() || (i < bos_k.size() && bos_k[i].k < ex_k[j].k)) {
        rep.per_k.push_back({bos_k[i].k, bos_k[i].value, 0.0});
        ++i;
      } else if (i >= bos_k.size() || ex_k[j].k < bos_k[i].k) {
        rep.per_k.push_back({ex_k[j].k, 0.0, ex_k[j].value});
        ++j;
      } else {
        rep.per_k.push_back({bos_k[i].k, bos_k[i].value, ex_k[j].value});
        ++i;
        ++j;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Scaling fit

ScalingFit fit_scaling(const std::vector<EnergyReport>& reports) {
  std::set<double> distinct;
  for (const auto& r : reports) distinct.insert(r.k_F);
  if (distinct.size() < 2)
    throw std::invalid_argument(
        "fit_scaling needs at least 2 distinct k_F values");

  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
  for (const auto& r : reports) {
    const double x1 = r.k_F * std::log(r.k_F);
    const double x2 = r.k_F;
    const double y = r.e_corr_bos;
    s11 += x1 * x1;
    s12 += x1 * x2;
    s22 += x2 * x2;
    b1 += x1 * y;
    b2 += x2 * y;
  }
  const double det = s11 * s22 - s12 * s12;
  if (!(std::abs(det) > 1e-12 * std::max(s11 * s22, 1e-300)))
    throw std::invalid_argument("fit_scaling design matrix is rank-deficient");

  ScalingFit fit;
  fit.a = (b1 * s22 - b2 * s12) / det;
  fit.b = (s11 * b2 - s12 * b1) / det;
  num::Neumaier res2;
  for (const auto& r : reports) {
    const double d =
        r.e_corr_bos - fit.a * r.k_F * std::log(r.k_F) - fit.b * r.k_F;
    res2.add(d * d);
  }
  fit.residual = std::sqrt(std::max(res2.value(), 0.0));
  return fit;
}

// ---------------------------------------------------------------------------
// Serialization

std::string energy_csv_header() {
  return "k_F,N,e_fs_kin,e_fs_int,e_corr_bos,e_corr_ex,error_functional,"
         "bos_tail,ex_tail";
}

std::string energy_csv_row(const EnergyReport& r) {
  std::string row = fmt17(r.k_F);
  row += ',' + std::to_string(r.N);
  for (const double v : {r.e_fs_kinetic, r.e_fs_interaction, r.e_corr_bos,
                         r.e_corr_ex, r.error_functional, r.bos_tail_halfwidth,
                         r.ex_tail_halfwidth}) {
    row += ',' + fmt17(v);
  }
  return row;
}

std::string energy_report_json(const EnergyReport& r) {
  nlohmann::json j;
  j["k_F"] = r.k_F;
  j["N"] = r.N;
  j["potential"] = r.potential_spec;
  j["seed"] = r.seed;
  j["e_fs_kin"] = r.e_fs_kinetic;
  j["e_fs_int"] = r.e_fs_interaction;
  j["e_corr_bos"] = r.e_corr_bos;
  j["e_corr_ex"] = r.e_corr_ex;
  j["error_functional"] = r.error_functional;
  j["bos_tail"] = r.bos_tail_halfwidth;
  j["ex_tail"] = r.ex_tail_halfwidth;
  j["error_functional_halfwidth"] = r.error_functional_halfwidth;
  j["diagnostics"] = {{"quadrature", r.quadrature_diagnostics},
                      {"ksum", r.ksum_diagnostics}};
  if (!r.per_k.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : r.per_k) {
      arr.push_back({{"k", {e.k.x, e.k.y, e.k.z}}, {"bos", e.bos}, {"ex", e.ex}});
    }
    j["per_k"] = std::move(arr);
  }
  return j.dump(2);
}

}  // namespace fermicorr
