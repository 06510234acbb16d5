#pragma once
//
// Physics outputs assembled from the lattice/potential/one-body layers:
//
//   e_fs          — Fermi-state energy: kinetic sum over the ball plus the
//                   finite interaction sum (1/(2 (2pi)^3 k_F)) *
//                   Sum_{|k|<=2k_F} V_hat(k) (|L_k| - N)
//   e_corr_bos    — the bosonic correlation energy
//                   (1/pi) Sum_k int_0^inf F(g_k Sum_p lambda/(lambda^2+t^2)) dt,
//                   F(x) = log(1+x) - x,  g_k = V_hat(k) / ((2pi)^3 k_F)
//   e_corr_ex     — the exchange correction
//                   (k_F^{-2} / (4 (2pi)^6)) Sum_k Sum_{p,q in L_k}
//                   V_hat(k) V_hat(p+q-k) / (lambda_{k,p} + lambda_{k,q})
//   upper_bound   — the assembled report: E_FS + corrections, with the error
//                   functional sqrt(Sum V_hat^2 min{|k|,k_F}) reported
//                   separately (its prefactor constant is existential and is
//                   never given a value)
//   fit_scaling   — least-squares fit e_corr_bos ~ a k_F log k_F + b k_F
//
// k-sums run in fixed lexicographic order with compensated summation.  For
// rotation-invariant potentials each octahedral orbit is evaluated once at
// its canonical representative and the value is replicated to every orbit
// member, which keeps per-k output exactly mirror-symmetric; for table
// potentials only the (finite) support is enumerated and sums are exact.
// Infinite sums are truncated with a rigorous analytic tail bracket; the
// reported value is the bracket midpoint and the half-width rides along.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fermicorr/lattice.hpp"
#include "fermicorr/onebody.hpp"
#include "fermicorr/potential.hpp"

namespace fermicorr {

// Quadrature request for the correlation integrals.
struct QuadratureSpec {
  double rel_tol = 1e-10;
  int max_subdivisions = 200;
  void validate() const;  // rel_tol in (0, 1e-4], subdivisions >= 1
};

// Truncation policy for the infinite k-sums.
struct KSumPolicy {
  enum class Mode { exhaustive, adaptive };
  enum class TailEstimator { analytic_bracket, none };

  Mode mode = Mode::adaptive;
  double radius = 0.0;         // exhaustive: enumerate |k| <= radius
  double rel_tail_tol = 1e-6;  // adaptive: stop once a whole unit shell
                               // contributes less than this fraction
  double r_max = 0.0;          // adaptive cap; 0 = max(64, 8 k_F)
  TailEstimator tail = TailEstimator::analytic_bracket;

  static KSumPolicy exhaustive(double R);
  static KSumPolicy adaptive(double rel_tail_tol, double r_max = 0.0);
  // exhaustive radius must cover |k| <= 2 k_F (where |L_k| < N)
  void validate(double k_F) const;
};

struct PerKValue {
  LatticeVector k;
  double value = 0.0;
};

// Merged per-k detail.  The two sums may truncate at different radii; a zero
// component means that k lies beyond the truncation radius of that sum (its
// remainder is accounted for by the tail bracket), not that the term is zero.
struct PerKEntry {
  LatticeVector k;
  double bos = 0.0;
  double ex = 0.0;
};

struct EnergyReport {
  double k_F = 0.0;
  long N = 0;
  double e_fs_kinetic = 0.0;
  double e_fs_interaction = 0.0;
  double e_corr_bos = 0.0;
  double e_corr_ex = 0.0;
  double error_functional = 0.0;
  double bos_tail_halfwidth = 0.0;
  double ex_tail_halfwidth = 0.0;
  double error_functional_halfwidth = 0.0;
  std::uint64_t seed = 0;
  std::string potential_spec;
  std::vector<PerKEntry> per_k;  // filled when upper_bound is asked for detail
  std::string quadrature_diagnostics;
  std::string ksum_diagnostics;
};

struct FermiStateEnergy {
  double kinetic = 0.0;
  double interaction = 0.0;
};

FermiStateEnergy e_fs(const FermiBall& ball, const PotentialModel& model, double k_F);

// F(g_k * sum_p lambda/(lambda^2+t^2)) at one t; <= 0 always.
double bos_integrand(const Lune& lune, const PotentialModel& model, double k_F,
                     double t);

// (1/pi) int_0^inf of bos_integrand.  Equals the one-body trace correction
// tr(e^{-K} h e^{-K} - h - P) for the same lune.  Throws numerical_error on
// quadrature failure.
double e_corr_bos_k(const Lune& lune, const PotentialModel& model, double k_F,
                    const QuadratureSpec& quad);

// Full k-sums.  `per_k` (optional) receives one entry per enumerated k in
// lexicographic order; the returned value is exactly the compensated sum of
// those entries plus the tail midpoint.  Table potentials are summed exactly
// over their full (finite) support, whatever the policy mode says; for the
// infinite-support potentials, adaptive mode that fails to converge by R_max
// throws numerical_error with the partial value in the message.
ValueWithTail e_corr_bos(const PotentialModel& model, double k_F,
                         const KSumPolicy& policy, const QuadratureSpec& quad,
                         std::vector<PerKValue>* per_k = nullptr, int threads = 1,
                         std::string* ksum_diag = nullptr,
                         std::string* quad_diag = nullptr);

ValueWithTail e_corr_ex(const PotentialModel& model, double k_F,
                        const KSumPolicy& policy,
                        std::vector<PerKValue>* per_k = nullptr, int threads = 1,
                        std::string* ksum_diag = nullptr);

// Verifies (2/pi) int_0^inf (sum_p lambda/(lambda^2+t^2))^2 dt
//        = sum_{p,q} 1/(lambda_p + lambda_q)      (to 1e-8 relative).
BoundReport quadratic_expansion_check(const Lune& lune);

EnergyReport upper_bound(const PotentialModel& model, double k_F,
                         const KSumPolicy& policy, const QuadratureSpec& quad,
                         bool with_per_k = false, int threads = 1,
                         std::uint64_t seed = 0);

// Least-squares fit  e_corr_bos ~= a * k_F log k_F + b * k_F  over reports.
// Needs >= 2 distinct k_F values (2 give exact interpolation); a
// rank-deficient design throws std::invalid_argument.
struct ScalingFit {
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;
};
ScalingFit fit_scaling(const std::vector<EnergyReport>& reports);

// CSV schema: k_F,N,e_fs_kin,e_fs_int,e_corr_bos,e_corr_ex,error_functional,
// bos_tail,ex_tail — floats with 17 significant digits.
[[nodiscard]] std::string energy_csv_header();
[[nodiscard]] std::string energy_csv_row(const EnergyReport& report);
// JSON mirror, including the per-k arrays and diagnostics.
[[nodiscard]] std::string energy_report_json(const EnergyReport& report);

}  // namespace fermicorr
