#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fermicorr/constants.hpp"
#include "fermicorr/energy.hpp"
#include "fermicorr/errors.hpp"
#include "fermicorr/lattice.hpp"
#include "fermicorr/numerics.hpp"
#include "fermicorr/onebody.hpp"
#include "fermicorr/potential.hpp"

using namespace fermicorr;

namespace {

PotentialModel unit_mode_table() {
  // V_hat(+-e1) = (2pi)^3: the coupling that makes g_k = 1/k_F exactly.
  return PotentialModel::make_table({{{1, 0, 0}, kTwoPiCubed}});
}

double per_k_lookup(const std::vector<PerKValue>& per_k, const LatticeVector& k) {
  for (const auto& e : per_k)
    if (e.k == k) return e.value;
  FAIL("k not found in per-k list: ", k.str());
  return 0.0;
}

}  // namespace

TEST_CASE("e_fs: free gas and single-mode interaction") {
  const FermiBall ball = fermi_ball(1.0);

  const FermiStateEnergy free_gas = e_fs(ball, PotentialModel::parse("none"), 1.0);
  CHECK(free_gas.kinetic == 6.0);  // 6 unit vectors + the origin
  CHECK(free_gas.interaction == 0.0);

  const FermiStateEnergy fs = e_fs(ball, unit_mode_table(), 1.0);
  CHECK(fs.kinetic == 6.0);
  // |L_{+-e1}| = 5 and N = 7, so each mode contributes (2pi)^3 * (-2).
  CHECK(fs.interaction == doctest::Approx(-2.0).epsilon(1e-14));

  // A mode beyond |k| = 2 k_F leaves the Fermi state untouched.
  const auto far = PotentialModel::make_table({{{3, 0, 0}, kTwoPiCubed}});
  CHECK(e_fs(ball, far, 1.0).interaction == 0.0);
}

TEST_CASE("e_fs: coulomb overlap counts by hand at k_F = 1") {
  const FermiBall ball = fermi_ball(1.0);
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  // Overlap |B_F cap (B_F + k)| is 2 for |k|^2 in {1, 2}, 0 for |k|^2 = 3,
  // and 1 for |k|^2 = 4; with V_hat = 1/|k|^2 the lex sum collapses to
  // 6*2/1 + 12*2/2 + 8*0/3 + 6*1/4 = 25.5.
  const double expected = -25.5 / (2.0 * kTwoPiCubed);
  CHECK(e_fs(ball, coulomb, 1.0).interaction ==
        doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("bos_integrand: frozen value at t = 0 and small-x branch") {
  const FermiBall ball = fermi_ball(0.9);
  const Lune lu = lune(ball, {1, 0, 0});
  REQUIRE(lu.size() == 1);
  REQUIRE(lu.lambdas[0] == 0.5);

  // x(0) = (1/0.9) * (0.5 / 0.25) = 20/9; F = log(1+x) - x.
  const double f0 = bos_integrand(lu, unit_mode_table(), 0.9, 0.0);
  CHECK(f0 == doctest::Approx(-1.0521509695719677).epsilon(1e-14));
  CHECK(bos_integrand(lu, unit_mode_table(), 0.9, 0.0) <= 0.0);

  // Large t pushes x into the series branch; F ~ -x^2/2 must stay accurate.
  const double t = 1e5;
  const double x = (1.0 / 0.9) * 0.5 / (0.25 + t * t);
  const double f = bos_integrand(lu, unit_mode_table(), 0.9, t);
  CHECK(f == doctest::Approx(-0.5 * x * x).epsilon(1e-6));
  CHECK(f < 0.0);

  CHECK(bos_integrand(lu, PotentialModel::parse("none"), 0.9, 0.3) == 0.0);
}

TEST_CASE("e_corr_bos_k: scalar closed form and frozen value") {
  const FermiBall ball = fermi_ball(0.9);
  const Lune lu = lune(ball, {1, 0, 0});
  const QuadratureSpec quad;

  const double val = e_corr_bos_k(lu, unit_mode_table(), 0.9, quad);
  CHECK(val == doctest::Approx(-0.15802808769980492).epsilon(1e-11));

  // One-mode closed form: (1/pi) int F(c*l/(l^2+t^2)) dt
  //                       = sqrt(l^2 + c*l) - l - c/2   with c = g_k.
  const double c = 1.0 / 0.9, l = 0.5;
  CHECK(val ==
        doctest::Approx(std::sqrt(l * l + c * l) - l - 0.5 * c).epsilon(1e-11));

  CHECK(e_corr_bos_k(lu, PotentialModel::parse("none"), 0.9, quad) == 0.0);
}

TEST_CASE("e_corr_bos_k: frozen coulomb per-k values at k_F = 1") {
  const FermiBall ball = fermi_ball(1.0);
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  const QuadratureSpec quad;
  const std::vector<std::pair<LatticeVector, double>> frozen = {
      {{1, 0, 0}, -8.123095162448301e-05},  {{1, 1, 0}, -9.6120739691087417e-06},
      {{1, 1, 1}, -9.7197259144735248e-06}, {{2, 0, 0}, -2.03934790906175e-06},
      {{2, 1, 0}, -1.8869643908799109e-06}, {{3, 0, 0}, -2.9583896670738508e-07},
  };
  for (const auto& [k, expected] : frozen) {
    INFO("k = ", k.str());
    const double got = e_corr_bos_k(lune(ball, k), coulomb, 1.0, quad);
    CHECK(got == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("e_corr_bos_k agrees with the one-body trace correction") {
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  const QuadratureSpec quad;
  for (const double kf : {1.0, 2.0}) {
    const FermiBall ball = fermi_ball(kf);
    for (const LatticeVector k : {LatticeVector{1, 0, 0}, LatticeVector{1, 1, 0},
                                  LatticeVector{-1, 1, 1}, LatticeVector{2, 0, 0},
                                  LatticeVector{0, -2, 1}, LatticeVector{0, 0, 3}}) {
      if (!inside_radius(k, 2.0 * kf)) continue;
      INFO("k_F = ", kf, ", k = ", k.str());
      const Lune lu = lune(ball, k);
      const auto h = build_h(lu);
      const auto v = build_v(lu, coulomb, kf);
      const auto K = build_K(h, v);
      const TraceCorrection tc = trace_correction(h, v, K);
      const double bos = e_corr_bos_k(lu, coulomb, kf, quad);
      CHECK(bos == doctest::Approx(tc.route1)
                       .epsilon(1e-8 * std::max(1.0, std::abs(tc.route1))));
      CHECK(std::abs(bos - tc.route1) <=
            1e-8 * std::max({std::abs(bos), std::abs(tc.route1), 1e-300}));
    }
  }
}

TEST_CASE("e_corr_bos: table sum is exact, mirror-symmetric, twice the mode") {
  const QuadratureSpec quad;
  std::vector<PerKValue> per_k;
  const ValueWithTail v = e_corr_bos(unit_mode_table(), 0.9, KSumPolicy::adaptive(1e-6),
                                     quad, &per_k, 1);
  CHECK(v.halfwidth == 0.0);
  REQUIRE(per_k.size() == 2);
  CHECK(per_k[0].k == LatticeVector{-1, 0, 0});
  CHECK(per_k[1].k == LatticeVector{1, 0, 0});
  // Replication from the mirror representative: bit-for-bit equality.
  CHECK(per_k[0].value == per_k[1].value);
  CHECK(v.value == doctest::Approx(2.0 * -0.15802808769980492).epsilon(1e-11));
  CHECK(v.value <= 0.0);
}

TEST_CASE("e_corr_bos: coulomb adaptive sum, symmetry and policy consistency") {
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  const QuadratureSpec quad;

  std::vector<PerKValue> per_k;
  std::string ksum_diag, quad_diag;
  // Shell ratios for coulomb at k_F = 1 decay like ~3 u^-4: 1e-6 stops near
  // |k| = 42, while 1e-7 would need |k| ~ 75, beyond the default R_max = 64.
  const ValueWithTail ad = e_corr_bos(coulomb, 1.0, KSumPolicy::adaptive(1e-6), quad,
                                      &per_k, 1, &ksum_diag, &quad_diag);
  CHECK(ad.value < 0.0);
  CHECK(ad.halfwidth > 0.0);
  CHECK(ad.halfwidth < 1e-3 * std::abs(ad.value));
  CHECK(ksum_diag.find("adaptive stop") != std::string::npos);
  CHECK(quad_diag.find("integrals") != std::string::npos);

  // Exact octahedral symmetry of the replicated per-k values.
  const double v100 = per_k_lookup(per_k, {1, 0, 0});
  CHECK(v100 == per_k_lookup(per_k, {-1, 0, 0}));
  CHECK(v100 == per_k_lookup(per_k, {0, 1, 0}));
  CHECK(v100 == per_k_lookup(per_k, {0, 0, -1}));
  const double v210 = per_k_lookup(per_k, {2, 1, 0});
  CHECK(v210 == per_k_lookup(per_k, {0, -1, 2}));
  CHECK(v210 == per_k_lookup(per_k, {-1, 2, 0}));

  // The per-k entries reproduce the frozen single-k values.
  CHECK(v100 == doctest::Approx(-8.123095162448301e-05).epsilon(1e-8));
  CHECK(per_k_lookup(per_k, {1, 1, 1}) ==
        doctest::Approx(-9.7197259144735248e-06).epsilon(1e-8));

  // Exhaustive and adaptive agree within their combined brackets (plus the
  // quadrature noise floor).
  const ValueWithTail ex_pol =
      e_corr_bos(coulomb, 1.0, KSumPolicy::exhaustive(12.0), quad);
  CHECK(std::abs(ex_pol.value - ad.value) <=
        ex_pol.halfwidth + ad.halfwidth + 1e-10 * std::abs(ad.value));

  // Thread fan-out must not change a single bit.
  const ValueWithTail ad4 =
      e_corr_bos(coulomb, 1.0, KSumPolicy::adaptive(1e-6), quad, nullptr, 4);
  CHECK(ad4.value == ad.value);
  CHECK(ad4.halfwidth == ad.halfwidth);
}

TEST_CASE("e_corr_bos: the reported value is the per-k sum plus the bracket") {
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  std::vector<PerKValue> per_k;
  const ValueWithTail v = e_corr_bos(coulomb, 1.0, KSumPolicy::adaptive(1e-6),
                                     QuadratureSpec{}, &per_k, 1);
  num::Neumaier acc;
  for (const auto& e : per_k) acc.add(e.value);
  CHECK(acc.value() - v.halfwidth == v.value);  // bitwise: same reduction order
}

TEST_CASE("e_corr_ex: frozen table value 50/81 at k_F = 0.9") {
  std::vector<PerKValue> per_k;
  const ValueWithTail v =
      e_corr_ex(unit_mode_table(), 0.9, KSumPolicy::adaptive(1e-6), &per_k, 1);
  CHECK(v.halfwidth == 0.0);
  CHECK(v.value == doctest::Approx(50.0 / 81.0).epsilon(1e-14));
  CHECK(v.value >= 0.0);
  REQUIRE(per_k.size() == 2);
  CHECK(per_k[0].value == per_k[1].value);
}

TEST_CASE("e_corr_ex: coulomb positivity, symmetry, policy consistency") {
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  std::vector<PerKValue> per_k;
  std::string diag;
  const ValueWithTail ad =
      e_corr_ex(coulomb, 1.0, KSumPolicy::adaptive(1e-6), &per_k, 1, &diag);
  CHECK(ad.value > 0.0);
  CHECK(ad.halfwidth > 0.0);
  CHECK(ad.halfwidth < 1e-3 * ad.value);
  for (const auto& e : per_k) CHECK(e.value >= 0.0);
  CHECK(per_k_lookup(per_k, {1, 0, 0}) == per_k_lookup(per_k, {0, 0, 1}));
  CHECK(per_k_lookup(per_k, {1, -1, 0}) == per_k_lookup(per_k, {0, 1, 1}));

  // The |k| > 2 k_F autocorrelation fast path must agree with the generic
  // pair sum: compare one shifted-ball mode against a table potential that
  // pins the same single k (the table path always walks explicit pairs).
  const ValueWithTail ex_pol = e_corr_ex(coulomb, 1.0, KSumPolicy::exhaustive(12.0));
  CHECK(std::abs(ex_pol.value - ad.value) <=
        ex_pol.halfwidth + ad.halfwidth + 1e-12 * ad.value);

  const ValueWithTail ad4 = e_corr_ex(coulomb, 1.0, KSumPolicy::adaptive(1e-6), nullptr, 4);
  CHECK(ad4.value == ad.value);
}

TEST_CASE("e_corr_ex: fast autocorrelation path matches explicit pairs") {
  // k = (3,0,0) at k_F = 1 sits beyond 2 k_F, so the radial model takes the
  // count2 route.  A table holding the identical coefficients on exactly the
  // momenta the pair sum can reach walks the explicit-pair route instead;
  // the two must agree to rounding.
  const FermiBall ball = fermi_ball(1.0);
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  const LatticeVector k{3, 0, 0};

  std::vector<std::pair<LatticeVector, double>> entries;
  entries.push_back({k, v_hat(coulomb, k)});
  const Lune lu = lune(ball, k);
  for (const auto& p : lu.points)
    for (const auto& q : lu.points) {
      const LatticeVector s = p + q - k;
      entries.push_back({s, v_hat(coulomb, s)});
    }
  const auto pinned = PotentialModel::make_table(entries);

  std::vector<PerKValue> fast_per, slow_per;
  e_corr_ex(coulomb, 1.0, KSumPolicy::exhaustive(4.0), &fast_per, 1);
  e_corr_ex(pinned, 1.0, KSumPolicy::exhaustive(4.0), &slow_per, 1);
  const double fast = per_k_lookup(fast_per, k);
  const double slow = per_k_lookup(slow_per, k);
  CHECK(fast == doctest::Approx(slow).epsilon(1e-13));
}

TEST_CASE("quadratic expansion identity") {
  const FermiBall small = fermi_ball(0.9);
  const BoundReport scalar = quadratic_expansion_check(lune(small, {1, 0, 0}));
  // Single mode: both sides equal 1/(2 lambda) = 1 exactly.
  CHECK(scalar.pass);
  CHECK(scalar.max_violation <= 1e-10);
  CHECK(std::isnan(scalar.t));

  const FermiBall ball = fermi_ball(1.0);
  for (const LatticeVector k : {LatticeVector{1, 0, 0}, LatticeVector{1, 1, 0},
                                LatticeVector{1, 1, 1}, LatticeVector{2, 0, 0},
                                LatticeVector{2, 1, 0}}) {
    INFO("k = ", k.str());
    const BoundReport r = quadratic_expansion_check(lune(ball, k));
    CHECK(r.pass);
    CHECK(r.max_violation <= 1e-8);
  }

  // Hand value for L_{(1,0,0)} at k_F = 1: lambdas {1/2 x4, 3/2} give
  // sum_{p,q} 1/(lambda_p+lambda_q) = 16 + 8/2 + 1/3 = 61/3.
  const Lune lu = lune(ball, {1, 0, 0});
  num::Neumaier rhs;
  for (const double a : lu.lambdas)
    for (const double b : lu.lambdas) rhs.add(1.0 / (a + b));
  CHECK(rhs.value() == doctest::Approx(20.333333333333332).epsilon(1e-15));
}

TEST_CASE("validation: quadrature spec and k-sum policy") {
  QuadratureSpec quad;
  quad.rel_tol = 1e-3;  // above the 1e-4 ceiling
  CHECK_THROWS_AS(quad.validate(), std::invalid_argument);
  quad.rel_tol = 0.0;
  CHECK_THROWS_AS(quad.validate(), std::invalid_argument);
  quad.rel_tol = 1e-10;
  quad.max_subdivisions = 0;
  CHECK_THROWS_AS(quad.validate(), std::invalid_argument);

  // Exhaustive radius must reach 2 k_F.
  CHECK_THROWS_AS(KSumPolicy::exhaustive(1.5).validate(1.0), std::invalid_argument);
  CHECK_NOTHROW(KSumPolicy::exhaustive(2.0).validate(1.0));
  CHECK_THROWS_AS(KSumPolicy::adaptive(0.0).validate(1.0), std::invalid_argument);
  CHECK_THROWS_AS(KSumPolicy::adaptive(1e-6, 3.0).validate(1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      e_corr_bos(PotentialModel::parse("coulomb:g=1"), -1.0,
                 KSumPolicy::adaptive(1e-6), QuadratureSpec{}),
      std::invalid_argument);
}

TEST_CASE("adaptive k-sum that cannot converge raises a numerical error") {
  const auto coulomb = PotentialModel::parse("coulomb:g=1");
  try {
    e_corr_ex(coulomb, 1.0, KSumPolicy::adaptive(1e-15, 8.0));
    FAIL("expected numerical_error");
  } catch (const numerical_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("partial value") != std::string::npos);
    CHECK(msg.find("R_max") != std::string::npos);
  }
}

TEST_CASE("upper_bound: assembled report for the unit-mode table") {
  const EnergyReport rep = upper_bound(unit_mode_table(), 0.9,
                                       KSumPolicy::adaptive(1e-6), QuadratureSpec{},
                                       /*with_per_k=*/true, 1, /*seed=*/42);
  CHECK(rep.k_F == 0.9);
  CHECK(rep.N == 1);
  CHECK(rep.seed == 42);
  CHECK(rep.e_fs_kinetic == 0.0);
  CHECK(rep.e_fs_interaction == 0.0);  // |k| = 1 > 2 k_F: no overlap
  CHECK(rep.e_corr_bos == doctest::Approx(-0.31605617539961006).epsilon(1e-11));
  CHECK(rep.e_corr_ex == doctest::Approx(50.0 / 81.0).epsilon(1e-14));
  CHECK(rep.bos_tail_halfwidth == 0.0);
  CHECK(rep.ex_tail_halfwidth == 0.0);
  // error functional: sqrt(2 (2pi)^6 * 0.9), exact for a finite table
  CHECK(rep.error_functional ==
        doctest::Approx(kTwoPiCubed * std::sqrt(1.8)).epsilon(1e-14));
  CHECK(rep.error_functional_halfwidth == 0.0);
  REQUIRE(rep.per_k.size() == 2);
  CHECK(rep.per_k[0].k == LatticeVector{-1, 0, 0});
  CHECK(rep.per_k[0].bos == rep.per_k[1].bos);
  CHECK(rep.per_k[0].ex == rep.per_k[1].ex);
}

TEST_CASE("upper_bound: coulomb report invariants and per-k merge") {
  const EnergyReport rep =
      upper_bound(PotentialModel::parse("coulomb:g=1"), 1.0,
                  KSumPolicy::adaptive(1e-6), QuadratureSpec{}, true, 1, 7);
  CHECK(rep.N == 7);
  CHECK(rep.e_fs_kinetic == 6.0);
  CHECK(rep.e_fs_interaction < 0.0);
  CHECK(rep.e_corr_bos < 0.0);
  CHECK(rep.e_corr_ex > 0.0);
  CHECK(rep.error_functional > 0.0);
  CHECK(!rep.per_k.empty());
  CHECK(rep.ksum_diagnostics.find("e_corr_bos") != std::string::npos);
  CHECK(rep.ksum_diagnostics.find("e_corr_ex") != std::string::npos);

  // per_k is lex-sorted with unique keys, and each component sums back to
  // its reported total minus the tail midpoint.
  num::Neumaier bos_sum, ex_sum;
  for (std::size_t i = 0; i + 1 < rep.per_k.size(); ++i)
    CHECK(rep.per_k[i].k < rep.per_k[i + 1].k);
  for (const auto& e : rep.per_k) {
    bos_sum.add(e.bos);
    ex_sum.add(e.ex);
  }
  CHECK(bos_sum.value() - rep.bos_tail_halfwidth ==
        doctest::Approx(rep.e_corr_bos).epsilon(1e-15));
  CHECK(ex_sum.value() + rep.ex_tail_halfwidth ==
        doctest::Approx(rep.e_corr_ex).epsilon(1e-15));
}

TEST_CASE("fit_scaling: exact recovery and degeneracy") {
  const double a0 = -0.73, b0 = 0.41;
  std::vector<EnergyReport> reports;
  for (const double kf : {1.0, 2.0, 4.0, 8.0}) {
    EnergyReport r;
    r.k_F = kf;
    r.e_corr_bos = a0 * kf * std::log(kf) + b0 * kf;
    reports.push_back(r);
  }
  const ScalingFit fit = fit_scaling(reports);
  CHECK(fit.a == doctest::Approx(a0).epsilon(1e-10));
  CHECK(fit.b == doctest::Approx(b0).epsilon(1e-10));
  CHECK(fit.residual <= 1e-10);

  // Two distinct k_F interpolate exactly (2 parameters, residual 0).
  const std::vector<EnergyReport> two(reports.begin(), reports.begin() + 2);
  const ScalingFit fit2 = fit_scaling(two);
  CHECK(fit2.a == doctest::Approx(a0).epsilon(1e-9));
  CHECK(fit2.residual <= 1e-12);

  const std::vector<EnergyReport> one(reports.begin(), reports.begin() + 1);
  CHECK_THROWS_AS(fit_scaling(one), std::invalid_argument);
  CHECK_THROWS_AS(fit_scaling({}), std::invalid_argument);
}

TEST_CASE("csv and json serialization") {
  const EnergyReport rep = upper_bound(unit_mode_table(), 0.9,
                                       KSumPolicy::adaptive(1e-6), QuadratureSpec{},
                                       true, 1, 99);
  CHECK(energy_csv_header() ==
        "k_F,N,e_fs_kin,e_fs_int,e_corr_bos,e_corr_ex,error_functional,"
        "bos_tail,ex_tail");
  const std::string row = energy_csv_row(rep);
  // 9 comma-separated fields, 17-significant-digit round trip.
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = row.find(',', pos);
    fields.push_back(row.substr(pos, c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  REQUIRE(fields.size() == 9);
  CHECK(std::stod(fields[0]) == 0.9);
  CHECK(std::stol(fields[1]) == 1);
  CHECK(std::stod(fields[4]) == rep.e_corr_bos);
  CHECK(std::stod(fields[5]) == rep.e_corr_ex);

  const std::string json = energy_report_json(rep);
  for (const char* key : {"\"k_F\"", "\"e_corr_bos\"", "\"e_corr_ex\"",
                          "\"error_functional\"", "\"per_k\"", "\"seed\"",
                          "\"diagnostics\"", "\"bos_tail\"", "\"ex_tail\""}) {
    INFO("key: ", key);
    CHECK(json.find(key) != std::string::npos);
  }
}
