#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fermicorr/constants.hpp"
#include "fermicorr/errors.hpp"
#include "fermicorr/lattice.hpp"
#include "fermicorr/numerics.hpp"
#include "fermicorr/onebody.hpp"
#include "fermicorr/potential.hpp"

using namespace fermicorr;

namespace {

LuneOperator scalar_op(double lambda) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = lambda;
  return LuneOperator{{1, 0, 0}, m};
}

LuneVector scalar_vec(double w) {
  Eigen::VectorXd v(1);
  v[0] = w;
  return LuneVector{{1, 0, 0}, v};
}

// Random instance satisfying the standing hypotheses: diagonal positive h,
// entrywise nonnegative v.
struct Instance {
  LuneOperator h;
  LuneVector v;
  LuneOperator K;
};

Instance random_instance(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> lam_d(0.1, 10.0);
  std::uniform_real_distribution<double> v_d(0.0, 1.0);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) {
    h(i, i) = lam_d(rng);
    v[i] = v_d(rng);
  }
  LuneOperator ho{{1, 0, 0}, h};
  LuneVector vo{{1, 0, 0}, v};
  LuneOperator K = build_K(ho, vo);
  return Instance{std::move(ho), std::move(vo), std::move(K)};
}

constexpr double kSqrt3 = 1.7320508075688772;

}  // namespace

TEST_CASE("h is the diagonal excitation-energy operator") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});
  const auto h = build_h(lu);
  REQUIRE(h.dim() == 5);
  std::vector<double> diag;
  for (int i = 0; i < 5; ++i) {
    diag.push_back(h.entries(i, i));
    for (int j = 0; j < 5; ++j) {
      if (i != j) CHECK(h.entries(i, j) == 0.0);
    }
  }
  std::sort(diag.begin(), diag.end());
  CHECK(diag == std::vector<double>{0.5, 0.5, 0.5, 0.5, 1.5});
  CHECK(h.entries.trace() == 3.5);
  CHECK(h.entries.diagonal().minCoeff() > 0.0);
}

TEST_CASE("v is the constant interaction vector") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});

  const auto none = build_v(lu, PotentialModel::parse("none"), 1.0);
  CHECK(none.coefficients.norm() == 0.0);

  // V_hat = 4*(2pi)^3 at k_F = 1 makes the radicand exactly 2.
  const auto tab = PotentialModel::make_table({{{1, 0, 0}, 4.0 * kTwoPiCubed}});
  const auto v = build_v(lu, tab, 1.0);
  REQUIRE(v.dim() == 5);
  for (int i = 0; i < 5; ++i) CHECK(v.coefficients[i] == std::sqrt(2.0));

  // <v, h^{-1} v> = (V_hat / (2 (2pi)^3 k_F)) * sum(1/lambda)
  const auto coul = PotentialModel::make_coulomb(1.0);
  const auto vc = build_v(lu, coul, 1.0);
  const auto h = build_h(lu);
  double s = 0.0;
  for (int i = 0; i < 5; ++i) {
    s += vc.coefficients[i] * vc.coefficients[i] / h.entries(i, i);
  }
  const double expected = v_hat(coul, {1, 0, 0}) / (2.0 * kTwoPiCubed) *
                          lune_power_sum(lu, -1.0).value;
  CHECK(s == doctest::Approx(expected).epsilon(1e-14));

  CHECK_THROWS_AS((void)build_v(lu, coul, 0.0), std::invalid_argument);
}

TEST_CASE("K: scalar closed form, zero case, and input validation") {
  // dim 1: K = -1/4 log(1 + 2 w^2 / lambda)
  const auto K = build_K(scalar_op(1.0), scalar_vec(1.0));
  CHECK(K.entries(0, 0) == doctest::Approx(-0.25 * std::log(3.0)).epsilon(1e-14));
  CHECK(K.entries(0, 0) == doctest::Approx(-0.27465307216702745).epsilon(1e-14));

  const auto K2 = build_K(scalar_op(0.5), scalar_vec(0.7));
  CHECK(K2.entries(0, 0) ==
        doctest::Approx(-0.25 * std::log(1.0 + 2.0 * 0.49 / 0.5)).epsilon(1e-13));

  const auto K0 = build_K(scalar_op(2.0), scalar_vec(0.0));
  CHECK(K0.entries(0, 0) == 0.0);

  CHECK_THROWS_AS((void)build_K(scalar_op(-1.0), scalar_vec(1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)build_K(scalar_op(0.0), scalar_vec(1.0)),
                  std::invalid_argument);
}

TEST_CASE("K on the 5-dimensional lune matches the frozen reference") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});
  const auto h = build_h(lu);
  const auto v = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto K = build_K(h, v);
  REQUIRE(K.dim() == 5);

  // First row in lexicographic lune order (reference computed independently
  // through the rank-one integral representation).
  const std::vector<double> row0 = {-0.001979991562973, -0.0019799915629729,
                                    -0.001979991562973, -0.001979991562973,
                                    -0.0009942629359539};
  for (int j = 0; j < 5; ++j) {
    CHECK(K.entries(0, j) == doctest::Approx(row0[static_cast<std::size_t>(j)])
                                 .epsilon(1e-9));
  }
  CHECK(hs_norm(K) == doctest::Approx(0.008430746432961114).epsilon(1e-11));

  // Symmetric, negative semidefinite.
  CHECK((K.entries - K.entries.transpose()).norm() <= 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K.entries);
  CHECK(es.eigenvalues().maxCoeff() <= 1e-14);
}

TEST_CASE("diagonalization condition e^K (h+2P) e^K = e^{-K} h e^{-K}") {
  for (const double kf : {1.0, 2.0}) {
    const auto ball = fermi_ball(kf);
    const auto coul = PotentialModel::make_coulomb(1.0);
    for (const auto& k : std::vector<LatticeVector>{
             {1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {2, 0, 0}, {2, 1, 0}, {-1, 0, 1}}) {
      const auto lu = lune(ball, k);
      const auto h = build_h(lu);
      const auto v = build_v(lu, coul, kf);
      const auto K = build_K(h, v);
      const MatrixFunctions mf(K);
      const Eigen::MatrixXd eK = mf.exp_tK(1.0);
      const Eigen::MatrixXd emK = mf.exp_tK(-1.0);
      const Eigen::MatrixXd P = v.coefficients * v.coefficients.transpose();
      const Eigen::MatrixXd lhs = eK * (h.entries + 2.0 * P) * eK;
      const Eigen::MatrixXd rhs = emK * h.entries * emK;
      CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
    }
  }
}

TEST_CASE("K agrees with the rank-one integral-representation route") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});
  const auto h = build_h(lu);
  const auto v = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto K = build_K(h, v);

  // Independent route:  S = h^{-1/2} (h^2 + 2 P_{h^{1/2} v})^{1/2} h^{-1/2}
  // with the middle square root from the integral representation.
  const int n = h.dim();
  Eigen::MatrixXd h_half_inv = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) {
    h_half_inv(i, i) = 1.0 / std::sqrt(h.entries(i, i));
    u[i] = std::sqrt(h.entries(i, i)) * v.coefficients[i];
  }
  const auto ps = one_dim_perturb_sqrt(h.entries * h.entries, u, 2.0);
  Eigen::MatrixXd S = h_half_inv * ps.matrix * h_half_inv;
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::VectorXd logs(n);
  for (int i = 0; i < n; ++i) logs[i] = -0.5 * std::log(es.eigenvalues()[i]);
  const Eigen::MatrixXd K_alt =
      es.eigenvectors() * logs.asDiagonal() * es.eigenvectors().transpose();
  CHECK((K_alt - K.entries).norm() <= 1e-9 * std::max(1e-12, K.entries.norm()));
}

TEST_CASE("matrix functions of K") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {2, 0, 0});
  const auto h = build_h(lu);
  const auto v = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto K = build_K(h, v);
  const MatrixFunctions mf(K);
  const int n = K.dim();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  CHECK((mf.exp_tK(0.0) - I).norm() <= 1e-14);
  CHECK(mf.sinh_minus_tK(0.0).norm() <= 1e-14);
  CHECK((mf.cosh_minus_tK(0.0) - I).norm() <= 1e-14);

  for (const double t : {0.3, 1.0}) {
    const Eigen::MatrixXd c = mf.cosh_minus_tK(t);
    const Eigen::MatrixXd s = mf.sinh_minus_tK(t);
    CHECK((c * c - s * s - I).norm() <= 1e-11);
    CHECK((c - s - mf.exp_tK(t)).norm() <= 1e-12);
  }

  // Scalar: e^{-2K} = sqrt(3) when lambda = w = 1.
  const auto Ks = build_K(scalar_op(1.0), scalar_vec(1.0));
  const MatrixFunctions mfs(Ks);
  CHECK(mfs.exp_tK(-2.0)(0, 0) == doctest::Approx(kSqrt3).epsilon(1e-13));
}

TEST_CASE("A(t), B(t): endpoints and the scalar closed form") {
  const auto ball = fermi_ball(1.0);
  const auto coul = PotentialModel::make_coulomb(1.0);
  for (const auto& k : std::vector<LatticeVector>{{1, 0, 0}, {1, 1, 1}, {2, 1, 0}}) {
    const auto lu = lune(ball, k);
    const auto h = build_h(lu);
    const auto v = build_v(lu, coul, 1.0);
    const auto K = build_K(h, v);
    const ABBuilder ab(h, v, K);
    const Eigen::MatrixXd P = v.coefficients * v.coefficients.transpose();

    const auto [A0, B0] = ab.at(0.0);
    CHECK((A0 - P).norm() <= 1e-13 * std::max(1.0, P.norm()));
    CHECK((B0 - P).norm() <= 1e-13 * std::max(1.0, P.norm()));

    const auto [A1, B1] = ab.at(1.0);
    CHECK(B1.norm() <= 1e-10 * h.entries.norm());
    const MatrixFunctions mf(K);
    const Eigen::MatrixXd emK = mf.exp_tK(-1.0);
    const Eigen::MatrixXd expect = emK * h.entries * emK - h.entries;
    CHECK((A1 - expect).norm() <= 1e-11 * std::max(1.0, expect.norm()));
  }

  // Scalar at t=1: A(1) = lambda sqrt(1 + 2 w^2/lambda) - lambda = sqrt(3)-1.
  const auto hs = scalar_op(1.0);
  const auto vs = scalar_vec(1.0);
  const ABBuilder abs_(hs, vs, build_K(hs, vs));
  CHECK(abs_.at(1.0).A(0, 0) == doctest::Approx(kSqrt3 - 1.0).epsilon(1e-13));
}

TEST_CASE("transport derivative relations by central differences") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});
  const auto h = build_h(lu);
  const auto v = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto K = build_K(h, v);
  const ABBuilder ab(h, v, K);
  const int n = h.dim();

  auto rng = num::rng_for(11, "transport-T");
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd T(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      T(i, j) = d(rng);
      T(j, i) = T(i, j);
    }
  }

  const double step = 1e-5;
  for (const double t : {0.25, 0.5, 0.75}) {
    const auto plus = ab.transport_pair(T, t + step);
    const auto minus = ab.transport_pair(T, t - step);
    const auto mid = ab.transport_pair(T, t);
    const Eigen::MatrixXd d1 = (plus.A - minus.A) / (2.0 * step);
    const Eigen::MatrixXd d2 = (plus.B - minus.B) / (2.0 * step);
    const Eigen::MatrixXd kt2 = K.entries * mid.B + mid.B * K.entries;
    const Eigen::MatrixXd kt1 = K.entries * mid.A + mid.A * K.entries;
    const double scale = std::max(1.0, T.norm());
    CHECK((d1 - kt2).norm() <= 1e-6 * scale);
    CHECK((d2 - kt1).norm() <= 1e-6 * scale);

    // The A/B pair satisfies A'(t) = {K, B(t)}.
    const auto abp = ab.at(t + step);
    const auto abm = ab.at(t - step);
    const Eigen::MatrixXd dA = (abp.A - abm.A) / (2.0 * step);
    CHECK((dA - ab.anticomm_K_B(t)).norm() <= 1e-6 * std::max(1.0, dA.norm()));
  }
}

TEST_CASE("the B integral matches its elementwise closed form") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 1, 0});
  const auto h = build_h(lu);
  const auto v = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto K = build_K(h, v);
  const ABBuilder ab(h, v, K);
  const Eigen::MatrixXd got = ab.integral_B();

  // In the eigenbasis of K, int_0^1 B(t) dt integrates elementwise to
  // (e^sigma - 1)/sigma and (e^{-sigma} - 1)/sigma factors.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K.entries);
  const Eigen::MatrixXd& Q = es.eigenvectors();
  const Eigen::VectorXd& kap = es.eigenvalues();
  const Eigen::MatrixXd ht = Q.transpose() * h.entries * Q;
  const Eigen::VectorXd vt = Q.transpose() * v.coefficients;
  const int n = h.dim();
  Eigen::MatrixXd closed(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double sg = kap[i] + kap[j];
      const double hp = ht(i, j) + 2.0 * vt[i] * vt[j];
      const double up = std::abs(sg) < 1e-12 ? 1.0 : std::expm1(sg) / sg;
      const double dn = std::abs(sg) < 1e-12 ? 1.0 : -std::expm1(-sg) / sg;
      closed(i, j) = 0.5 * (hp * up - ht(i, j) * dn);
    }
  }
  const Eigen::MatrixXd expect = Q * closed * Q.transpose();
  CHECK((got - expect).norm() <= 1e-12 * std::max(1.0, expect.norm()));
}

TEST_CASE("rank-one perturbation square root") {
  // g = 0: exactly A^{1/2}.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  A.diagonal() << 4.0, 9.0, 16.0;
  Eigen::VectorXd w(3);
  w << 1.0, 2.0, 0.5;
  const auto g0 = one_dim_perturb_sqrt(A, w, 0.0);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
  expected.diagonal() << 2.0, 3.0, 4.0;
  CHECK((g0.matrix - expected).norm() <= 1e-13);
  CHECK(g0.trace == doctest::Approx(9.0).epsilon(1e-13));

  // Scalar A=1, w=1, g=2 -> sqrt(3).
  Eigen::MatrixXd one(1, 1);
  one(0, 0) = 1.0;
  Eigen::VectorXd wone(1);
  wone[0] = 1.0;
  const auto sc = one_dim_perturb_sqrt(one, wone, 2.0);
  CHECK(sc.matrix(0, 0) == doctest::Approx(kSqrt3).epsilon(1e-11));
  CHECK(sc.trace == doctest::Approx(kSqrt3).epsilon(1e-11));

  // Random SPD 6x6 against the direct eigendecomposition route.
  auto rng = num::rng_for(5, "perturb-sqrt");
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::MatrixXd M(6, 6);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) M(i, j) = d(rng);
  }
  Eigen::MatrixXd spd = M * M.transpose() + 0.5 * Eigen::MatrixXd::Identity(6, 6);
  Eigen::VectorXd ww(6);
  for (int i = 0; i < 6; ++i) ww[i] = d(rng);
  const double g = 0.7;
  const auto got = one_dim_perturb_sqrt(spd, ww, g);

  Eigen::MatrixXd pert = spd + g * ww * ww.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (pert + pert.transpose()));
  Eigen::VectorXd r(6);
  for (int i = 0; i < 6; ++i) r[i] = std::sqrt(es.eigenvalues()[i]);
  const Eigen::MatrixXd direct =
      es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
  CHECK((got.matrix - direct).norm() <= 1e-9 * direct.norm());
  CHECK(got.trace == doctest::Approx(direct.trace()).epsilon(1e-9));

  // Indefinite inputs are rejected.
  Eigen::MatrixXd neg = -Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd w2 = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS((void)one_dim_perturb_sqrt(neg, w2, 1.0), std::invalid_argument);
  Eigen::MatrixXd id2 = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS((void)one_dim_perturb_sqrt(id2, w2, -1.0), std::invalid_argument);
}

TEST_CASE("trace correction: scalar closed form and route agreement") {
  // Scalar lambda = w = 1: sqrt(3) - 2 on both routes.
  const auto h = scalar_op(1.0);
  const auto v = scalar_vec(1.0);
  const auto tc = trace_correction(h, v, build_K(h, v));
  CHECK(tc.route1 == doctest::Approx(kSqrt3 - 2.0).epsilon(1e-10));
  CHECK(tc.route2 == doctest::Approx(kSqrt3 - 2.0).epsilon(1e-10));
  CHECK(tc.route1 == doctest::Approx(-0.2679491924311228).epsilon(1e-10));

  // v = 0: exactly zero.
  const auto tz = trace_correction(h, scalar_vec(0.0), build_K(h, scalar_vec(0.0)));
  CHECK(tz.route1 == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(tz.route2 == 0.0);

  // 5-dimensional lune, frozen reference, and mutual consistency.
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});
  const auto hl = build_h(lu);
  const auto vl = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto tl = trace_correction(hl, vl, build_K(hl, vl));
  CHECK(tl.route1 == doctest::Approx(-8.123095162532006e-05).epsilon(1e-9));
  CHECK(tl.rel_diff <= 1e-8);

  // Random diagonal instances: the two routes agree.
  auto rng = num::rng_for(3, "trace-correction");
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(rng, 2 + static_cast<int>(rng() % 7));
    const auto t = trace_correction(inst.h, inst.v, inst.K);
    CHECK(t.rel_diff <= 1e-8);
    CHECK(t.route1 <= 1e-12);  // the correction is never positive
  }
}

TEST_CASE("elementwise bound suite: scalar anchors and the zero case") {
  const auto h = scalar_op(1.0);
  const auto v = scalar_vec(1.0);
  const auto K = build_K(h, v);
  // <-K> = 0.2746... must lie in [R/(1+2s), R] = [1/6, 1/2].
  CHECK(-K.entries(0, 0) >= 1.0 / 6.0);
  CHECK(-K.entries(0, 0) <= 0.5);
  const auto reports = check_element_bounds(h, v, K, {0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(reports.size() >= 20);
  for (const auto& r : reports) {
    INFO(r.name);
    CHECK(r.pass);
  }

  const auto v0 = scalar_vec(0.0);
  const auto K0 = build_K(h, v0);
  for (const auto& r : check_element_bounds(h, v0, K0, {0.0, 1.0})) {
    INFO(r.name);
    CHECK(r.pass);
    CHECK(r.max_violation <= kBoundSlack);
  }
}

TEST_CASE("elementwise bound suite: random instances and real lunes") {
  const std::vector<double> t_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  auto rng = num::rng_for(17, "bound-instances");
  for (int trial = 0; trial < 25; ++trial) {
    const auto inst = random_instance(rng, 2 + static_cast<int>(rng() % 9));
    for (const auto& r : check_element_bounds(inst.h, inst.v, inst.K, t_grid)) {
      INFO(r.name << " @trial " << trial);
      CHECK(r.pass);
    }
  }

  const auto ball = fermi_ball(1.0);
  const auto coul = PotentialModel::make_coulomb(1.0);
  for (const auto& k : std::vector<LatticeVector>{{1, 0, 0}, {1, 1, 0}, {2, 0, 0}}) {
    const auto lu = lune(ball, k);
    const auto h = build_h(lu);
    const auto v = build_v(lu, coul, 1.0);
    const auto K = build_K(h, v);
    for (const auto& r : check_element_bounds(h, v, K, t_grid)) {
      INFO(r.name << " @k " << k.str());
      CHECK(r.pass);
    }
  }
}

TEST_CASE("elementwise bound suite rejects broken hypotheses") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});
  const auto h = build_h(lu);
  const auto v = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto K = build_K(h, v);

  LuneVector bad_v = v;
  bad_v.coefficients[2] = -0.1;
  CHECK_THROWS_AS((void)check_element_bounds(h, bad_v, K, {0.5}),
                  std::invalid_argument);

  LuneOperator bad_h = h;
  bad_h.entries(0, 1) = 0.05;
  bad_h.entries(1, 0) = 0.05;
  CHECK_THROWS_AS((void)check_element_bounds(bad_h, v, K, {0.5}),
                  std::invalid_argument);

  CHECK_THROWS_AS((void)check_element_bounds(h, v, K, {1.5}), std::invalid_argument);
}

TEST_CASE("Hilbert-Schmidt norm bound and kernel mirror symmetry") {
  const auto coul = PotentialModel::make_coulomb(1.0);
  const auto ball = fermi_ball(1.0);
  for (std::int64_t x = -4; x <= 4; ++x) {
    for (std::int64_t y = 0; y <= 2; ++y) {
      const LatticeVector k{x, y, 0};
      if (k.norm2() == 0 || k.norm2() > 16) continue;
      const auto lu = lune(ball, k);
      const auto h = build_h(lu);
      const auto v = build_v(lu, coul, 1.0);
      const auto K = build_K(h, v);
      // ||K||_HS <= (V_hat/(2 (2pi)^3 k_F)) * sum 1/lambda, the literal
      // intermediate inequality of the kernel-boundedness chain.
      const double bound = v_hat(coul, k) / (2.0 * kTwoPiCubed) *
                           lune_power_sum(lu, -1.0).value;
      CHECK(hs_norm(K) <= bound * (1.0 + 1e-12));
    }
  }

  // Mirror: <e_p, K_k e_q> = <e_{-p}, K_{-k} e_{-q}>.
  const auto lu = lune(ball, {1, 1, 0});
  const auto lm = lune(ball, {-1, -1, 0});
  const auto flip = flip_map(lu, lm);
  const auto K = build_K(build_h(lu), build_v(lu, coul, 1.0));
  const auto Km = build_K(build_h(lm), build_v(lm, coul, 1.0));
  for (std::size_t p = 0; p < lu.size(); ++p) {
    for (std::size_t q = 0; q < lu.size(); ++q) {
      const double a = K.entries(static_cast<int>(p), static_cast<int>(q));
      const double b = Km.entries(flip[p], flip[q]);
      CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS((void)flip_map(lu, lu), std::invalid_argument);
}

TEST_CASE("per-k diagnostic record is valid JSON with the advertised fields") {
  const auto ball = fermi_ball(1.0);
  const auto lu = lune(ball, {1, 0, 0});
  const auto h = build_h(lu);
  const auto v = build_v(lu, PotentialModel::make_coulomb(1.0), 1.0);
  const auto K = build_K(h, v);
  const auto reports = check_element_bounds(h, v, K, {0.0, 0.5, 1.0});
  const std::string json = onebody_record_json(h, v, K, reports);
  CHECK(json.find("\"hs_norm_K\"") != std::string::npos);
  CHECK(json.find("\"trace_correction_route1\"") != std::string::npos);
  CHECK(json.find("\"bound_reports\"") != std::string::npos);
  CHECK(json.find("\"dim\": 5") != std::string::npos);
}
