#include "fermicorr/onebody.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "json.hpp"  // vendored single-header nlohmann::json

#include "fermicorr/constants.hpp"
#include "fermicorr/errors.hpp"
#include "fermicorr/numerics.hpp"

namespace fermicorr {

namespace {

void require_square_symmetric(const Eigen::MatrixXd& M, const char* who) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix must be square");
  }
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument(std::string(who) + ": matrix must be symmetric");
  }
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigensolve(const Eigen::MatrixXd& M,
                                                          const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) {
    throw numerical_error(std::string(who) + ": symmetric eigendecomposition failed");
  }
  return es;
}

// f applied through the eigendecomposition of a symmetric matrix.
template <typename F>
Eigen::MatrixXd matrix_function(const Eigen::MatrixXd& Q, const Eigen::VectorXd& ev,
                                F&& f) {
  Eigen::VectorXd fe(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) fe[i] = f(ev[i]);
  return Q * fe.asDiagonal() * Q.transpose();
}

}  // namespace

// ---------------------------------------------------------------------------

LuneOperator build_h(const Lune& lune) {
  const int n = static_cast<int>(lune.size());
  LuneOperator h{lune.k, Eigen::MatrixXd::Zero(n, n)};
  for (int i = 0; i < n; ++i) h.entries(i, i) = lune.lambdas[static_cast<std::size_t>(i)];
  return h;
}

LuneVector build_v(const Lune& lune, const PotentialModel& model, double k_F) {
  if (!(k_F > 0.0) || !std::isfinite(k_F)) {
    throw std::invalid_argument("build_v: k_F must be finite and positive");
  }
  const double coeff = v_hat(model, lune.k) / (k_F * 2.0 * kTwoPiCubed);
  const int n = static_cast<int>(lune.size());
  return LuneVector{lune.k, Eigen::VectorXd::Constant(n, std::sqrt(coeff))};
}

LuneOperator build_K(const LuneOperator& h, const LuneVector& v) {
  require_square_symmetric(h.entries, "build_K");
  const int n = h.dim();
  if (v.dim() != n) throw std::invalid_argument("build_K: dimension mismatch");

  // Exactly diagonal h (the form the lune Hamiltonian takes) admits a far
  // more accurate construction: with u = h^{1/2} v and R the rank-one
  // square-root correction (h^2 + 2 u u^T)^{1/2} = h + R,
  //   S = h^{-1/2} (h + R) h^{-1/2} = I + E,  E_ij = R_ij / sqrt(h_ii h_jj),
  // so K = -1/2 log(I + E) is assembled from quantities that all scale with
  // the coupling.  Going through S at full norm instead would inject noise
  // of size eps * ||h|| into K, which swamps tr(h e^{-2K}) - tr h - |v|^2 at
  // weak coupling.
  if (h.entries.isDiagonal(0.0)) {
    const Eigen::VectorXd lambda = h.entries.diagonal();
    if (lambda.minCoeff() <= 0.0) {
      throw std::invalid_argument("build_K: h must be positive definite");
    }
    if (v.coefficients.norm() == 0.0) {
      return LuneOperator{h.k, Eigen::MatrixXd::Zero(n, n)};
    }
    const Eigen::VectorXd s = lambda.cwiseSqrt();
    const Eigen::VectorXd u = s.cwiseProduct(v.coefficients);
    const auto ps = one_dim_perturb_sqrt(
        Eigen::MatrixXd(lambda.cwiseProduct(lambda).asDiagonal()), u, 2.0);
    Eigen::MatrixXd E = ps.correction;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) E(i, j) /= s[i] * s[j];
    }
    E = 0.5 * (E + E.transpose()).eval();
    const auto es_e = eigensolve(E, "build_K");
    if (es_e.eigenvalues().minCoeff() <= -1.0) {
      throw numerical_error("build_K: computed S is not positive definite");
    }
    Eigen::MatrixXd K =
        matrix_function(es_e.eigenvectors(), es_e.eigenvalues(),
                        [](double x) { return -0.5 * std::log1p(x); });
    K = 0.5 * (K + K.transpose()).eval();
    return LuneOperator{h.k, std::move(K)};
  }

  const auto es_h = eigensolve(h.entries, "build_K");
  if (es_h.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("build_K: h must be positive definite");
  }
  if (v.coefficients.norm() == 0.0) {
    return LuneOperator{h.k, Eigen::MatrixXd::Zero(n, n)};
  }

  const Eigen::MatrixXd h_half =
      matrix_function(es_h.eigenvectors(), es_h.eigenvalues(),
                      [](double x) { return std::sqrt(x); });
  const Eigen::MatrixXd h_half_inv =
      matrix_function(es_h.eigenvectors(), es_h.eigenvalues(),
                      [](double x) { return 1.0 / std::sqrt(x); });

  // M = h^2 + 2 |h^{1/2} v><h^{1/2} v|, manifestly symmetric PSD.
  const Eigen::VectorXd u = h_half * v.coefficients;
  Eigen::MatrixXd M = h.entries * h.entries + 2.0 * u * u.transpose();
  M = 0.5 * (M + M.transpose()).eval();

  const auto es_m = eigensolve(M, "build_K");
  const Eigen::MatrixXd sqrt_M =
      matrix_function(es_m.eigenvectors(), es_m.eigenvalues(), [](double x) {
        return std::sqrt(std::max(x, 0.0));
      });

  Eigen::MatrixXd S = h_half_inv * sqrt_M * h_half_inv;
  S = 0.5 * (S + S.transpose()).eval();

  const auto es_s = eigensolve(S, "build_K");
  if (es_s.eigenvalues().minCoeff() <= 0.0) {
    throw numerical_error("build_K: computed S is not positive definite");
  }
  Eigen::MatrixXd K =
      matrix_function(es_s.eigenvectors(), es_s.eigenvalues(),
                      [](double x) { return -0.5 * std::log(x); });
  K = 0.5 * (K + K.transpose()).eval();
  return LuneOperator{h.k, std::move(K)};
}

std::vector<int> flip_map(const Lune& lune_k, const Lune& lune_minus_k) {
  if (!(lune_minus_k.k == -lune_k.k) || lune_k.size() != lune_minus_k.size()) {
    throw std::invalid_argument("flip_map: lunes are not mirror images");
  }
  std::vector<int> map(lune_k.size());
  for (std::size_t i = 0; i < lune_k.size(); ++i) {
    const LatticeVector target = -lune_k.points[i];
    const auto it = std::lower_bound(lune_minus_k.points.begin(),
                                     lune_minus_k.points.end(), target);
    if (it == lune_minus_k.points.end() || !(*it == target)) {
      throw std::invalid_argument("flip_map: negated point missing from mirror lune");
    }
    map[i] = static_cast<int>(it - lune_minus_k.points.begin());
  }
  return map;
}

// ---------------------------------------------------------------------------

MatrixFunctions::MatrixFunctions(const LuneOperator& K) {
  require_square_symmetric(K.entries, "MatrixFunctions");
  const auto es = eigensolve(K.entries, "MatrixFunctions");
  Q_ = es.eigenvectors();
  kappa_ = es.eigenvalues();
}

Eigen::MatrixXd MatrixFunctions::exp_tK(double t) const {
  return matrix_function(Q_, kappa_, [t](double k) { return std::exp(t * k); });
}

Eigen::MatrixXd MatrixFunctions::sinh_minus_tK(double t) const {
  return matrix_function(Q_, kappa_, [t](double k) { return std::sinh(-t * k); });
}

Eigen::MatrixXd MatrixFunctions::cosh_minus_tK(double t) const {
  return matrix_function(Q_, kappa_, [t](double k) { return std::cosh(-t * k); });
}

// ---------------------------------------------------------------------------

ABBuilder::ABBuilder(const LuneOperator& h, const LuneVector& v, const LuneOperator& K) {
  require_square_symmetric(h.entries, "ABBuilder");
  require_square_symmetric(K.entries, "ABBuilder");
  if (h.dim() != K.dim() || v.dim() != h.dim()) {
    throw std::invalid_argument("ABBuilder: dimension mismatch");
  }
  const auto es = eigensolve(K.entries, "ABBuilder");
  Q_ = es.eigenvectors();
  kappa_ = es.eigenvalues();
  h_tilde_ = Q_.transpose() * h.entries * Q_;
  const Eigen::VectorXd v_tilde = Q_.transpose() * v.coefficients;
  hp_tilde_ = h_tilde_ + 2.0 * v_tilde * v_tilde.transpose();
}

Eigen::MatrixXd ABBuilder::rotate_back(const Eigen::MatrixXd& M) const {
  Eigen::MatrixXd out = Q_ * M * Q_.transpose();
  return 0.5 * (out + out.transpose()).eval();
}

ABPair ABBuilder::at(double t) const {
  const auto n = kappa_.size();
  Eigen::MatrixXd A(n, n), B(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double grow = std::exp(t * (kappa_[i] + kappa_[j]));
      const double plus = hp_tilde_(i, j) * grow;            // e^{tK}(h+2P)e^{tK}
      const double minus = h_tilde_(i, j) / grow;            // e^{-tK} h e^{-tK}
      A(i, j) = 0.5 * (plus + minus) - h_tilde_(i, j);
      B(i, j) = 0.5 * (plus - minus);
    }
  }
  return ABPair{rotate_back(A), rotate_back(B)};
}

Eigen::MatrixXd ABBuilder::anticomm_K_B(double t) const {
  const auto n = kappa_.size();
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sigma = kappa_[i] + kappa_[j];
      const double grow = std::exp(t * sigma);
      const double B = 0.5 * (hp_tilde_(i, j) * grow - h_tilde_(i, j) / grow);
      M(i, j) = sigma * B;  // {K, .} is multiplication by kappa_i + kappa_j here
    }
  }
  return rotate_back(M);
}

namespace {
// One-shot validation that the 32-node rule has converged for this family of
// integrands (entire in t): compare against 64 nodes on the first call.
std::once_flag g_gl_check_flag;

void validate_gl_order(const std::function<Eigen::MatrixXd(int)>& quad) {
  std::call_once(g_gl_check_flag, [&] {
    const Eigen::MatrixXd a = quad(32);
    const Eigen::MatrixXd b = quad(64);
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if ((a - b).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw numerical_error(
          "integral_B: 32-node Gauss-Legendre disagrees with 64-node rule");
    }
  });
}
}  // namespace

Eigen::MatrixXd ABBuilder::integral_B() const {
  const auto n = kappa_.size();
  auto quad = [&](int order) {
    const auto& rule = num::gauss_legendre(order);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < rule.x.size(); ++q) {
      const double t = 0.5 * (rule.x[q] + 1.0);  // map [-1,1] -> [0,1]
      const double wq = 0.5 * rule.w[q];
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double grow = std::exp(t * (kappa_[i] + kappa_[j]));
          acc(i, j) += wq * 0.5 * (hp_tilde_(i, j) * grow - h_tilde_(i, j) / grow);
        }
      }
    }
    return acc;
  };
  validate_gl_order(quad);
  return rotate_back(quad(32));
}

ABPair ABBuilder::transport_pair(const Eigen::MatrixXd& T, double t) const {
  require_square_symmetric(T, "transport_pair");
  if (T.rows() != kappa_.size()) {
    throw std::invalid_argument("transport_pair: dimension mismatch");
  }
  const Eigen::MatrixXd T_tilde = Q_.transpose() * T * Q_;
  const auto n = kappa_.size();
  Eigen::MatrixXd T1(n, n), T2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double grow = std::exp(t * (kappa_[i] + kappa_[j]));
      T1(i, j) = 0.5 * T_tilde(i, j) * (grow + 1.0 / grow);
      T2(i, j) = 0.5 * T_tilde(i, j) * (grow - 1.0 / grow);
    }
  }
  return ABPair{rotate_back(T1), rotate_back(T2)};
}

// ---------------------------------------------------------------------------

PerturbSqrt one_dim_perturb_sqrt(const Eigen::MatrixXd& A, const Eigen::VectorXd& w,
                                 double g) {
  require_square_symmetric(A, "one_dim_perturb_sqrt");
  if (w.size() != A.rows()) {
    throw std::invalid_argument("one_dim_perturb_sqrt: dimension mismatch");
  }
  const auto es = eigensolve(A, "one_dim_perturb_sqrt");
  const Eigen::VectorXd a = es.eigenvalues();
  if (a.minCoeff() <= 0.0) {
    throw std::invalid_argument("one_dim_perturb_sqrt: A must be positive definite");
  }
  {
    Eigen::MatrixXd pert = A + g * w * w.transpose();
    pert = 0.5 * (pert + pert.transpose()).eval();
    const auto es_p = eigensolve(pert, "one_dim_perturb_sqrt");
    if (es_p.eigenvalues().minCoeff() <= 0.0) {
      throw std::invalid_argument(
          "one_dim_perturb_sqrt: A + g P_w must be positive definite");
    }
  }

  const Eigen::MatrixXd& Q = es.eigenvectors();
  const Eigen::VectorXd w_tilde = Q.transpose() * w;
  const int n = static_cast<int>(a.size());

  PerturbSqrt out;
  out.matrix = matrix_function(Q, a, [](double x) { return std::sqrt(x); });
  out.correction = Eigen::MatrixXd::Zero(n, n);
  double trace_sqrt_A = 0.0;
  for (int i = 0; i < n; ++i) trace_sqrt_A += std::sqrt(a[i]);
  if (g == 0.0 || w_tilde.norm() == 0.0) {
    out.trace = trace_sqrt_A;
    return out;
  }

  const double scale = std::sqrt(a.minCoeff());

  // Matrix form: integrate the symmetric rank-one integrand componentwise
  // (upper triangle) in the eigenbasis of A.
  const int tri = n * (n + 1) / 2;
  auto integrand = [&](double t) {
    const double t2 = t * t;
    double denom_sum = 0.0;
    for (int i = 0; i < n; ++i) denom_sum += w_tilde[i] * w_tilde[i] / (a[i] + t2);
    const double front = t2 / (1.0 + g * denom_sum);
    std::vector<double> vals(static_cast<std::size_t>(tri));
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
      const double ui = w_tilde[i] / (a[i] + t2);
      for (int j = i; j < n; ++j) {
        vals[idx++] = front * ui * (w_tilde[j] / (a[j] + t2));
      }
    }
    return vals;
  };
  const auto mat_quad = num::integrate_semi_infinite_vec(integrand, tri, scale, 1e-12, 200);
  if (!mat_quad.converged) {
    throw numerical_error("one_dim_perturb_sqrt: matrix quadrature failed: " +
                          mat_quad.diagnostics);
  }
  const double two_over_pi = 2.0 / std::acos(-1.0);
  Eigen::MatrixXd R(n, n);
  {
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const double rij = two_over_pi * g * mat_quad.value[idx];
        R(i, j) = rij;
        R(j, i) = rij;
        ++idx;
      }
    }
  }

  // Fixed-point polish in the eigenbasis.  R solves
  //   sqrt(A) R + R sqrt(A) + R^2 = g w w^T,  i.e.
  //   R_ij = (g w_i w_j - (R^2)_ij) / (sqrt(a_i) + sqrt(a_j)),
  // a contraction with factor ~ ||R|| / sqrt(a_min).  When that factor is
  // small the sweep drives R to machine-relative accuracy, far beyond the
  // quadrature tolerance; when the coupling is too strong to contract, the
  // quadrature value already carries enough relative accuracy and is kept.
  {
    const Eigen::VectorXd sa = a.cwiseSqrt();
    const double sa_min = sa.minCoeff();
    if (R.norm() <= 0.5 * sa_min) {
      double prev_delta = std::numeric_limits<double>::infinity();
      for (int sweep = 0; sweep < 60; ++sweep) {
        Eigen::MatrixXd next = -(R * R);
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            next(i, j) = (g * w_tilde[i] * w_tilde[j] + next(i, j)) / (sa[i] + sa[j]);
          }
        }
        next = 0.5 * (next + next.transpose()).eval();
        const double delta = (next - R).norm();
        R = std::move(next);
        if (delta <= 1e-15 * R.norm() || delta >= prev_delta) break;
        prev_delta = delta;
      }
    }
  }

  out.correction = Q * R * Q.transpose();
  out.correction = 0.5 * (out.correction + out.correction.transpose()).eval();
  out.matrix += out.correction;
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();

  // Trace form.
  const auto tr_quad = num::integrate_semi_infinite(
      [&](double t) {
        const double t2 = t * t;
        double denom_sum = 0.0;
        for (int i = 0; i < n; ++i) denom_sum += w_tilde[i] * w_tilde[i] / (a[i] + t2);
        return std::log1p(g * denom_sum);
      },
      scale, 1e-12, 200);
  if (!tr_quad.converged) {
    throw numerical_error("one_dim_perturb_sqrt: trace quadrature failed: " +
                          tr_quad.diagnostics);
  }
  out.trace = trace_sqrt_A + tr_quad.value / std::acos(-1.0);
  return out;
}

// ---------------------------------------------------------------------------

TraceCorrection trace_correction(const LuneOperator& h, const LuneVector& v,
                                 const LuneOperator& K) {
  require_square_symmetric(h.entries, "trace_correction");
  require_square_symmetric(K.entries, "trace_correction");
  const int n = h.dim();
  if (K.dim() != n || v.dim() != n) {
    throw std::invalid_argument("trace_correction: dimension mismatch");
  }

  TraceCorrection out;

  // Route 1: tr(e^{-K} h e^{-K}) = tr(h e^{-2K}), evaluated in the
  // eigenbasis of K.  tr(h e^{-2K}) - tr(h) is folded per eigenvalue into
  // h_tilde_ii * expm1(-2 kappa_i): the correction is many orders below
  // tr(h), so differencing the two traces outright would leave only
  // cancellation noise of size eps * tr(h).
  {
    const auto es = eigensolve(K.entries, "trace_correction");
    const Eigen::MatrixXd h_tilde =
        es.eigenvectors().transpose() * h.entries * es.eigenvectors();
    num::Neumaier acc;
    for (int i = 0; i < n; ++i) {
      acc.add(h_tilde(i, i) * std::expm1(-2.0 * es.eigenvalues()[i]));
      acc.add(-v.coefficients[i] * v.coefficients[i]);
    }
    out.route1 = acc.value();
  }

  // Route 2: the resolvent-sum integral.  x(t) = 2 <u,(h^2+t^2)^{-1}u> with
  // u = h^{1/2} v; for diagonal h, x(t) = sum_i 2 v_i^2 lambda_i /
  // (lambda_i^2 + t^2).
  {
    const auto es_h = eigensolve(h.entries, "trace_correction");
    const Eigen::VectorXd a = es_h.eigenvalues();
    if (a.minCoeff() <= 0.0) {
      throw std::invalid_argument("trace_correction: h must be positive definite");
    }
    const Eigen::VectorXd v_tilde = es_h.eigenvectors().transpose() * v.coefficients;
    if (v.coefficients.norm() == 0.0) {
      out.route2 = 0.0;
    } else {
      const double scale = a.minCoeff();
      const auto quad = num::integrate_semi_infinite(
          [&](double t) {
            const double t2 = t * t;
            num::Neumaier x;
            for (int i = 0; i < n; ++i) {
              x.add(2.0 * v_tilde[i] * v_tilde[i] * a[i] / (a[i] * a[i] + t2));
            }
            return num::log1p_minus_x(x.value());
          },
          scale, 1e-10, 200);
      if (!quad.converged) {
        throw numerical_error("trace_correction: route-2 quadrature failed: " +
                              quad.diagnostics);
      }
      out.route2 = quad.value / std::acos(-1.0);
    }
  }

  const double denom = std::max({std::abs(out.route1), std::abs(out.route2),
                                 std::numeric_limits<double>::min()});
  out.rel_diff = std::abs(out.route1 - out.route2) / denom;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class BoundScanner {
 public:
  explicit BoundScanner(std::string name) : report_{std::move(name), 0.0, -1, -1,
                                                    std::numeric_limits<double>::quiet_NaN(),
                                                    true} {}

  // Record the inequality lhs <= rhs at element (i,j) and time t.
  void check(double lhs, double rhs, int i, int j, double t) {
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    const double violation = (lhs - rhs) / scale;
    if (report_.p < 0 || violation > report_.max_violation) {
      report_.max_violation = violation;
      report_.p = i;
      report_.q = j;
      report_.t = t;
    }
  }

  [[nodiscard]] BoundReport finish() const {
    BoundReport r = report_;
    r.pass = r.max_violation <= kBoundSlack;
    return r;
  }

 private:
  BoundReport report_;
};

}  // namespace

std::vector<BoundReport> check_element_bounds(const LuneOperator& h,
                                              const LuneVector& v,
                                              const LuneOperator& K,
                                              const std::vector<double>& t_grid) {
  require_square_symmetric(h.entries, "check_element_bounds");
  require_square_symmetric(K.entries, "check_element_bounds");
  const int n = h.dim();
  if (K.dim() != n || v.dim() != n) {
    throw std::invalid_argument("check_element_bounds: dimension mismatch");
  }
  // Standing hypotheses of the elementwise analysis.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && h.entries(i, j) != 0.0) {
        throw std::invalid_argument(
            "check_element_bounds: h must be diagonal in the working basis");
      }
    }
    if (!(h.entries(i, i) > 0.0)) {
      throw std::invalid_argument("check_element_bounds: h must have positive diagonal");
    }
    if (!(v.coefficients[i] >= 0.0)) {
      throw std::invalid_argument(
          "check_element_bounds: v must be entrywise nonnegative");
    }
  }
  for (const double t : t_grid) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw std::invalid_argument("check_element_bounds: t_grid must lie in [0,1]");
    }
  }

  const double kNaN = std::numeric_limits<double>::quiet_NaN();
  const Eigen::VectorXd lam = h.entries.diagonal();
  const Eigen::VectorXd& vv = v.coefficients;
  double s = 0.0;  // <v, h^{-1} v>
  for (int i = 0; i < n; ++i) s += vv[i] * vv[i] / lam[i];

  auto R = [&](int i, int j) { return vv[i] * vv[j] / (lam[i] + lam[j]); };
  auto W = [&](int i, int j) { return vv[i] * vv[j]; };

  const MatrixFunctions mf(K);
  const ABBuilder ab(h, v, K);
  const Eigen::MatrixXd P = vv * vv.transpose();
  const Eigen::MatrixXd exp_m2K = mf.exp_tK(-2.0);
  const Eigen::MatrixXd exp_p2K = mf.exp_tK(2.0);
  const Eigen::MatrixXd sinh_2K = mf.sinh_minus_tK(2.0);
  const Eigen::MatrixXd cosh_2K = mf.cosh_minus_tK(2.0);
  const Eigen::MatrixXd minus_K = -K.entries;
  const Eigen::MatrixXd minus_K2 = minus_K * minus_K;
  const Eigen::MatrixXd minus_K3 = minus_K2 * minus_K;
  const Eigen::MatrixXd int_B = ab.integral_B();
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(n, n);

  std::vector<BoundScanner> scans;
  scans.emplace_back("exp(-2K)-1 lower");
  scans.emplace_back("exp(-2K)-1 upper");
  scans.emplace_back("1-exp(2K) lower");
  scans.emplace_back("1-exp(2K) upper");
  scans.emplace_back("sinh(-2K) upper");
  scans.emplace_back("cosh(-2K)-1 upper");
  scans.emplace_back("-K lower");
  scans.emplace_back("-K upper");
  scans.emplace_back("(-K)^m nonneg, m=1");
  scans.emplace_back("(-K)^m nonneg, m=2");
  scans.emplace_back("(-K)^m nonneg, m=3");
  scans.emplace_back("int B - P/2");
  enum {
    kExpM2KLo, kExpM2KHi, kOneMExp2KLo, kOneMExp2KHi, kSinh2K, kCosh2K,
    kKLo, kKHi, kKm1, kKm2, kKm3, kIntB, kFixedCount
  };

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double r = R(i, j);
      const double w = W(i, j);
      const double lo = 2.0 / (1.0 + 2.0 * s) * r;
      scans[kExpM2KLo].check(lo, exp_m2K(i, j) - ident(i, j), i, j, kNaN);
      scans[kExpM2KHi].check(exp_m2K(i, j) - ident(i, j), 2.0 * r, i, j, kNaN);
      scans[kOneMExp2KLo].check(lo, ident(i, j) - exp_p2K(i, j), i, j, kNaN);
      scans[kOneMExp2KHi].check(ident(i, j) - exp_p2K(i, j), 2.0 * r, i, j, kNaN);
      scans[kSinh2K].check(sinh_2K(i, j), 2.0 * r, i, j, kNaN);
      scans[kCosh2K].check(cosh_2K(i, j) - ident(i, j),
                           2.0 * s / (1.0 + 2.0 * s) * r, i, j, kNaN);
      scans[kKLo].check(r / (1.0 + 2.0 * s), minus_K(i, j), i, j, kNaN);
      scans[kKHi].check(minus_K(i, j), r, i, j, kNaN);
      scans[kKm1].check(0.0, minus_K(i, j), i, j, kNaN);
      scans[kKm2].check(0.0, minus_K2(i, j), i, j, kNaN);
      scans[kKm3].check(0.0, minus_K3(i, j), i, j, kNaN);
      scans[kIntB].check(std::abs(int_B(i, j) - 0.5 * w), (6.0 + s) * s * w, i, j, kNaN);
    }
  }

  std::vector<BoundScanner> tscans;
  tscans.emplace_back("sinh(-tK) lower");
  tscans.emplace_back("sinh(-tK) upper");
  tscans.emplace_back("cosh(-tK)-1 lower");
  tscans.emplace_back("cosh(-tK)-1 upper");
  tscans.emplace_back("exp(tK)-1 magnitude");
  tscans.emplace_back("exp(tK) P exp(tK) - P magnitude");
  tscans.emplace_back("exp(tK) P exp(tK) magnitude");
  tscans.emplace_back("A_h(t) magnitude");
  tscans.emplace_back("B_h(t) magnitude");
  tscans.emplace_back("A(t) magnitude");
  tscans.emplace_back("B(t) magnitude");
  tscans.emplace_back("{K,B(t)} magnitude");
  enum {
    kSinhTLo, kSinhTHi, kCoshTLo, kCoshTHi, kExpT1, kEPEmP, kEPE,
    kAh, kBh, kAt, kBt, kKB, kTCount
  };

  for (const double t : t_grid) {
    const Eigen::MatrixXd exp_tK = mf.exp_tK(t);
    const Eigen::MatrixXd sinh_t = mf.sinh_minus_tK(t);
    const Eigen::MatrixXd cosh_t = mf.cosh_minus_tK(t);
    const Eigen::MatrixXd epe = exp_tK * P * exp_tK;
    const auto [A_t, B_t] = ab.at(t);
    const Eigen::MatrixXd kb = ab.anticomm_K_B(t);
    // A_h / B_h split off the projector part of A and B:
    //   A = A_h + e^{tK} P e^{tK},  B = (1-t) P + B_h + (e^{tK} P e^{tK} - P).
    const Eigen::MatrixXd A_h = A_t - epe;
    const Eigen::MatrixXd B_h = B_t - (1.0 - t) * P - (epe - P);

    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double r = R(i, j);
        const double w = W(i, j);
        tscans[kSinhTLo].check(t * r / (1.0 + 2.0 * s), sinh_t(i, j), i, j, t);
        tscans[kSinhTHi].check(sinh_t(i, j), t * r, i, j, t);
        tscans[kCoshTLo].check(0.0, cosh_t(i, j) - ident(i, j), i, j, t);
        tscans[kCoshTHi].check(cosh_t(i, j) - ident(i, j), s / (1.0 + 2.0 * s) * r,
                               i, j, t);
        tscans[kExpT1].check(std::abs(exp_tK(i, j) - ident(i, j)), r, i, j, t);
        tscans[kEPEmP].check(std::abs(epe(i, j) - P(i, j)), (2.0 + s) * s * w, i, j, t);
        tscans[kEPE].check(std::abs(epe(i, j)), (1.0 + s) * (1.0 + s) * w, i, j, t);
        tscans[kAh].check(std::abs(A_h(i, j)), 4.0 * s * w, i, j, t);
        tscans[kBh].check(std::abs(B_h(i, j)), 4.0 * s * w, i, j, t);
        tscans[kAt].check(std::abs(A_t(i, j)), 3.0 * (1.0 + s) * (1.0 + s) * w, i, j, t);
        tscans[kBt].check(std::abs(B_t(i, j)), 3.0 * (1.0 + s) * (1.0 + s) * w, i, j, t);
        tscans[kKB].check(std::abs(kb(i, j)), 6.0 * (1.0 + s) * (1.0 + s) * s * w,
                          i, j, t);
      }
    }
  }

  std::vector<BoundReport> out;
  out.reserve(scans.size() + tscans.size());
  for (const auto& sc : scans) out.push_back(sc.finish());
  for (const auto& sc : tscans) out.push_back(sc.finish());
  return out;
}

// ---------------------------------------------------------------------------

double hs_norm(const LuneOperator& op) { return op.entries.norm(); }

std::string onebody_record_json(const LuneOperator& h, const LuneVector& v,
                                const LuneOperator& K,
                                const std::vector<BoundReport>& reports) {
  const auto tc = trace_correction(h, v, K);
  nlohmann::json rec;
  rec["k"] = {h.k.x, h.k.y, h.k.z};
  rec["dim"] = h.dim();
  rec["hs_norm_K"] = hs_norm(K);
  rec["trace_correction_route1"] = tc.route1;
  rec["trace_correction_route2"] = tc.route2;
  rec["bound_reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json jr;
    jr["name"] = r.name;
    jr["max_violation"] = r.max_violation;
    jr["p"] = r.p;
    jr["q"] = r.q;
    if (std::isnan(r.t)) {
      jr["t"] = nullptr;
    } else {
      jr["t"] = r.t;
    }
    jr["pass"] = r.pass;
    rec["bound_reports"].push_back(jr);
  }
  return rec.dump(2);
}

}  // namespace fermicorr
