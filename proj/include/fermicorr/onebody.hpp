#pragma once
//
// Per-momentum one-body machinery on the lune space ℓ²(L_k):
//
//   h     — diagonal excitation-energy operator, h e_p = lambda_{k,p} e_p
//   v, P  — the constant interaction vector and its rank-one projector
//           P = |v><v|
//   K     — the generator of the diagonalizing transformation, computed as
//           K = -1/2 log S with S = h^{-1/2} (h^2 + 2 P_{h^{1/2} v})^{1/2}
//           h^{-1/2}; S is symmetric positive definite, so a single
//           symmetric eigendecomposition defines the logarithm
//   A(t)  = 1/2 (e^{tK} (h+2P) e^{tK} + e^{-tK} h e^{-tK}) - h
//   B(t)  = 1/2 (e^{tK} (h+2P) e^{tK} - e^{-tK} h e^{-tK})
//
// plus the rank-one square-root identity
//
//   (A + g P_w)^{1/2} = A^{1/2}
//     + (2g/pi) * int_0^inf t^2 / (1 + g <w,(A+t^2)^{-1} w>) |u_t><u_t| dt,
//   u_t = (A+t^2)^{-1} w,
//
// its trace form tr (A+gP_w)^{1/2} = tr A^{1/2}
//     + (1/pi) int_0^inf log(1 + g <w,(A+t^2)^{-1} w>) dt,
//
// the two-route trace correction tr(e^{-K} h e^{-K} - h - P), and an
// exhaustive elementwise inequality checker for the matrix-element bounds
// that control all of the above (every constant is the one proved, none is
// fitted).

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fermicorr/lattice.hpp"
#include "fermicorr/potential.hpp"

namespace fermicorr {

// Dense symmetric operator on ℓ²(L_k), indexed by the lune's point ordering.
struct LuneOperator {
  LatticeVector k;
  Eigen::MatrixXd entries;
  [[nodiscard]] int dim() const { return static_cast<int>(entries.rows()); }
};

// Real vector over the lune basis.
struct LuneVector {
  LatticeVector k;
  Eigen::VectorXd coefficients;
  [[nodiscard]] int dim() const { return static_cast<int>(coefficients.size()); }
};

// Outcome of one elementwise inequality scan.  `max_violation` is the most
// positive value of (lhs - rhs) / max(1, |lhs|, |rhs|) over all elements and
// grid times; <= 0 means the inequality held everywhere.
struct BoundReport {
  std::string name;
  double max_violation = 0.0;
  int p = -1;
  int q = -1;
  double t = 0.0;  // NaN for t-independent inequalities
  bool pass = true;
};

inline constexpr double kBoundSlack = 1e-12;

// ---------------------------------------------------------------------------
// Construction

LuneOperator build_h(const Lune& lune);
LuneVector build_v(const Lune& lune, const PotentialModel& model, double k_F);

// K = -1/2 log S.  Throws std::invalid_argument if h is not symmetric
// positive definite.  v = 0 gives exactly K = 0.
LuneOperator build_K(const LuneOperator& h, const LuneVector& v);

// The basis flip e_p -> e_{-p} as a permutation from L_k to L_{-k}: entry i
// of the result is the index in lune(-k) of the negated i-th point of
// lune(k).  Requires the two lunes to be mirror images.
std::vector<int> flip_map(const Lune& lune_k, const Lune& lune_minus_k);

// ---------------------------------------------------------------------------
// Matrix functions of K through one symmetric eigendecomposition.

class MatrixFunctions {
 public:
  explicit MatrixFunctions(const LuneOperator& K);

  [[nodiscard]] Eigen::MatrixXd exp_tK(double t) const;         // e^{tK}
  [[nodiscard]] Eigen::MatrixXd sinh_minus_tK(double t) const;  // sinh(-tK)
  [[nodiscard]] Eigen::MatrixXd cosh_minus_tK(double t) const;  // cosh(-tK)

  [[nodiscard]] const Eigen::MatrixXd& eigenvectors() const { return Q_; }
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const { return kappa_; }

 private:
  Eigen::MatrixXd Q_;
  Eigen::VectorXd kappa_;
};

// ---------------------------------------------------------------------------
// A(t), B(t) and derived objects.  Everything is evaluated elementwise in
// the eigenbasis of K, where conjugation by e^{tK} is a Hadamard product
// with e^{t(kappa_i + kappa_j)}; each evaluation is one O(dim^2) pass plus
// two rotations.

struct ABPair {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

class ABBuilder {
 public:
  ABBuilder(const LuneOperator& h, const LuneVector& v, const LuneOperator& K);

  [[nodiscard]] ABPair at(double t) const;
  [[nodiscard]] Eigen::MatrixXd anticomm_K_B(double t) const;  // {K, B(t)}
  // int_0^1 B(t) dt by the fixed 32-node Gauss-Legendre rule; the rule
  // order is validated against the 64-node rule once per process.
  [[nodiscard]] Eigen::MatrixXd integral_B() const;

  // The symmetric transport pair associated with an arbitrary symmetric T:
  //   T1(t) = 1/2 (e^{tK} T e^{tK} + e^{-tK} T e^{-tK})
  //   T2(t) = 1/2 (e^{tK} T e^{tK} - e^{-tK} T e^{-tK})
  // satisfying d/dt T1 = {K, T2} and d/dt T2 = {K, T1}.
  [[nodiscard]] ABPair transport_pair(const Eigen::MatrixXd& T, double t) const;

 private:
  [[nodiscard]] Eigen::MatrixXd rotate_back(const Eigen::MatrixXd& M) const;
  Eigen::MatrixXd Q_;       // eigenvectors of K
  Eigen::VectorXd kappa_;   // eigenvalues of K
  Eigen::MatrixXd h_tilde_;  // Q^T h Q
  Eigen::MatrixXd hp_tilde_;  // Q^T (h + 2P) Q
};

// ---------------------------------------------------------------------------
// Rank-one perturbation square root (integral representation + trace form).

struct PerturbSqrt {
  // matrix = A^{1/2} + correction, with the correction accumulated directly
  // from the integral representation (and polished by a fixed-point sweep of
  // (A^{1/2}+R)^2 = A + g P_w when the coupling is weak enough for that map
  // to contract).  Keeping the correction separate preserves its relative
  // accuracy even when it sits many orders of magnitude below ||A^{1/2}||.
  Eigen::MatrixXd matrix;      // (A + g P_w)^{1/2}
  Eigen::MatrixXd correction;  // (A + g P_w)^{1/2} - A^{1/2}
  double trace = 0.0;          // tr (A + g P_w)^{1/2} via the log-trace form
};

// Throws std::invalid_argument if A or A + g P_w is not positive definite,
// numerical_error if the quadrature fails to converge.
PerturbSqrt one_dim_perturb_sqrt(const Eigen::MatrixXd& A, const Eigen::VectorXd& w,
                                 double g);

// ---------------------------------------------------------------------------
// tr(e^{-K} h e^{-K} - h - P) two ways.
//
//   route 1: direct trace through the eigendecomposition of K,
//   route 2: (1/pi) int_0^inf [log(1+x(t)) - x(t)] dt with
//            x(t) = 2 <u, (h^2+t^2)^{-1} u>, u = h^{1/2} v
// (for diagonal h this is x(t) = sum_i 2 v_i^2 lambda_i / (lambda_i^2+t^2)).

struct TraceCorrection {
  double route1 = 0.0;
  double route2 = 0.0;
  double rel_diff = 0.0;
};

// Throws numerical_error (with quadrature diagnostics) if route 2 does not
// converge.
TraceCorrection trace_correction(const LuneOperator& h, const LuneVector& v,
                                 const LuneOperator& K);

// ---------------------------------------------------------------------------
// Elementwise inequality suite.  Preconditions (the standing hypotheses of
// the matrix-element analysis): h diagonal with positive entries, v
// entrywise nonnegative; violations throw std::invalid_argument.
// Every inequality is scanned over all (i,j) and, where applicable, over
// t_grid; one BoundReport per inequality.
std::vector<BoundReport> check_element_bounds(const LuneOperator& h,
                                              const LuneVector& v,
                                              const LuneOperator& K,
                                              const std::vector<double>& t_grid);

// ---------------------------------------------------------------------------
// Diagnostics

[[nodiscard]] double hs_norm(const LuneOperator& op);

// Per-k JSON record {k, dim, hs_norm_K, trace_correction_route1/2,
// bound_reports[]}.
[[nodiscard]] std::string onebody_record_json(const LuneOperator& h, const LuneVector& v,
                                              const LuneOperator& K,
                                              const std::vector<BoundReport>& reports);

}  // namespace fermicorr
