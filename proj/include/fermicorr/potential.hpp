#pragma once
//
// Interaction potentials, represented purely through their Fourier
// coefficients V_hat(k) on the momentum lattice:
//
//   coulomb:  V_hat(k) = g / |k|^2
//   yukawa:   V_hat(k) = g / (|k|^2 + mu^2)
//   table:    finite map k -> V_hat(k) (symmetrized at construction)
//
// Standing conventions enforced here for every variant:
//   V_hat(0) = 0, V_hat(k) = V_hat(-k) >= 0, and sum_k V_hat(k)^2 < infinity.
//
// The module also evaluates potential-level lattice sums
//   sum_v2:     Sum_k V_hat(k)^2 * w(|k|),  w in {1, |k| (restricted to
//               |k| <= k_F), min(|k|, k_F)}
//   error_term: sqrt of the min-weight sum
// splitting off an analytically bracketed tail for the infinite variants
// (unit-cube volume comparison, see numerics.hpp); the returned value is the
// midpoint of the bracket and the half-width is reported alongside.

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fermicorr/lattice.hpp"

namespace fermicorr {

class PotentialModel {
 public:
  enum class Kind { coulomb, yukawa, table };

  static PotentialModel make_coulomb(double g);
  static PotentialModel make_yukawa(double g, double mu);
  // Entries are symmetrized: a missing mirror is completed, a conflicting
  // mirror is averaged (recorded in warnings()); an entry at k=0 is dropped
  // with a warning; negative coefficients are rejected.
  static PotentialModel make_table(const std::vector<std::pair<LatticeVector, double>>& entries);
  // Parse "coulomb:g=<f>", "yukawa:g=<f>,mu=<f>", "table:<path>", "none".
  static PotentialModel parse(const std::string& spec);
  static PotentialModel load_table_json(const std::string& path);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double g() const { return g_; }
  [[nodiscard]] double mu() const { return mu_; }
  // Rotation-invariant V_hat (depends on |k| only): true for coulomb/yukawa.
  [[nodiscard]] bool radial() const { return kind_ != Kind::table; }
  [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }
  [[nodiscard]] const std::string& spec_string() const { return spec_; }

  // Largest coefficient over k != 0 (used in rigorous tail majorants).
  [[nodiscard]] double max_coefficient() const;
  // Smallest radius R such that V_hat vanishes for |k| > R; empty for the
  // infinitely supported variants.
  [[nodiscard]] std::optional<double> support_radius() const;
  [[nodiscard]] bool is_zero() const;

  [[nodiscard]] const std::unordered_map<LatticeVector, double, LatticeVectorHash>&
  table_entries() const {
    return table_;
  }

 private:
  PotentialModel() = default;
  Kind kind_ = Kind::table;
  double g_ = 0.0;
  double mu_ = 0.0;
  std::unordered_map<LatticeVector, double, LatticeVectorHash> table_;
  std::vector<std::string> warnings_;
  std::string spec_;
};

// The Fourier coefficient; exactly 0 at k=0 and for absent table keys.
[[nodiscard]] double v_hat(const PotentialModel& model, const LatticeVector& k);

enum class SumWeight { one, norm_k, min_norm_kF };

struct ValueWithTail {
  double value = 0.0;      // midpoint of the rigorous bracket
  double halfwidth = 0.0;  // half-width of the bracket (0 for exact sums)
};

// Sum_k V_hat(k)^2 * w(|k|) over the punctured lattice.  For w = |k| the sum
// is restricted to |k| <= k_F (the regime the growth law addresses) and is
// exact; the other weights sum |k| <= R exactly (R = max(64, 8 k_F)) and
// bracket the rest analytically.
[[nodiscard]] ValueWithTail sum_v2(const PotentialModel& model, SumWeight weight,
                                   double k_F);

// sqrt(Sum_k V_hat(k)^2 min{|k|, k_F}) with the bracket propagated through
// the square root.
[[nodiscard]] ValueWithTail error_term(const PotentialModel& model, double k_F);

}  // namespace fermicorr
