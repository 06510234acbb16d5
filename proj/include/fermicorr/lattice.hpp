#pragma once
//
// Lattice geometry for Fermi-ball momentum sums.
//
// Everything downstream (one-body operators, energy sums, the Fock-space
// oracle) is built on three objects:
//
//   * integer momenta  p = (x,y,z) in Z^3,
//   * the Fermi ball   B_F = { p : |p| <= k_F },
//   * for each k != 0 the "lune"  L_k = (B_F + k) \ B_F  of particle momenta
//     reachable by exciting a hole momentum p-k inside the ball to a momentum
//     p outside it, together with the excitation energy
//         lambda_{k,p} = (|p|^2 - |p-k|^2) / 2,
//     an exact half-integer.
//
// All radius comparisons are done as integer-norm^2 against k_F^2 evaluated
// in extended precision, so points exactly on the sphere are classified
// deterministically (the membership test |p-k| <= k_F < |p| has a closed/open
// asymmetry that must be honored exactly).

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace fermicorr {

struct LatticeVector {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  [[nodiscard]] std::int64_t norm2() const { return x * x + y * y + z * z; }
  [[nodiscard]] std::int64_t dot(const LatticeVector& o) const {
    return x * o.x + y * o.y + z * o.z;
  }
  [[nodiscard]] LatticeVector operator-() const { return {-x, -y, -z}; }

  friend LatticeVector operator+(const LatticeVector& a, const LatticeVector& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend LatticeVector operator-(const LatticeVector& a, const LatticeVector& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend bool operator==(const LatticeVector&, const LatticeVector&) = default;
  // Total order = lexicographic over (x,y,z); the member order below is load-bearing.
  friend auto operator<=>(const LatticeVector&, const LatticeVector&) = default;

  [[nodiscard]] std::string str() const;
};

struct LatticeVectorHash {
  std::size_t operator()(const LatticeVector& v) const noexcept {
    // Pack three small coordinates into one word, then mix.
    auto h = static_cast<std::uint64_t>(v.x * 73856093LL) ^
             static_cast<std::uint64_t>(v.y * 19349669LL) ^
             static_cast<std::uint64_t>(v.z * 83492791LL);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return static_cast<std::size_t>(h);
  }
};

// True iff |v|^2 <= r^2 with r^2 evaluated in long double.
[[nodiscard]] bool inside_radius(const LatticeVector& v, double r);

struct FermiBall {
  double k_F = 0.0;
  std::vector<LatticeVector> points;  // sorted lexicographically

  [[nodiscard]] std::size_t N() const { return points.size(); }
  [[nodiscard]] bool contains(const LatticeVector& p) const {
    return inside_radius(p, k_F);
  }
};

struct Lune {
  LatticeVector k;
  std::vector<LatticeVector> points;  // sorted lexicographically
  std::vector<double> lambdas;        // lambda_{k,p} in the same order; all > 0

  [[nodiscard]] std::size_t size() const { return points.size(); }
};

// All integer points with |p| <= k_F.  Throws std::invalid_argument unless
// k_F is finite and positive.
[[nodiscard]] FermiBall fermi_ball(double k_F);

// The lune L_k = (B_F + k) \ B_F with the excitation energies attached.
// Throws std::invalid_argument for k = 0.
[[nodiscard]] Lune lune(const FermiBall& ball, const LatticeVector& k);

// lambda_{k,p} = (|p|^2 - |p-k|^2)/2 = p.k - |k|^2/2, computed from integer
// norms; the result is an exact half-integer.
[[nodiscard]] double lambda_kp(const LatticeVector& k, const LatticeVector& p);

// Sum_{p in L_k} lambda_{k,p}^beta with compensated summation.  The supported
// exponent range is beta in [-1,0]; values outside are computed anyway but
// flagged, since no a-priori growth envelope applies to them.
struct PowerSum {
  double value = 0.0;
  bool beta_in_range = true;
};
[[nodiscard]] PowerSum lune_power_sum(const Lune& lu, double beta);

// In-memory lune cache keyed by the exact (k_F, k) inputs, with an optional
// on-disk CSV mirror (schema: kx,ky,kz,px,py,pz,lambda; one row per lune
// point; integer fields round-trip bit-exactly).  Lune objects are immutable
// once constructed, so shared const access from concurrent readers is safe;
// the map itself is guarded by a mutex.
class LuneCache {
 public:
  LuneCache() = default;

  // Returns a shared, immutable lune for (ball.k_F, k).
  std::shared_ptr<const Lune> get(const FermiBall& ball, const LatticeVector& k);

  // On-disk mirror: writes every cached lune for the given k_F; loads rows
  // into the cache.  Returns the number of lunes written/loaded.
  std::size_t save_csv(const std::string& path, double k_F) const;
  std::size_t load_csv(const std::string& path, double k_F);

  [[nodiscard]] std::size_t size() const;

 private:
  struct Key {
    double k_F;
    LatticeVector k;
    friend bool operator<(const Key& a, const Key& b) {
      if (a.k_F != b.k_F) return a.k_F < b.k_F;
      return a.k < b.k;
    }
  };
  mutable std::mutex mu_;
  std::map<Key, std::shared_ptr<const Lune>> map_;
};

}  // namespace fermicorr
