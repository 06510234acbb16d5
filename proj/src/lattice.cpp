#include "fermicorr/lattice.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fermicorr/numerics.hpp"

namespace fermicorr {

std::string LatticeVector::str() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%lld,%lld,%lld)", static_cast<long long>(x),
                static_cast<long long>(y), static_cast<long long>(z));
  return buf;
}

bool inside_radius(const LatticeVector& v, double r) {
  // norm2 is an exact int64; r^2 in long double keeps 64 mantissa bits, so a
  // boundary point (norm2 == r^2 for representable r^2) classifies exactly.
  const long double r2 = static_cast<long double>(r) * static_cast<long double>(r);
  return static_cast<long double>(v.norm2()) <= r2;
}

FermiBall fermi_ball(double k_F) {
  if (!std::isfinite(k_F) || k_F <= 0.0) {
    throw std::invalid_argument("fermi_ball: k_F must be finite and positive");
  }
  FermiBall ball;
  ball.k_F = k_F;
  const auto r = static_cast<std::int64_t>(std::floor(k_F));
  ball.points.reserve(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
  // Ascending loops produce lexicographic order directly.
  for (std::int64_t x = -r; x <= r; ++x) {
    for (std::int64_t y = -r; y <= r; ++y) {
      for (std::int64_t z = -r; z <= r; ++z) {
        const LatticeVector p{x, y, z};
        if (inside_radius(p, k_F)) ball.points.push_back(p);
      }
    }
  }
  return ball;
}

double lambda_kp(const LatticeVector& k, const LatticeVector& p) {
  // 2*lambda = |p|^2 - |p-k|^2 = 2 p.k - |k|^2, exact in int64.
  const std::int64_t twice = 2 * p.dot(k) - k.norm2();
  return 0.5 * static_cast<double>(twice);
}

Lune lune(const FermiBall& ball, const LatticeVector& k) {
  if (k == LatticeVector{0, 0, 0}) {
    throw std::invalid_argument("lune: k must be nonzero");
  }
  Lune lu;
  lu.k = k;
  lu.points.reserve(ball.points.size());
  // Enumerate B_F + k (shifting preserves lexicographic order) and keep the
  // points that fall strictly outside the ball.
  for (const auto& h : ball.points) {
    const LatticeVector p = h + k;
    if (!ball.contains(p)) {
      lu.points.push_back(p);
      const double lam = lambda_kp(k, p);
      if (!(lam > 0.0)) {
        // |p-k| <= k_F < |p| forces |p|^2 > |p-k|^2; reaching here means the
        // boundary classification above is broken.
        throw std::logic_error("lune: non-positive excitation energy at " + p.str());
      }
      lu.lambdas.push_back(lam);
    }
  }
  return lu;
}

PowerSum lune_power_sum(const Lune& lu, double beta) {
  PowerSum out;
  out.beta_in_range = (beta >= -1.0 && beta <= 0.0);
  num::Neumaier acc;
  for (const double lam : lu.lambdas) acc.add(std::pow(lam, beta));
  out.value = acc.value();
  return out;
}

std::shared_ptr<const Lune> LuneCache::get(const FermiBall& ball, const LatticeVector& k) {
  const Key key{ball.k_F, k};
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
  }
  auto fresh = std::make_shared<const Lune>(lune(ball, k));
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = map_.emplace(key, std::move(fresh));
  (void)inserted;  // a concurrent loser reuses the winner's object
  return it->second;
}

std::size_t LuneCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

std::size_t LuneCache::save_csv(const std::string& path, double k_F) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("LuneCache::save_csv: cannot open " + path);
  out << "kx,ky,kz,px,py,pz,lambda\n";
  std::size_t lunes = 0;
  char buf[64];
  for (const auto& [key, lu] : map_) {
    if (key.k_F != k_F) continue;
    ++lunes;
    for (std::size_t i = 0; i < lu->points.size(); ++i) {
      const auto& p = lu->points[i];
      std::snprintf(buf, sizeof buf, "%.17g", lu->lambdas[i]);
      out << key.k.x << ',' << key.k.y << ',' << key.k.z << ',' << p.x << ','
          << p.y << ',' << p.z << ',' << buf << '\n';
    }
  }
  return lunes;
}

std::size_t LuneCache::load_csv(const std::string& path, double k_F) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("LuneCache::load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) return 0;  // header
  std::map<LatticeVector, Lune> partial;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long vals[6];
    double lam = 0.0;
    char comma = 0;
    for (auto& v : vals) {
      if (!(ss >> v >> comma)) throw std::runtime_error("LuneCache::load_csv: bad row: " + line);
    }
    if (!(ss >> lam)) throw std::runtime_error("LuneCache::load_csv: bad lambda: " + line);
    const LatticeVector k{vals[0], vals[1], vals[2]};
    const LatticeVector p{vals[3], vals[4], vals[5]};
    auto& lu = partial[k];
    lu.k = k;
    lu.points.push_back(p);
    lu.lambdas.push_back(lam);
  }
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t loaded = 0;
  for (auto& [k, lu] : partial) {
    ++loaded;
    map_[Key{k_F, k}] = std::make_shared<const Lune>(std::move(lu));
  }
  return loaded;
}

}  // namespace fermicorr
