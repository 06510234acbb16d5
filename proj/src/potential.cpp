#include "fermicorr/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"  // vendored single-header nlohmann::json

#include "fermicorr/numerics.hpp"

namespace fermicorr {

namespace {
constexpr double kSqrt3 = 1.7320508075688772;

double parse_double(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("potential: bad " + what + " value '" + s + "'");
  }
  if (pos != s.size()) {
    throw std::invalid_argument("potential: trailing junk in " + what + " value '" + s + "'");
  }
  return v;
}
}  // namespace

PotentialModel PotentialModel::make_coulomb(double g) {
  if (!(g > 0.0) || !std::isfinite(g)) {
    throw std::invalid_argument("coulomb potential: g must be finite and positive");
  }
  PotentialModel m;
  m.kind_ = Kind::coulomb;
  m.g_ = g;
  char buf[64];
  std::snprintf(buf, sizeof buf, "coulomb:g=%.17g", g);
  m.spec_ = buf;
  return m;
}

PotentialModel PotentialModel::make_yukawa(double g, double mu) {
  if (!(g > 0.0) || !std::isfinite(g) || !(mu > 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("yukawa potential: g and mu must be finite and positive");
  }
  PotentialModel m;
  m.kind_ = Kind::yukawa;
  m.g_ = g;
  m.mu_ = mu;
  char buf[96];
  std::snprintf(buf, sizeof buf, "yukawa:g=%.17g,mu=%.17g", g, mu);
  m.spec_ = buf;
  return m;
}

PotentialModel PotentialModel::make_table(
    const std::vector<std::pair<LatticeVector, double>>& entries) {
  PotentialModel m;
  m.kind_ = Kind::table;
  m.spec_ = "none";
  for (const auto& [k, v] : entries) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("table potential: coefficient at " + k.str() +
                                  " must be finite and nonnegative");
    }
    if (k == LatticeVector{0, 0, 0}) {
      m.warnings_.push_back("table potential: entry at k=0 dropped (V_hat(0) = 0 by convention)");
      continue;
    }
    auto [it, inserted] = m.table_.emplace(k, v);
    if (!inserted && it->second != v) {
      m.warnings_.push_back("table potential: duplicate entry at " + k.str() + " averaged");
      it->second = 0.5 * (it->second + v);
    }
  }
  // Symmetrize: complete missing mirrors, average conflicting ones.
  std::vector<LatticeVector> keys;
  keys.reserve(m.table_.size());
  for (const auto& [k, v] : m.table_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) {
    const auto it = m.table_.find(k);
    const auto mit = m.table_.find(-k);
    if (mit == m.table_.end()) {
      m.table_.emplace(-k, it->second);
    } else if (mit->second != it->second) {
      const double avg = 0.5 * (mit->second + it->second);
      m.warnings_.push_back("table potential: asymmetric pair at " + k.str() +
                            " symmetrized by averaging");
      it->second = avg;
      mit->second = avg;
    }
  }
  return m;
}

PotentialModel PotentialModel::load_table_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("table potential: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw std::invalid_argument("table potential: bad JSON in " + path + ": " + e.what());
  }
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw std::invalid_argument("table potential: missing 'entries' array in " + path);
  }
  std::vector<std::pair<LatticeVector, double>> entries;
  for (const auto& e : doc["entries"]) {
    if (!e.contains("k") || !e["k"].is_array() || e["k"].size() != 3 || !e.contains("v")) {
      throw std::invalid_argument("table potential: entry needs k=[x,y,z] and v in " + path);
    }
    entries.push_back({LatticeVector{e["k"][0].get<std::int64_t>(),
                                     e["k"][1].get<std::int64_t>(),
                                     e["k"][2].get<std::int64_t>()},
                       e["v"].get<double>()});
  }
  auto m = make_table(entries);
  m.spec_ = "table:" + path;
  return m;
}

PotentialModel PotentialModel::parse(const std::string& spec) {
  if (spec == "none") {
    auto m = make_table({});
    m.spec_ = "none";
    return m;
  }
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "table") {
    if (rest.empty()) throw std::invalid_argument("potential: table needs a path");
    return load_table_json(rest);
  }
  // key=value pairs separated by commas
  std::unordered_map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < rest.size()) {
    const auto comma = rest.find(',', pos);
    const std::string piece = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                          : comma - pos);
    const auto eq = piece.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("potential: expected key=value, got '" + piece + "'");
    }
    kv[piece.substr(0, eq)] = piece.substr(eq + 1);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  auto need = [&kv, &spec](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::invalid_argument("potential: '" + spec + "' is missing " + key + "=");
    }
    return it->second;
  };
  if (head == "coulomb") {
    if (kv.size() != 1) throw std::invalid_argument("potential: coulomb takes exactly g=");
    return make_coulomb(parse_double(need("g"), "g"));
  }
  if (head == "yukawa") {
    if (kv.size() != 2) throw std::invalid_argument("potential: yukawa takes g= and mu=");
    return make_yukawa(parse_double(need("g"), "g"), parse_double(need("mu"), "mu"));
  }
  throw std::invalid_argument("potential: unknown variant '" + head +
                              "' (expected coulomb, yukawa, table, none)");
}

double PotentialModel::max_coefficient() const {
  switch (kind_) {
    case Kind::coulomb:
      return g_;  // attained at |k| = 1
    case Kind::yukawa:
      return g_ / (1.0 + mu_ * mu_);
    case Kind::table: {
      double mx = 0.0;
      for (const auto& [k, v] : table_) mx = std::max(mx, v);
      return mx;
    }
  }
  return 0.0;
}

std::optional<double> PotentialModel::support_radius() const {
  if (kind_ != Kind::table) return std::nullopt;
  std::int64_t n2 = 0;
  for (const auto& [k, v] : table_) {
    if (v != 0.0) n2 = std::max(n2, k.norm2());
  }
  return std::sqrt(static_cast<double>(n2));
}

bool PotentialModel::is_zero() const {
  if (kind_ != Kind::table) return false;
  for (const auto& [k, v] : table_) {
    if (v != 0.0) return false;
  }
  return true;
}

double v_hat(const PotentialModel& model, const LatticeVector& k) {
  if (k == LatticeVector{0, 0, 0}) return 0.0;
  switch (model.kind()) {
    case PotentialModel::Kind::coulomb:
      return model.g() / static_cast<double>(k.norm2());
    case PotentialModel::Kind::yukawa:
      return model.g() / (static_cast<double>(k.norm2()) + model.mu() * model.mu());
    case PotentialModel::Kind::table: {
      const auto it = model.table_entries().find(k);
      return it == model.table_entries().end() ? 0.0 : it->second;
    }
  }
  return 0.0;
}

namespace {

// Exact finite part: Sum over 0 < |k| <= R of V_hat^2 * w, in lexicographic
// order with compensated summation.
double finite_sum_v2(const PotentialModel& model, SumWeight weight, double k_F, double R) {
  num::Neumaier acc;
  if (model.kind() == PotentialModel::Kind::table) {
    // Deterministic order over the (small) support.
    std::vector<LatticeVector> keys;
    keys.reserve(model.table_entries().size());
    for (const auto& [k, v] : model.table_entries()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (const auto& k : keys) {
      if (!inside_radius(k, R)) continue;
      const double nk = std::sqrt(static_cast<double>(k.norm2()));
      double w = 1.0;
      if (weight == SumWeight::norm_k) {
        if (!inside_radius(k, k_F)) continue;
        w = nk;
      } else if (weight == SumWeight::min_norm_kF) {
        w = std::min(nk, k_F);
      }
      const double v = v_hat(model, k);
      acc.add(v * v * w);
    }
    return acc.value();
  }
  const auto r = static_cast<std::int64_t>(std::floor(R));
  for (std::int64_t x = -r; x <= r; ++x) {
    for (std::int64_t y = -r; y <= r; ++y) {
      for (std::int64_t z = -r; z <= r; ++z) {
        const LatticeVector k{x, y, z};
        if (k.norm2() == 0 || !inside_radius(k, R)) continue;
        const double nk = std::sqrt(static_cast<double>(k.norm2()));
        double w = 1.0;
        if (weight == SumWeight::norm_k) {
          if (!inside_radius(k, k_F)) continue;
          w = nk;
        } else if (weight == SumWeight::min_norm_kF) {
          w = std::min(nk, k_F);
        }
        const double v = v_hat(model, k);
        acc.add(v * v * w);
      }
    }
  }
  return acc.value();
}

}  // namespace

ValueWithTail sum_v2(const PotentialModel& model, SumWeight weight, double k_F) {
  if (!(k_F > 0.0) || !std::isfinite(k_F)) {
    throw std::invalid_argument("sum_v2: k_F must be finite and positive");
  }
  ValueWithTail out;
  if (model.kind() == PotentialModel::Kind::table) {
    // Finite support: the sum is exact, no tail.
    out.value = finite_sum_v2(model, weight, k_F, 1e18);
    out.halfwidth = 0.0;
    return out;
  }
  if (weight == SumWeight::norm_k) {
    // Restricted to |k| <= k_F by definition: exact.
    out.value = finite_sum_v2(model, weight, k_F, k_F);
    out.halfwidth = 0.0;
    return out;
  }
  const double R = std::max(64.0, 8.0 * k_F);
  const double inside = finite_sum_v2(model, weight, k_F, R);
  // Tail bracket for f(u) = V_hat(u)^2 * w(u) with w = 1 or w = k_F (the min
  // weight saturates at k_F because R >= 8 k_F):
  //   coulomb: V^2 = g^2 u^-4;  yukawa: g^2/(u^2+mu^2)^2 in [g^2 u^-4 /
  //   (1+mu^2/B^2)^2, g^2 u^-4] on u >= B.
  const double wconst = (weight == SumWeight::min_norm_kF) ? k_F : 1.0;
  const double g2 = model.g() * model.g();
  const double A_hi = R - kSqrt3;
  const double A_lo = R + kSqrt3;
  double hi = 4.0 * M_PI * g2 * wconst * num::integral_power_tail(A_hi, 4, kSqrt3 / 2.0);
  double lo = 4.0 * M_PI * g2 * wconst * num::integral_power_tail(A_lo, 4, -kSqrt3 / 2.0);
  if (model.kind() == PotentialModel::Kind::yukawa) {
    const double q = 1.0 + model.mu() * model.mu() / (A_lo * A_lo);
    lo /= q * q;
  }
  out.value = inside + 0.5 * (lo + hi);
  out.halfwidth = 0.5 * (hi - lo);
  return out;
}

ValueWithTail error_term(const PotentialModel& model, double k_F) {
  const ValueWithTail s = sum_v2(model, SumWeight::min_norm_kF, k_F);
  const double lo = std::sqrt(std::max(0.0, s.value - s.halfwidth));
  const double hi = std::sqrt(s.value + s.halfwidth);
  return ValueWithTail{0.5 * (lo + hi), 0.5 * (hi - lo)};
}

}  // namespace fermicorr
