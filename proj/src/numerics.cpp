#include "fermicorr/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

namespace fermicorr::num {

namespace {

// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

GaussLegendre make_gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  GaussLegendre rule;
  rule.x.resize(n);
  rule.w.resize(n);
  for (int i = 0; i < n; ++i) {
    // Chebyshev-type initial guess, then Newton to machine precision.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      legendre(n, x, p, dp);
      const double dx = -p / dp;
      x += dx;
      if (std::abs(dx) < 1e-15) break;
    }
    legendre(n, x, p, dp);
    rule.x[i] = x;
    rule.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  // Ascending nodes; cos() produced descending i-order for our guess.
  std::reverse(rule.x.begin(), rule.x.end());
  std::reverse(rule.w.begin(), rule.w.end());
  // Rule self-check: the weights integrate 1 and x^2 exactly.
  double sw = 0.0, sx2 = 0.0;
  for (int i = 0; i < n; ++i) {
    sw += rule.w[i];
    sx2 += rule.w[i] * rule.x[i] * rule.x[i];
  }
  if (std::abs(sw - 2.0) > 1e-12 || (n >= 2 && std::abs(sx2 - 2.0 / 3.0) > 1e-12)) {
    throw std::logic_error("gauss_legendre: node generation failed self-check");
  }
  return rule;
}

std::mutex gl_mutex;
std::map<int, GaussLegendre> gl_cache;

// --------------------------------------------------------------------------
// Gauss-Kronrod 7/15 pair.  Abscissae/weights are the classical 15-digit
// values; xgk holds the positive half (odd entries are the embedded Gauss-7
// points), wg the Gauss-7 weights for those points.
constexpr double kXgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084727};
constexpr double kWg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

void gk15_self_check() {
  static std::once_flag once;
  std::call_once(once, [] {
    double sw = 0.0;
    for (int j = 0; j < 7; ++j) sw += 2.0 * kWgk[j];
    sw += kWgk[7];
    if (std::abs(sw - 2.0) > 1e-13) {
      throw std::logic_error("gk15: Kronrod weights fail the sum rule");
    }
    // 512/1225 is the exact central Gauss-7 weight.
    if (std::abs(kWg[3] - 512.0 / 1225.0) > 1e-15) {
      throw std::logic_error("gk15: central Gauss weight mismatch");
    }
  });
}

struct Segment {
  double a, b;
  double value;   // Kronrod estimate
  double error;   // damped |K15 - G7|
};

// One 15-point Kronrod evaluation with the QUADPACK-style error damping.
Segment gk15_segment(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double fv[15];
  for (int j = 0; j < 7; ++j) {
    fv[j] = f(c - h * kXgk[j]);
    fv[14 - j] = f(c + h * kXgk[j]);
  }
  fv[7] = f(c);
  double resk = kWgk[7] * fv[7];
  double resg = kWg[3] * fv[7];
  double resabs = kWgk[7] * std::abs(fv[7]);
  for (int j = 0; j < 7; ++j) {
    resk += kWgk[j] * (fv[j] + fv[14 - j]);
    resabs += kWgk[j] * (std::abs(fv[j]) + std::abs(fv[14 - j]));
    if (j % 2 == 1) resg += kWg[j / 2] * (fv[j] + fv[14 - j]);
  }
  const double mean = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fv[7] - mean);
  for (int j = 0; j < 7; ++j) {
    resasc += kWgk[j] * (std::abs(fv[j] - mean) + std::abs(fv[14 - j] - mean));
  }
  resasc *= std::abs(h);
  resabs *= std::abs(h);
  double err = std::abs((resk - resg) * h);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  return Segment{a, b, resk * h, err};
}

}  // namespace

const GaussLegendre& gauss_legendre(int n) {
  std::lock_guard<std::mutex> lock(gl_mutex);
  auto it = gl_cache.find(n);
  if (it == gl_cache.end()) it = gl_cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

double integrate_gl01(const std::function<double(double)>& f, int n) {
  const GaussLegendre& rule = gauss_legendre(n);
  Neumaier acc;
  for (int i = 0; i < n; ++i) {
    const double t = 0.5 * (rule.x[i] + 1.0);
    acc.add(0.5 * rule.w[i] * f(t));
  }
  return acc.value();
}

QuadResult integrate_gk15(const std::function<double(double)>& f, double a,
                          double b, double rel_tol, int max_subdivisions) {
  gk15_self_check();
  std::vector<Segment> segs;
  segs.push_back(gk15_segment(f, a, b));
  QuadResult out;
  for (int iter = 0;; ++iter) {
    double total = 0.0, err = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      total += segs[i].value;
      err += segs[i].error;
      if (segs[i].error > segs[worst].error) worst = i;
    }
    out.value = total;
    out.abs_error = err;
    out.subdivisions = iter;
    if (err <= rel_tol * std::abs(total) || err <= 1e-300) {
      out.converged = true;
      return out;
    }
    if (iter >= max_subdivisions) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "gk15: %d subdivisions exhausted; value=%.17g abs_err=%.3g "
                    "rel_err=%.3g target=%.3g",
                    iter, total, err, err / std::max(std::abs(total), 1e-300), rel_tol);
      out.diagnostics = buf;
      return out;
    }
    const Segment s = segs[worst];
    const double mid = 0.5 * (s.a + s.b);
    segs[worst] = gk15_segment(f, s.a, mid);
    segs.push_back(gk15_segment(f, mid, s.b));
  }
}

QuadResult integrate_semi_infinite(const std::function<double(double)>& f,
                                   double scale, double rel_tol,
                                   int max_subdivisions) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("integrate_semi_infinite: scale must be positive");
  }
  auto g = [&f, scale](double u) {
    const double om = 1.0 - u;
    const double t = scale * u / om;
    return f(t) * scale / (om * om);
  };
  // Stop just short of u=1; the integrands we handle decay at least like
  // t^{-2}, so the clipped sliver is far below any supported tolerance.
  return integrate_gk15(g, 0.0, 1.0 - 1e-14, rel_tol, max_subdivisions);
}

namespace {

struct SegmentVec {
  double a, b;
  std::vector<double> value;
  double error;
};

SegmentVec gk15_segment_vec(const std::function<std::vector<double>(double)>& f,
                            int dim, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  std::vector<std::vector<double>> fv(15);
  for (int j = 0; j < 7; ++j) {
    fv[j] = f(c - h * kXgk[j]);
    fv[14 - j] = f(c + h * kXgk[j]);
  }
  fv[7] = f(c);
  SegmentVec seg{a, b, std::vector<double>(dim, 0.0), 0.0};
  for (int d = 0; d < dim; ++d) {
    double resk = kWgk[7] * fv[7][d];
    double resg = kWg[3] * fv[7][d];
    for (int j = 0; j < 7; ++j) {
      resk += kWgk[j] * (fv[j][d] + fv[14 - j][d]);
      if (j % 2 == 1) resg += kWg[j / 2] * (fv[j][d] + fv[14 - j][d]);
    }
    const double mean = 0.5 * resk;
    double resasc = kWgk[7] * std::abs(fv[7][d] - mean);
    for (int j = 0; j < 7; ++j) {
      resasc += kWgk[j] * (std::abs(fv[j][d] - mean) + std::abs(fv[14 - j][d] - mean));
    }
    resasc *= std::abs(h);
    double err = std::abs((resk - resg) * h);
    if (resasc != 0.0 && err != 0.0) {
      err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    }
    seg.value[d] = resk * h;
    seg.error = std::max(seg.error, err);
  }
  return seg;
}

}  // namespace

QuadResultVec integrate_gk15_vec(const std::function<std::vector<double>(double)>& f,
                                 int dim, double a, double b, double rel_tol,
                                 int max_subdivisions) {
  gk15_self_check();
  std::vector<SegmentVec> segs;
  segs.push_back(gk15_segment_vec(f, dim, a, b));
  QuadResultVec out;
  out.value.assign(dim, 0.0);
  for (int iter = 0;; ++iter) {
    std::vector<double> total(dim, 0.0);
    double err = 0.0, scale = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      for (int d = 0; d < dim; ++d) total[d] += segs[i].value[d];
      err += segs[i].error;
      if (segs[i].error > segs[worst].error) worst = i;
    }
    for (int d = 0; d < dim; ++d) scale = std::max(scale, std::abs(total[d]));
    out.value = total;
    out.abs_error = err;
    out.subdivisions = iter;
    if (err <= rel_tol * scale || err <= 1e-300) {
      out.converged = true;
      return out;
    }
    if (iter >= max_subdivisions) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "gk15-vec: %d subdivisions exhausted; abs_err=%.3g scale=%.3g "
                    "target=%.3g",
                    iter, err, scale, rel_tol);
      out.diagnostics = buf;
      return out;
    }
    const SegmentVec s = segs[worst];
    const double mid = 0.5 * (s.a + s.b);
    segs[worst] = gk15_segment_vec(f, dim, s.a, mid);
    segs.push_back(gk15_segment_vec(f, dim, mid, s.b));
  }
}

QuadResultVec integrate_semi_infinite_vec(
    const std::function<std::vector<double>(double)>& f, int dim, double scale,
    double rel_tol, int max_subdivisions) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("integrate_semi_infinite_vec: scale must be positive");
  }
  auto g = [&f, scale](double u) {
    const double om = 1.0 - u;
    const double t = scale * u / om;
    auto v = f(t);
    const double jac = scale / (om * om);
    for (auto& c : v) c *= jac;
    return v;
  };
  return integrate_gk15_vec(g, dim, 0.0, 1.0 - 1e-14, rel_tol, max_subdivisions);
}

double log1p_minus_x(double x) {
  if (!(x > -1.0)) throw std::invalid_argument("log1p_minus_x: need x > -1");
  if (std::abs(x) < 1e-4) {
    // alternating series; at |x| = 1e-4 the first omitted term is ~1e-21
    return x * x * (-0.5 + x * (1.0 / 3.0 + x * (-0.25 + x / 5.0)));
  }
  return std::log1p(x) - x;
}

double integral_power_tail(double A, int m, double c) {
  if (m < 4) throw std::invalid_argument("integral_power_tail: need m >= 4");
  if (!(A > 0.0)) throw std::invalid_argument("integral_power_tail: need A > 0");
  const double a3 = std::pow(A, 3 - m) / (m - 3);
  const double a2 = 2.0 * c * std::pow(A, 2 - m) / (m - 2);
  const double a1 = c * c * std::pow(A, 1 - m) / (m - 1);
  return a3 + a2 + a1;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int nw = std::max(1, threads);
  if (nw == 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mu;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(nw), n);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!failed.exchange(true)) first_error = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw std::runtime_error("parallel_for: worker failed: " + first_error);
}

std::mt19937_64 rng_for(std::uint64_t master_seed, std::string_view name) {
  // FNV-1a over the name, mixed with the master seed by splitmix64 rounds.
  std::uint64_t h = 1469598103934665603ULL;
  for (const char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  std::uint64_t s = master_seed ^ h;
  auto splitmix = [&s] {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return std::mt19937_64{splitmix()};
}

}  // namespace fermicorr::num
