// Continuum spectral constant in multiprecision. The windowed Gram matrix of
// the retained modes has its smallest eigenvalue near exp(-c sqrt(lambda)),
// far below double precision for short windows, so the Cholesky factor and the
// inverse iteration run in MPFR at a precision raised until the result is
// stable.

#include "hmhf/errors.hpp"
#include "hmhf/spectral_grid.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace hmhf {

namespace {

namespace mp = boost::multiprecision;
using Real = mp::mpfr_float;

struct PrecisionScope {
  unsigned saved;
  explicit PrecisionScope(unsigned digits) : saved(Real::default_precision()) {
    Real::default_precision(digits);
  }
  ~PrecisionScope() { Real::default_precision(saved); }
};

struct ArcIntegrals {
  std::vector<Real> lo, hi; // arc endpoints
  Real int_cos(int k) const {
    Real s = 0;
    for (std::size_t i = 0; i < lo.size(); ++i) {
      if (k == 0)
        s += hi[i] - lo[i];
      else
        s += (mp::sin(k * hi[i]) - mp::sin(k * lo[i])) / k;
    }
    return s;
  }
  Real int_sin(int k) const {
    if (k == 0) return Real(0);
    Real s = 0;
    for (std::size_t i = 0; i < lo.size(); ++i) s += (mp::cos(k * lo[i]) - mp::cos(k * hi[i])) / k;
    return s;
  }
};

// log of the smallest eigenvalue of the continuum windowed Gram at the current
// default precision; returns false when the Cholesky factorization breaks down
bool log_min_eigenvalue(int m, const Window& window, Real& out) {
  const int nb = 2 * m + 1;
  const Real pi = boost::math::constants::pi<Real>();
  const int n = window.grid().size();
  ArcIntegrals arcs;
  for (auto [j0, j1] : window.node_ranges()) {
    arcs.lo.push_back(2 * pi * j0 / n);
    arcs.hi.push_back(2 * pi * j1 / n);
  }
  std::vector<Real> ic(2 * m + 1), is(2 * m + 1);
  for (int k = 0; k <= 2 * m; ++k) {
    ic[k] = arcs.int_cos(k);
    is[k] = arcs.int_sin(k);
  }
  auto sgn_sin = [&](int k) { return k >= 0 ? is[k] : Real(-is[-k]); };
  std::vector<Real> g(static_cast<std::size_t>(nb) * nb);
  const Real root2 = mp::sqrt(Real(2));
  for (int a = 0; a < nb; ++a) {
    for (int b = a; b < nb; ++b) {
      Real v;
      const int ma = (a + 1) / 2, mb = (b + 1) / 2;
      const bool ca = a % 2 == 1, cb = b % 2 == 1;
      if (a == 0 && b == 0) {
        v = ic[0] / (2 * pi);
      } else if (a == 0) {
        v = (cb ? ic[mb] : is[mb]) / (pi * root2);
      } else if (ca && cb) {
        v = (ic[std::abs(ma - mb)] + ic[ma + mb]) / (2 * pi);
      } else if (!ca && !cb) {
        v = (ic[std::abs(ma - mb)] - ic[ma + mb]) / (2 * pi);
      } else {
        const int ms = ca ? mb : ma; // sine index
        const int mc = ca ? ma : mb; // cosine index
        v = (is[ms + mc] + sgn_sin(ms - mc)) / (2 * pi);
      }
      g[a * nb + b] = g[b * nb + a] = v;
    }
  }
  // Cholesky, lower factor stored in l
  std::vector<Real> l(static_cast<std::size_t>(nb) * nb, Real(0));
  for (int j = 0; j < nb; ++j) {
    Real d = g[j * nb + j];
    for (int k = 0; k < j; ++k) d -= l[j * nb + k] * l[j * nb + k];
    if (d <= 0) return false;
    l[j * nb + j] = mp::sqrt(d);
    for (int i = j + 1; i < nb; ++i) {
      Real s = g[i * nb + j];
      for (int k = 0; k < j; ++k) s -= l[i * nb + k] * l[j * nb + k];
      l[i * nb + j] = s / l[j * nb + j];
    }
  }
  auto solve = [&](std::vector<Real>& x) {
    for (int i = 0; i < nb; ++i) {
      Real s = x[i];
      for (int k = 0; k < i; ++k) s -= l[i * nb + k] * x[k];
      x[i] = s / l[i * nb + i];
    }
    for (int i = nb - 1; i >= 0; --i) {
      Real s = x[i];
      for (int k = i + 1; k < nb; ++k) s -= l[k * nb + i] * x[k];
      x[i] = s / l[i * nb + i];
    }
  };
  std::vector<Real> x(nb);
  for (int i = 0; i < nb; ++i) x[i] = Real(1) + Real(i) / (3 * nb);
  Real rq = 0, prev = -1;
  for (int it = 0; it < 400; ++it) {
    solve(x);
    Real norm = 0;
    for (const Real& v : x) norm += v * v;
    norm = mp::sqrt(norm);
    for (Real& v : x) v /= norm;
    rq = 0;
    for (int a = 0; a < nb; ++a) {
      Real s = 0;
      for (int b = 0; b < nb; ++b) s += g[a * nb + b] * x[b];
      rq += x[a] * s;
    }
    if (rq <= 0) return false;
    if (it > 3 && mp::abs(rq - prev) <= rq * Real(1e-30)) break;
    prev = rq;
  }
  out = mp::log(rq);
  return true;
}

} // namespace

double spectral_log_constant_exact(double lambda, const Window& window) {
  if (window.is_full()) return 0.0;
  const int m = lambda_cutoff(lambda);
  using Key = std::tuple<int, int, std::vector<std::pair<int, int>>>;
  static std::mutex mu;
  static std::map<Key, double> cache;
  Key key{m, window.grid().size(), window.node_ranges()};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  unsigned digits = 40 + 4 * m;
  double last = 0.0;
  bool have_last = false;
  double result = NAN;
  for (int round = 0; round < 8; ++round, digits *= 2) {
    PrecisionScope scope(digits);
    Real logmin;
    if (!log_min_eigenvalue(m, window, logmin)) continue;
    const double v = static_cast<double>(logmin);
    if (have_last && std::abs(v - last) <= 1e-12 * std::max(1.0, std::abs(v))) {
      result = -v / 2;
      break;
    }
    last = v;
    have_last = true;
  }
  if (std::isnan(result))
    throw SingularGram("continuum Gram eigenvalue did not stabilize under precision refinement");
  std::lock_guard<std::mutex> lock(mu);
  cache[key] = result;
  return result;
}

double spectral_constant_exact(double lambda, const Window& window) {
  return std::exp(-spectral_log_constant_exact(lambda, window));
}

double fit_spectral_c0(const Window& window, double lambda_max) {
  if (window.is_full()) return 0.0;
  const int mmax = lambda_cutoff(std::max(1.0, lambda_max));
  double best = 0.0;
  for (int m = 1; m <= mmax; ++m) {
    const double v = spectral_log_constant_exact(static_cast<double>(m) * m, window) / m;
    best = std::max(best, v);
  }
  return best;
}

} // namespace hmhf
