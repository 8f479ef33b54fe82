#pragma once

// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the library's numerics.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Root of a monotone function on [lo, hi] by bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline double Phi_inv(double p) {
  return bisect([p](double x) { return Phi(x) - p; }, -40.0, 40.0);
}

// Mean of a standard normal restricted to its top (keep_top) or bottom share,
// by midpoint quadrature with m points on [-12, 12].
inline double trimmed_std_normal_mean(double share, bool keep_top, long m) {
  const double lo = -12.0, hi = 12.0, h = (hi - lo) / static_cast<double>(m);
  std::vector<double> mass(static_cast<std::size_t>(m));
  for (long k = 0; k < m; ++k) mass[static_cast<std::size_t>(k)] = phi(lo + (static_cast<double>(k) + 0.5) * h) * h;
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  double need = share * total, acc = 0.0;
  for (long step = 0; step < m && need > 0; ++step) {
    const long k = keep_top ? m - 1 - step : step;
    const double x = lo + (static_cast<double>(k) + 0.5) * h;
    const double take = std::min(mass[static_cast<std::size_t>(k)], need);
    acc += take * x;
    need -= take;
  }
  return acc / (share * total);
}

struct DgpBounds {
  double L = 0.0;
  double U = 0.0;
};

// Sharp bounds of the four-cell logistic selection design with outcome
// N(kappa0 + kappa1 x1, sigma^2) unaffected by treatment, by quadrature.
inline DgpBounds dgp_bounds(const std::array<double, 3>& a, const std::array<double, 3>& g,
                            const std::array<double, 4>& prob, double sigma, long m) {
  const double x1[4] = {0, 1, 0, 1}, x2[4] = {0, 0, 1, 1};
  double mass[2] = {0, 0}, norm[2] = {0, 0}, nl[2] = {0, 0}, nu[2] = {0, 0};
  for (int c = 0; c < 4; ++c) {
    if (prob[c] == 0) continue;
    const double e0 = a[0] + a[1] * x1[c] + a[2] * x2[c];
    const double gg = g[0] + g[1] * x1[c] + g[2] * x2[c];
    const double s0 = expit(e0), s1 = expit(e0 + gg);
    double L, U, at;
    int r;
    if (s0 <= s1) {
      // Treated outcomes are trimmed to the always-taker share p.
      const double p = s0 / s1;
      U = sigma * trimmed_std_normal_mean(p, true, m);
      L = sigma * trimmed_std_normal_mean(p, false, m);
      r = 0;
      at = prob[c] * s0;
    } else {
      const double p = s1 / s0;
      U = -sigma * trimmed_std_normal_mean(p, false, m);
      L = -sigma * trimmed_std_normal_mean(p, true, m);
      r = 1;
      at = prob[c] * s1;
    }
    mass[r] += prob[c];
    norm[r] += at;
    nl[r] += at * L;
    nu[r] += at * U;
  }
  DgpBounds out;
  for (int r = 0; r < 2; ++r) {
    if (mass[r] == 0) continue;
    out.L += mass[r] * nl[r] / norm[r];
    out.U += mass[r] * nu[r] / norm[r];
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace oracle
