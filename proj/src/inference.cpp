#include "leebounds/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"

namespace leebounds {

namespace {

double two_sided_z(double level) { return normal_quantile(1.0 - (1.0 - level) / 2.0); }

double check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::Parameter, "confidence level must lie in (0,1)");
  return level;
}

// Smallest c_U >= 0 meeting both one-sided coverage constraints for a given c_L.
double stoye_cu(double cL, double dL, double dU, double level) {
  auto ok = [&](double cU) {
    return normal_cdf(cU + dU) - normal_cdf(-cL) >= level && normal_cdf(cU) - normal_cdf(-cL - dL) >= level;
  };
  double hi = 40.0;
  if (!ok(hi)) return std::numeric_limits<double>::infinity();
  double lo = -40.0;
  if (ok(lo)) return lo;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

const char* region_kind_name(RegionKind k) {
  switch (k) {
    case RegionKind::Set: return "set";
    case RegionKind::ImbensManski: return "imbens_manski";
    case RegionKind::Stoye: return "stoye";
    case RegionKind::Variational: return "variational";
  }
  return "unknown";
}

Eigen::Matrix2d variance_matrix(const Eigen::VectorXd& g_L, const Eigen::VectorXd& g_U, const Eigen::VectorXd& w) {
  if (g_L.size() != g_U.size() || g_L.size() != w.size() || g_L.size() == 0)
    fail(ErrorKind::Shape, "moment series and weights must be nonempty with equal length");
  const Eigen::VectorXd wt = unit_mean_weights(w);
  const double n = static_cast<double>(g_L.size());
  const double mL = g_L.dot(wt) / n, mU = g_U.dot(wt) / n;
  Eigen::Matrix2d V = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < g_L.size(); ++i) {
    const double a = wt(i) * (g_L(i) - mL), b = wt(i) * (g_U(i) - mU);
    V(0, 0) += a * a;
    V(0, 1) += a * b;
    V(1, 1) += b * b;
  }
  V(1, 0) = V(0, 1);
  return V / n;
}

Eigen::Matrix2d cluster_variance(const Eigen::VectorXd& g_L, const Eigen::VectorXd& g_U,
                                 const std::vector<std::int64_t>& cluster, const Eigen::VectorXd& w) {
  if (g_L.size() != g_U.size() || g_L.size() != w.size() || static_cast<std::size_t>(g_L.size()) != cluster.size() ||
      g_L.size() == 0)
    fail(ErrorKind::Shape, "moment series, weights and cluster ids must be nonempty with equal length");
  const Eigen::VectorXd wt = unit_mean_weights(w);
  const double n = static_cast<double>(g_L.size());
  const double mL = g_L.dot(wt) / n, mU = g_U.dot(wt) / n;
  std::map<std::int64_t, Eigen::Vector2d> sums;
  for (Eigen::Index i = 0; i < g_L.size(); ++i) {
    auto it = sums.try_emplace(cluster[static_cast<std::size_t>(i)], Eigen::Vector2d::Zero()).first;
    it->second += wt(i) * Eigen::Vector2d(g_L(i) - mL, g_U(i) - mU);
  }
  Eigen::Matrix2d V = Eigen::Matrix2d::Zero();
  for (const auto& [id, s] : sums) V += s * s.transpose();
  return V / static_cast<double>(sums.size());
}

ConfidenceRegion set_confidence_region(const BoundsEstimate& est, double level) {
  check_level(level);
  const double z = two_sided_z(level);
  ConfidenceRegion r;
  r.kind = RegionKind::Set;
  r.level = level;
  r.critical_lower = r.critical_upper = z;
  r.lower = est.beta_L - z * est.se_L();
  r.upper = est.beta_U + z * est.se_U();
  return r;
}

double im_critical_value(double delta, double level) {
  check_level(level);
  if (std::isinf(delta)) return normal_quantile(level);
  double lo = 0.0, hi = 20.0;
  for (int it = 0; it < 300 && hi - lo > 1e-12; ++it) {
    const double c = 0.5 * (lo + hi);
    (normal_cdf(c + delta) - normal_cdf(-c) >= level ? hi : lo) = c;
  }
  return 0.5 * (lo + hi);
}

ConfidenceRegion im_interval(const BoundsEstimate& est, double level) {
  const double sL = est.se_L(), sU = est.se_U();
  const double smax = std::max(sL, sU);
  const double width = std::max(est.beta_U - est.beta_L, 0.0);
  double delta;
  if (smax > 0)
    delta = width / smax;  // sqrt(n) (U - L) / sigma = (U - L) / se
  else
    delta = width > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  ConfidenceRegion r;
  r.kind = RegionKind::ImbensManski;
  r.level = level;
  const double c = im_critical_value(delta, level);
  r.critical_lower = r.critical_upper = c;
  r.lower = est.beta_L - c * sL;
  r.upper = est.beta_U + c * sU;
  return r;
}

ConfidenceRegion stoye_interval(const BoundsEstimate& est, double level) {
  check_level(level);
  const double sL = est.se_L(), sU = est.se_U();
  const double width = std::max(est.beta_U - est.beta_L, 0.0);
  auto standardized = [&](double s) {
    if (width == 0.0) return 0.0;
    return s > 0 ? width / s : std::numeric_limits<double>::infinity();
  };
  const double dL = standardized(sL), dU = standardized(sU);
  ConfidenceRegion r;
  r.kind = RegionKind::Stoye;
  r.level = level;
  auto cost = [&](double cL) { return sL * cL + sU * stoye_cu(cL, dL, dU, level); };
  double a = normal_quantile(level) - (std::isfinite(dL) ? dL : 40.0), b = 12.0;
  a = std::max(a, -40.0);
  // Coarse scan followed by golden-section refinement.
  const int grid = 400;
  double best = a, best_cost = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid; ++k) {
    const double cL = a + (b - a) * k / grid;
    const double v = cost(cL);
    if (v < best_cost) {
      best_cost = v;
      best = cL;
    }
  }
  double lo = std::max(a, best - (b - a) / grid), hi = std::min(b, best + (b - a) / grid);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    if (cost(x1) <= cost(x2))
      hi = x2;
    else
      lo = x1;
  }
  double cL = 0.5 * (lo + hi);
  if (cost(cL) > best_cost) cL = best;
  const double cU = stoye_cu(cL, dL, dU, level);
  r.critical_lower = cL;
  r.critical_upper = cU;
  r.lower = est.beta_L - cL * sL;
  r.upper = est.beta_U + cU * sU;
  if (r.lower > r.upper) r.empty = true;
  return r;
}

double upper_median(std::vector<double> v) {
  if (v.empty()) fail(ErrorKind::Parameter, "median of an empty list");
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

double lower_median(std::vector<double> v) {
  if (v.empty()) fail(ErrorKind::Parameter, "median of an empty list");
  std::sort(v.begin(), v.end());
  return v[(v.size() + 1) / 2 - 1];
}

double median(std::vector<double> v) {
  if (v.empty()) fail(ErrorKind::Parameter, "median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SplitAggregate aggregate_splits(const std::vector<SplitEstimate>& splits, double alpha) {
  if (splits.empty()) fail(ErrorKind::Parameter, "no split estimates to aggregate");
  if (!(alpha > 0.0 && alpha < 0.5)) fail(ErrorKind::Parameter, "alpha must lie in (0, 0.5)");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<double> L, U, LA, UA;
  for (const auto& s : splits) {
    const double root = std::sqrt(static_cast<double>(s.n_main));
    L.push_back(s.beta_L);
    U.push_back(s.beta_U);
    LA.push_back(s.beta_L - z * s.sd_L / root);
    UA.push_back(s.beta_U + z * s.sd_U / root);
  }
  SplitAggregate out;
  out.beta_L = median(L);
  out.beta_U = median(U);
  out.region.kind = RegionKind::Variational;
  out.region.level = 1.0 - 2.0 * alpha;
  out.region.critical_lower = out.region.critical_upper = z;
  out.region.lower = upper_median(LA);
  out.region.upper = lower_median(UA);
  out.region.empty = out.region.lower > out.region.upper;
  return out;
}

std::vector<SplitEstimate> agnostic_splits(const Dataset& data, int n_splits, double aux_fraction,
                                           const CrossfitOptions& opt, std::uint64_t seed) {
  if (n_splits < 1) fail(ErrorKind::Parameter, "at least one split is required");
  std::vector<SplitEstimate> out(static_cast<std::size_t>(n_splits));
  parallel_for(out.size(), opt.threads, [&](std::size_t s) {
    const std::uint64_t sseed = mix_seed(seed, 0x73706c6974ULL, s);
    auto [aux, main] = split_auxiliary(data, aux_fraction, sseed);
    CrossfitOptions inner = opt;
    inner.threads = 1;
    const BoundsEstimate est = fit_and_evaluate(aux, main, inner);
    SplitEstimate& r = out[s];
    r.beta_L = est.beta_L;
    r.beta_U = est.beta_U;
    r.n_main = main.n();
    r.sd_L = est.se_L() * std::sqrt(static_cast<double>(r.n_main));
    r.sd_U = est.se_U() * std::sqrt(static_cast<double>(r.n_main));
    r.seed = sseed;
  });
  return out;
}

}  // namespace leebounds
