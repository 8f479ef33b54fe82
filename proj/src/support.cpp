#include "leebounds/support.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/solvers.hpp"

namespace leebounds {

DirectionGrid default_grid(int d, int m) {
  DirectionGrid g;
  if (d == 1) {
    g.push_back(Eigen::VectorXd::Constant(1, 1.0));
    g.push_back(Eigen::VectorXd::Constant(1, -1.0));
    return g;
  }
  if (d != 2) fail(ErrorKind::Parameter, "a default grid exists only for d = 1 or 2");
  if (m < 3) fail(ErrorKind::Parameter, "a d = 2 grid needs at least 3 directions");
  for (int k = 0; k < m; ++k) {
    const double a = 2.0 * std::numbers::pi * k / m;
    Eigen::VectorXd q(2);
    q << std::cos(a), std::sin(a);
    g.push_back(q);
  }
  return g;
}

DirectionGrid make_grid(const std::vector<std::vector<double>>& directions) {
  DirectionGrid g;
  for (const auto& v : directions) {
    Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    if (q.size() == 0 || (!g.empty() && q.size() != g.front().size()))
      fail(ErrorKind::Shape, "directions must share one positive dimension");
    const double nq = q.norm();
    if (!(nq > 0)) fail(ErrorKind::Parameter, "zero direction in grid");
    g.push_back(q / nq);
  }
  return g;
}

SupportCurve support_estimate(const Dataset& data, const DirectionGrid& grid, const CrossfitOptions& opt) {
  if (grid.empty()) fail(ErrorKind::Parameter, "empty direction grid");
  const Eigen::Index d = static_cast<Eigen::Index>(data.d_out());
  for (const auto& q : grid) {
    if (q.size() != d) fail(ErrorKind::Shape, "direction dimension differs from the outcome dimension");
    if (std::abs(q.norm() - 1.0) > 1e-12) fail(ErrorKind::Parameter, "grid directions must be unit vectors");
  }
  for (std::size_t i = 0; i < data.n(); ++i) {
    const bool all = data.outcome.row(static_cast<Eigen::Index>(i)).allFinite();
    if (data.s(i) == 1 && !all)
      fail(ErrorKind::Integrity, "row " + std::to_string(i) + " is selected but misses an outcome");
  }
  const std::vector<SelectionFit> selection = crossfit_selection(data, opt);
  const std::size_t m = grid.size();
  SupportCurve curve;
  curve.grid = grid;
  curve.sigma.resize(static_cast<Eigen::Index>(m));
  curve.se.resize(static_cast<Eigen::Index>(m));
  curve.series.resize(static_cast<Eigen::Index>(data.n()), static_cast<Eigen::Index>(m));
  curve.weight = data.weight;
  curve.cluster = data.cluster;
  CrossfitOptions inner = opt;
  inner.threads = 1;
  parallel_for(m, opt.threads, [&](std::size_t k) {
    const Eigen::VectorXd yq = data.outcome * grid[k];
    BoundsEstimate est;
    try {
      est = crossfit_bounds(data, yq, inner, &selection);
    } catch (const Error& e) {
      throw Error(e.kind(), "direction " + std::to_string(k) + ": " + e.what());
    }
    const auto kk = static_cast<Eigen::Index>(k);
    curve.sigma(kk) = est.beta_U;
    curve.se(kk) = est.se_U();
    Eigen::VectorXd h = est.g_U;
    if (est.adj_U.size() == h.size())
      h += (est.adj_U.array() - weighted_mean(est.adj_U, est.weight)).matrix();
    curve.series.col(kk) = h;
  });
  return curve;
}

void weighted_bootstrap(SupportCurve& curve, int B, std::uint64_t seed, double level, int threads) {
  if (B < 1) fail(ErrorKind::Parameter, "bootstrap needs at least one draw");
  if (!(level > 0 && level < 1)) fail(ErrorKind::Parameter, "level must lie in (0,1)");
  const Eigen::Index n = curve.series.rows();
  const Eigen::Index m = curve.series.cols();
  // Clustered data draws one multiplier per cluster.
  std::vector<Eigen::Index> unit(static_cast<std::size_t>(n));
  Eigen::Index units = n;
  if (!curve.cluster.empty()) {
    std::map<std::int64_t, Eigen::Index> id;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto it = id.try_emplace(curve.cluster[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(id.size())).first;
      unit[static_cast<std::size_t>(i)] = it->second;
    }
    units = static_cast<Eigen::Index>(id.size());
  } else {
    for (Eigen::Index i = 0; i < n; ++i) unit[static_cast<std::size_t>(i)] = i;
  }
  curve.bootstrap.resize(B, m);
  std::vector<double> tstat(static_cast<std::size_t>(B), 0.0);
  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    Rng rng(mix_seed(seed, 0x626f6f74ULL, b));
    Eigen::VectorXd e(units);
    for (Eigen::Index u = 0; u < units; ++u) e(u) = rng.exponential();
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = curve.weight(i) * e(unit[static_cast<std::size_t>(i)]);
    const double ws = w.sum();
    const Eigen::RowVectorXd draw = (w.transpose() * curve.series) / ws;
    curve.bootstrap.row(static_cast<Eigen::Index>(b)) = draw;
    double t = 0.0;
    for (Eigen::Index k = 0; k < m; ++k)
      if (curve.se(k) > 0) t = std::max(t, std::abs(draw(k) - curve.sigma(k)) / curve.se(k));
    tstat[b] = t;
  });
  std::sort(tstat.begin(), tstat.end());
  const auto idx = static_cast<std::size_t>(std::ceil(level * B)) - 1;
  curve.band_critical = tstat[std::min(idx, tstat.size() - 1)];
  curve.band_level = level;
}

namespace {

// Index of the grid direction closest to q.
std::size_t nearest(const DirectionGrid& grid, const Eigen::VectorXd& q, double* cosine) {
  std::size_t best = 0;
  double bc = -2.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double c = grid[k].dot(q);
    if (c > bc) {
      bc = c;
      best = k;
    }
  }
  *cosine = bc;
  return best;
}

ProjectionBounds project(const SupportCurve& curve, const Eigen::VectorXd& q, double scale, double angle_tol) {
  if (curve.grid.empty()) fail(ErrorKind::Parameter, "empty support curve");
  if (q.size() != curve.grid.front().size()) fail(ErrorKind::Shape, "direction dimension differs from the grid");
  double cp = 0.0, cm = 0.0;
  const std::size_t kp = nearest(curve.grid, q, &cp);
  const std::size_t km = nearest(curve.grid, -q, &cm);
  const double worst = std::acos(std::clamp(std::min(cp, cm), -1.0, 1.0));
  if (worst > angle_tol) fail(ErrorKind::Parameter, "grid lacks a direction near the requested projection");
  ProjectionBounds out;
  out.direction = q;
  out.approximate = worst > 1e-6;
  out.lower = -scale * curve.sigma(static_cast<Eigen::Index>(km));
  out.upper = scale * curve.sigma(static_cast<Eigen::Index>(kp));
  return out;
}

}  // namespace

ProjectionBounds growth_bounds(const SupportCurve& curve) {
  if (curve.dim() != 2) fail(ErrorKind::Parameter, "growth bounds need a two-dimensional outcome");
  Eigen::VectorXd q(2);
  q << -std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2;
  return project(curve, q, std::numbers::sqrt2, 1e-6);
}

ProjectionBounds ste_bounds(const SupportCurve& curve, const Eigen::VectorXd& zeta, double angle_tol) {
  if (zeta.size() != curve.dim()) fail(ErrorKind::Shape, "one scale per outcome is required");
  if ((zeta.array() <= 0).any()) fail(ErrorKind::Parameter, "outcome scales must be positive");
  const Eigen::VectorXd inv = zeta.cwiseInverse();
  const double c = inv.norm() / static_cast<double>(zeta.size());
  return project(curve, inv / inv.norm(), c, angle_tol);
}

Circle best_circle(const SupportCurve& curve) {
  if (curve.dim() != 2) fail(ErrorKind::Parameter, "best circle needs a two-dimensional outcome");
  const auto m = static_cast<Eigen::Index>(curve.grid.size());
  if (m < 3) fail(ErrorKind::Parameter, "best circle needs at least 3 directions");
  Eigen::MatrixXd X(m, 3);
  for (Eigen::Index k = 0; k < m; ++k) X.row(k) << curve.grid[static_cast<std::size_t>(k)].transpose(), 1.0;
  const FitResult fit = fit_ols(X, curve.sigma, Eigen::VectorXd::Ones(m));
  Circle c;
  c.center = fit.coefficients.head<2>();
  c.radius = fit.coefficients(2);
  c.rss = (curve.sigma - X * fit.coefficients).squaredNorm();
  return c;
}

std::string support_csv(const SupportCurve& curve) {
  std::ostringstream os;
  os.precision(17);
  const int d = curve.dim();
  for (int j = 0; j < d; ++j) os << 'q' << j + 1 << ',';
  os << "sigma,se,band_lower,band_upper\n";
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    for (int j = 0; j < d; ++j) os << curve.grid[k](j) << ',';
    const double h = curve.band_critical * curve.se(kk);
    os << curve.sigma(kk) << ',' << curve.se(kk) << ',';
    if (curve.bootstrap.size() > 0)
      os << curve.sigma(kk) - h << ',' << curve.sigma(kk) + h << '\n';
    else
      os << ",\n";
  }
  return os.str();
}

}  // namespace leebounds
