// Acceptance checks. Usage: acceptance [criterion ...]; no argument runs all.
// Each criterion prints one PASS/FAIL line; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../common/oracles.hpp"
#include "leebounds/bounds.hpp"
#include "leebounds/errors.hpp"
#include "leebounds/first_stage.hpp"
#include "leebounds/inference.hpp"
#include "leebounds/monotonicity.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/simulation.hpp"
#include "leebounds/solvers.hpp"
#include "leebounds/support.hpp"
#include "leebounds/trimreg.hpp"

using namespace leebounds;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0, double g = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e, g);
  return buf;
}

std::vector<std::size_t> all_rows(const Dataset& d) {
  std::vector<std::size_t> r(d.n());
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

// Scalar design without covariates: selection 0.5 (control) and 0.8 (treated).
Dataset scalar_design(std::size_t n, std::uint64_t seed, double s0 = 0.5, double s1 = 0.8) {
  Rng rng(seed);
  const auto m = static_cast<Eigen::Index>(n);
  VectorXi D(m), S(m);
  MatrixXd Y(m, 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    D(i) = rng.bernoulli(0.5);
    S(i) = rng.bernoulli(D(i) ? s1 : s0);
    Y(i, 0) = S(i) ? 1.0 + 0.5 * D(i) + rng.normal() : NAN;
  }
  return make_dataset(D, S, Y, MatrixXd::Ones(m, 1));
}

// 1. Orthogonal bounds with the sample-analog nuisance on degenerate covariates.
Outcome c1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto data = scalar_design(1000, seed);
    const auto basic = basic_bounds(data);
    const auto orth = bounds_from_nuisance(data, constant_nuisance(data), sample_propensity(data));
    worst = std::max({worst, std::abs(orth.beta_L - basic.beta_L), std::abs(orth.beta_U - basic.beta_U)});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-10 && secs < 1.0, fmt("max |orthogonal - basic| = %.3g (need <= 1e-10), %.2f s", worst, secs)};
}

// 2. Neyman orthogonality at the true nuisance of the simulation design.
Outcome c2() {
  const auto t0 = std::chrono::steady_clock::now();
  DgpConfig cfg;
  const std::size_t n = 20000;
  const auto data = draw_sample(cfg, n, 2024);
  const auto truth = oracle_bounds(cfg);
  MomentContext ctx{cfg.pi, truth.mu10_help, truth.mu11_hurt};
  const auto cells = true_cells(data);
  const auto ct = cell_truth(cfg);
  const double sigma = cfg.sigma;

  // Row nuisance with perturbations of the quantile function (shift) or of s(0,x), s(1,x).
  auto nuisance = [&](std::size_t i, int component, double eps) {
    const auto& t = ct[static_cast<std::size_t>(cells[i])];
    double s0 = t.s0, s1 = t.s1;
    if (component == 1) s0 += eps;
    if (component == 2) s1 += eps;
    const double shift = component == 0 ? eps : 0.0;
    auto q = [&](int, double u) { return t.mean + sigma * oracle::Phi_inv(u) + shift; };
    RowNuisance xi = make_row_nuisance(s0, s1, q);
    xi.region = t.region;
    return xi;
  };
  // Population mean of m for a perturbed nuisance, from truncated normal moments.
  auto population_m = [&](int component, double eps, MomentSide side) {
    double total = 0.0;
    for (const auto& t : ct) {
      double s0 = t.s0, s1 = t.s1;
      if (component == 1) s0 += eps;
      if (component == 2) s1 += eps;
      const double shift = component == 0 ? eps : 0.0;
      const bool upper = side == MomentSide::Upper;
      auto partial = [&](double q, bool above) {
        // E[Y 1{Y >= q}] or E[Y 1{Y <= q}] for Y ~ N(mean, sigma^2).
        const double z = (q - t.mean) / sigma;
        return above ? t.mean * (1 - oracle::Phi(z)) + sigma * oracle::phi(z)
                     : t.mean * oracle::Phi(z) - sigma * oracle::phi(z);
      };
      double v;
      if (t.region == Region::Help) {
        const double p = s0 / s1;
        const double q = t.mean + sigma * oracle::Phi_inv(upper ? 1 - p : p) + shift;
        v = (t.s1 * partial(q, upper) - t.s0 * t.mean) / truth.mu10_help;
      } else {
        const double p = s0 / s1;
        const double q = t.mean + sigma * oracle::Phi_inv(upper ? 1 / p : 1 - 1 / p) + shift;
        v = (t.s1 * t.mean - t.s0 * partial(q, !upper)) / truth.mu11_hurt;
      }
      total += t.prob * v;
    }
    return total;
  };

  bool ok = true;
  std::ostringstream os;
  double worst_g = 0.0, worst_m = 1e9;
  for (int comp = 0; comp < 3; ++comp) {
    for (auto side : {MomentSide::Lower, MomentSide::Upper}) {
      const double h = 1e-6;
      const double c_h = std::abs(population_m(comp, h, side) - population_m(comp, -h, side)) / (2 * h);
      for (double eps : {1e-2, 1e-3}) {
        VectorXd dg(static_cast<Eigen::Index>(n)), dm(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
          const auto x0 = nuisance(i, comp, 0.0), x1 = nuisance(i, comp, eps);
          const int d = data.d(i), s = data.s(i);
          const double y = data.y(i);
          dg(static_cast<Eigen::Index>(i)) = moment_g(d, s, y, x1, ctx, side) - moment_g(d, s, y, x0, ctx, side);
          dm(static_cast<Eigen::Index>(i)) = moment_m(d, s, y, x1, ctx, side) - moment_m(d, s, y, x0, ctx, side);
        }
        const double mg = dg.mean(), mm = dm.mean();
        const double se = std::sqrt((dg.array() - mg).square().mean() / static_cast<double>(n));
        const bool pg = std::abs(mg) <= 5 * eps * eps + 4 * se;
        const bool pm = std::abs(mm) >= 0.5 * c_h * eps;
        worst_g = std::max(worst_g, std::abs(mg) / (5 * eps * eps + 4 * se));
        worst_m = std::min(worst_m, std::abs(mm) / (0.5 * c_h * eps));
        if (!pg || !pm) {
          ok = false;
          os << " [component " << comp << (side == MomentSide::Upper ? " upper" : " lower") << " eps " << eps
             << ": |dg| " << std::abs(mg) << " se " << se << " |dm| " << std::abs(mm) << " c_h " << c_h << "]";
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ok = ok && secs < 30.0;
  return {ok, fmt("max |dg|/(5e^2+4SE) = %.3f (need <= 1), min |dm|/(0.5 c_h e) = %.3f (need >= 1), %.1f s", worst_g,
                  worst_m, secs) +
                  os.str()};
}

// 3. Reduced-scale simulation table.
Outcome c3() {
  const auto t0 = std::chrono::steady_clock::now();
  DgpConfig cfg;
  McOptions opt;
  const auto rep = run_monte_carlo(cfg, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << format_mc_table(rep);
  const McMethodSummary *oracle_m = nullptr, *basic = nullptr, *better = nullptr;
  for (const auto& m : rep.methods) {
    if (m.method == McMethod::Oracle) oracle_m = &m;
    if (m.method == McMethod::Basic) basic = &m;
    if (m.method == McMethod::Better) better = &m;
  }
  const bool oc = oracle_m->coverage_L >= 0.92 && oracle_m->coverage_L <= 0.97 && oracle_m->coverage_U >= 0.92 &&
                  oracle_m->coverage_U <= 0.97;
  const bool bc = better->coverage_L >= 0.85 && better->coverage_U >= 0.90;
  const bool bias = std::abs(better->bias_L) <= std::abs(basic->bias_L) && std::abs(better->bias_U) <= std::abs(basic->bias_U);
  const bool done = better->completed == opt.runs && oracle_m->completed == opt.runs && basic->completed == opt.runs;
  return {oc && bc && bias && done && secs < 900.0,
          fmt("oracle coverage (%.3f, %.3f) in [0.92, 0.97]; better coverage (%.3f, %.3f) vs (0.85, 0.90); ",
              oracle_m->coverage_L, oracle_m->coverage_U, better->coverage_L, better->coverage_U) +
              fmt("|bias| better (%.4f, %.4f) vs basic (%.4f, %.4f); %.0f s", std::abs(better->bias_L),
                  std::abs(better->bias_U), std::abs(basic->bias_L), std::abs(basic->bias_U), secs)};
}

// 4. Analytic oracle against quadrature on random designs.
Outcome c4() {
  Rng rng(404);
  double worst = 0.0;
  bool zero_ok = true;
  for (int k = 0; k < 10; ++k) {
    DgpConfig cfg;
    for (auto& a : cfg.alpha) a = rng.normal();
    for (auto& g : cfg.gamma) g = 1.5 * rng.normal();
    cfg.kappa = {rng.normal(), rng.normal()};
    cfg.sigma = 0.1 + rng.uniform();
    double tot = 0.0;
    for (auto& p : cfg.cell_prob) tot += (p = 0.1 + rng.uniform());
    for (auto& p : cfg.cell_prob) p /= tot;
    const auto o = oracle_bounds(cfg);
    const auto q = oracle::dgp_bounds(cfg.alpha, cfg.gamma, cfg.cell_prob, cfg.sigma, 10000000);
    worst = std::max({worst, std::abs(o.beta_L - q.L), std::abs(o.beta_U - q.U)});
    cfg.gamma = {0.0, 0.0, 0.0};
    const auto z = oracle_bounds(cfg);
    zero_ok = zero_ok && z.beta_L == 0.0 && z.beta_U == 0.0;
  }
  return {worst <= 1e-6 && zero_ok,
          fmt("max |analytic - quadrature| = %.3g over 10 designs (need <= 1e-6); gamma = 0 exact zeros: ", worst) +
              (zero_ok ? "yes" : "no")};
}

// 5. Self-normalized critical values.
Outcome c5() {
  const double a = sn_critical_value(2, 0.05, 9145), b = sn_critical_value(2, 0.01, 9145);
  return {std::abs(a - 1.960) <= 0.001 && std::abs(b - 2.577) <= 0.001,
          fmt("c(0.05) = %.4f (1.960), c(0.01) = %.4f (2.577)", a, b)};
}

// Two equally likely cells, control selection 0.3 in both, treatment rate s1[c].
Dataset mono_design(std::size_t n, const double s1[2], std::uint64_t seed, std::vector<int>& cells) {
  Rng rng(seed);
  const auto m = static_cast<Eigen::Index>(n);
  VectorXi D(m), S(m);
  MatrixXd Y(m, 1), X(m, 2);
  cells.assign(n, 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int c = rng.bernoulli(0.5);
    D(i) = rng.bernoulli(0.5);
    S(i) = rng.bernoulli(D(i) ? s1[c] : 0.3);
    Y(i, 0) = S(i) ? rng.normal() : NAN;
    X(i, 0) = 1.0;
    X(i, 1) = c;
    cells[static_cast<std::size_t>(i)] = c;
  }
  return make_dataset(D, S, Y, X);
}

// 6. Monotonicity test size and power.
Outcome c6() {
  const double null_s1[2] = {0.3, 0.3}, alt_s1[2] = {0.3, 0.2};
  int size_rej = 0, power_rej = 0;
  for (int r = 0; r < 1000; ++r) {
    std::vector<int> cells;
    const auto d = mono_design(2000, null_s1, 6000 + static_cast<std::uint64_t>(r), cells);
    size_rej += test_monotonicity(d, cells, Direction::NonNegative).reject_05;
  }
  for (int r = 0; r < 500; ++r) {
    std::vector<int> cells;
    const auto d = mono_design(5000, alt_s1, 9000 + static_cast<std::uint64_t>(r), cells);
    power_rej += test_monotonicity(d, cells, Direction::NonNegative).reject_05;
  }
  const double size = size_rej / 1000.0, power = power_rej / 500.0;
  return {size <= 0.06 && power >= 0.95, fmt("size %.3f (<= 0.06), power %.3f (>= 0.95)", size, power)};
}

// 7. Calibration of the first-stage quantile grid on a Gaussian location model.
Outcome c7() {
  const int n = 5000;
  Rng rng(77);
  VectorXi D(n), S(n);
  MatrixXd Y(n, 1), X(n, 4);
  for (int i = 0; i < n; ++i) {
    D(i) = 1;
    S(i) = 1;
    X(i, 0) = 1.0;
    for (int j = 1; j < 4; ++j) X(i, j) = rng.normal();
    Y(i, 0) = 0.5 + 0.8 * X(i, 1) - 0.4 * X(i, 2) + 0.7 * rng.normal();
  }
  // The control arm is required by the fit; it mirrors the treated design.
  VectorXi D2(2 * n), S2(2 * n);
  MatrixXd Y2(2 * n, 1), X2(2 * n, 4);
  D2 << D, VectorXi::Zero(n);
  S2 << S, S;
  Y2 << Y, Y;
  X2 << X, X;
  const auto data = make_dataset(D2, S2, Y2, X2);
  FirstStageOptions opt;
  const auto grid = fit_quantile_grid(data, data.outcome.col(0), all_rows(data), opt);
  bool ok = true;
  std::string detail;
  for (double u : {0.1, 0.5, 0.9}) {
    double share = 0.0;
    for (int i = 0; i < n; ++i) share += Y(i, 0) <= grid.at_level(1, data.covariates.row(i), u);
    share /= n;
    const double tol = 3 * std::sqrt(u * (1 - u) / n);
    ok = ok && std::abs(share - u) <= tol;
    detail += fmt("u=%.1f share %.4f (tol %.4f); ", u, share, tol);
  }
  return {ok, detail};
}

// 8. Lasso-logistic support recovery with the default penalty.
Outcome c8() {
  const int n = 2000, p = 200, s = 5, runs = 50;
  int recovered = 0;
  for (int r = 0; r < runs; ++r) {
    Rng rng(800 + static_cast<std::uint64_t>(r));
    MatrixXd X(n, p + 1);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      double eta = 0.2;
      for (int j = 1; j <= p; ++j) {
        X(i, j) = rng.normal();
        if (j <= s) eta += (j % 2 ? 1.0 : -1.0) * X(i, j);
      }
      y(i) = rng.bernoulli(logistic(eta));
    }
    const auto pen = default_penalty(PenaltyKind::Logistic, n, p + 1);
    const auto fit = fit_lasso_logistic(X, y, VectorXd::Ones(n), pen);
    bool all = true;
    for (int j = 1; j <= s; ++j) all = all && fit.coefficients(j) != 0.0;
    recovered += all;
  }
  const double rate = recovered / static_cast<double>(runs);
  return {rate >= 0.9, fmt("true support contained in the selection in %.0f%% of %.0f runs (need >= 90%%)", 100 * rate, runs)};
}

// 9. Support function properties.
Outcome c9() {
  DgpConfig cfg;
  cfg.n_noise = 6;
  CrossfitOptions opt;
  const auto d1 = draw_sample(cfg, 3000, 901);
  const auto est = crossfit_bounds(d1, opt);
  const auto c1d = support_estimate(d1, default_grid(1), opt);
  const double e1 = std::max(std::abs(c1d.sigma(0) - est.beta_U), std::abs(c1d.sigma(1) + est.beta_L));

  // Two outcomes: Y and a noisy rescaled copy.
  const std::size_t n = 5000;
  auto base = draw_sample(cfg, n, 902);
  Rng rng(903);
  MatrixXd Y(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Y(ii, 0) = base.outcome(ii, 0);
    Y(ii, 1) = 0.5 * base.outcome(ii, 0) + 0.2 * rng.normal() + 0.1 * base.d(i);
  }
  const auto d2 = make_dataset(base.treatment, base.selection, Y, base.covariates);
  auto curve = support_estimate(d2, default_grid(2, 16), opt);
  double worst_width = 1e9;
  const Eigen::Index m = curve.sigma.size();
  for (Eigen::Index k = 0; k < m / 2; ++k) {
    // Joint SE of the antipodal sum from the linearized series.
    const VectorXd s = curve.series.col(k) + curve.series.col(k + m / 2);
    const double sd = std::sqrt((s.array() - s.mean()).square().mean());
    const double joint = sd / std::sqrt(static_cast<double>(n));
    worst_width = std::min(worst_width, (curve.sigma(k) + curve.sigma(k + m / 2)) / joint);
  }
  weighted_bootstrap(curve, 500, 904);
  double lo = 1e9, hi = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto col = curve.bootstrap.col(k);
    const double sd = std::sqrt((col.array() - col.mean()).square().mean());
    lo = std::min(lo, sd / curve.se(k));
    hi = std::max(hi, sd / curve.se(k));
  }
  const bool ok = e1 <= 1e-10 && worst_width >= -3.0 && lo >= 0.8 && hi <= 1.25;
  return {ok, fmt("d=1 max gap %.3g; min antipodal width %.2f joint SE (>= -3); bootstrap SD / SE in [%.3f, %.3f]", e1,
                  worst_width, lo, hi)};
}

SupportCurve circle_curve(const DirectionGrid& grid, const Eigen::Vector2d& center, double r) {
  SupportCurve c;
  c.grid = grid;
  c.sigma.resize(static_cast<Eigen::Index>(grid.size()));
  c.se = VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t k = 0; k < grid.size(); ++k) c.sigma(static_cast<Eigen::Index>(k)) = grid[k].dot(center) + r;
  return c;
}

// 10. Best circle: exact recovery and rotation invariance.
Outcome c10() {
  const Eigen::Vector2d center(1.0, 2.0);
  const auto fit = best_circle(circle_curve(default_grid(2, 8), center, 3.0));
  const double err = std::max({std::abs(fit.center(0) - 1.0), std::abs(fit.center(1) - 2.0), std::abs(fit.radius - 3.0)});
  // A non-circular set: support function of a segment plus a disc, before and after rotation.
  const double th = 1.1;
  Eigen::Matrix2d R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const Eigen::Vector2d a(0.4, -0.2), b(-0.3, 0.5);
  SupportCurve s0, s1;
  for (const auto& q : default_grid(2, 24)) {
    s0.grid.push_back(q);
    s1.grid.push_back(R * q);
  }
  s0.sigma.resize(24);
  s1.sigma.resize(24);
  s0.se = s1.se = VectorXd::Zero(24);
  for (int k = 0; k < 24; ++k) {
    const auto& q = s0.grid[static_cast<std::size_t>(k)];
    s0.sigma(k) = std::max(q.dot(a), q.dot(b)) + 0.7;
    const auto& r = s1.grid[static_cast<std::size_t>(k)];
    s1.sigma(k) = std::max(r.dot(R * a), r.dot(R * b)) + 0.7;
  }
  const double rot = std::abs(best_circle(s0).radius - best_circle(s1).radius);
  return {err <= 1e-8 && rot <= 1e-8, fmt("exact circle error %.3g; rotation change in radius %.3g (need <= 1e-8)", err, rot)};
}

// 11. Inference nesting.
Outcome c11() {
  Rng rng(1100);
  const double z1 = oracle::Phi_inv(0.95), z2 = oracle::Phi_inv(0.975);
  int outside = 0, stoye_bad = 0;
  for (int k = 0; k < 1000; ++k) {
    BoundsEstimate est;
    est.beta_L = rng.normal();
    est.beta_U = est.beta_L + std::abs(rng.normal()) * rng.uniform();
    est.n = est.n_units = 100 + rng.index(5000);
    est.n_scale = static_cast<double>(est.n);
    const double sl = 0.05 + 2 * rng.uniform(), su = 0.05 + 2 * rng.uniform();
    est.omega << sl * sl, 0, 0, su * su;
    const auto im = im_interval(est, 0.95);
    if (im.critical_lower < z1 - 1e-9 || im.critical_lower > z2 + 1e-9) ++outside;
    BoundsEstimate raw = est;
    if (rng.bernoulli(0.5)) std::swap(raw.beta_L, raw.beta_U);
    const auto st = stoye_interval(raw, 0.95);
    if (st.empty != (st.lower > st.upper)) ++stoye_bad;
  }
  VectorXd gl(300), gu(300), w(300);
  std::vector<std::int64_t> cl(300);
  for (int i = 0; i < 300; ++i) {
    gl(i) = rng.normal();
    gu(i) = rng.normal() + gl(i);
    w(i) = 0.2 + rng.uniform();
    cl[static_cast<std::size_t>(i)] = 7 * i + 3;
  }
  const double diff = (cluster_variance(gl, gu, cl, w) - variance_matrix(gl, gu, w)).cwiseAbs().maxCoeff();
  // An inverted pair with tiny standard errors yields an empty Stoye interval.
  BoundsEstimate inv;
  inv.beta_L = 1.0;
  inv.beta_U = -1.0;
  inv.n = inv.n_units = 100;
  inv.n_scale = 100;
  inv.omega << 1e-4, 0, 0, 1e-4;
  const bool inv_empty = stoye_interval(inv, 0.95).empty;
  return {outside == 0 && diff <= 1e-12 && stoye_bad == 0 && inv_empty,
          fmt("IM c outside [z_.95, z_.975]: %.0f of 1000; singleton cluster gap %.3g; Stoye emptiness mismatches %.0f",
              outside, diff, stoye_bad) +
              (inv_empty ? "; inverted bounds give empty" : "; inverted bounds not empty")};
}

// 12. Trimmed regressions.
Outcome c12() {
  double gap_basic = 0.0, gap_late = 0.0, worst_share = 0.0;
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const auto data = scalar_design(800, 1200 + seed, seed % 2 ? 0.5 : 0.85, seed % 2 ? 0.8 : 0.55);
    const std::vector<int> one(data.n(), 0);
    const auto basic = basic_bounds(data);
    const auto itt = itt_bounds(data, one, TrimRegOptions{0});
    gap_basic = std::max({gap_basic, std::abs(itt.lower.coef - basic.beta_L), std::abs(itt.upper.coef - basic.beta_U)});
  }
  // Several strata with their own selection rates.
  Rng rng(1250);
  const int n = 3000;
  VectorXi D(n), S(n);
  MatrixXd Y(n, 1);
  std::vector<int> strata(n);
  const double rates[3][2] = {{0.5, 0.8}, {0.9, 0.6}, {0.7, 0.75}};
  for (int i = 0; i < n; ++i) {
    const int j = static_cast<int>(rng.index(3));
    strata[static_cast<std::size_t>(i)] = j;
    D(i) = rng.bernoulli(0.5);
    S(i) = rng.bernoulli(rates[j][D(i)]);
    Y(i, 0) = S(i) ? j + 0.2 * D(i) + rng.normal() : NAN;
  }
  auto data = make_dataset(D, S, Y, MatrixXd::Ones(n, 1));
  for (auto side : {MomentSide::Lower, MomentSide::Upper}) {
    const auto t = trim_itt(data, strata, side);
    const auto sh = response_shares(data, strata, t, false);
    for (int j = 0; j < 3; ++j) {
      double nj[2] = {0, 0};
      for (int i = 0; i < n; ++i)
        if (strata[static_cast<std::size_t>(i)] == j) nj[D(i)] += 1;
      // One row of the trimmed arm is the finest step the share can take.
      const int arm = t.p[static_cast<std::size_t>(j)] <= 1.0 ? 1 : 0;
      worst_share = std::max(worst_share, std::abs(sh[static_cast<std::size_t>(j)][0] - sh[static_cast<std::size_t>(j)][1]) * nj[arm]);
    }
  }
  data.instrument = data.treatment;
  const auto itt = itt_bounds(data, strata, TrimRegOptions{0});
  const auto late = late_bounds(data, strata, TrimRegOptions{0});
  gap_late = std::max(std::abs(itt.lower.coef - late.lower.coef), std::abs(itt.upper.coef - late.upper.coef));

  // Randomized binary trimming: expected response-rate gap over 500 replications. Both outcome
  // values carry more mass than the trimmed share in every stratum, so no drop probability is capped.
  VectorXi Db(n), Sb(n);
  MatrixXd Yb(n, 1);
  for (int i = 0; i < n; ++i) {
    const int j = strata[static_cast<std::size_t>(i)];
    Db(i) = D(i);
    Sb(i) = S(i);
    Yb(i, 0) = S(i) ? static_cast<double>(rng.bernoulli(0.45 + 0.05 * j)) : NAN;
  }
  const auto bin = make_dataset(Db, Sb, Yb, MatrixXd::Ones(n, 1));
  bool rand_ok = true;
  std::string rand_detail;
  for (auto side : {MomentSide::Lower, MomentSide::Upper}) {
    std::vector<std::vector<double>> gaps(3);
    for (int r = 0; r < 500; ++r) {
      const auto t = binary_randomized_trim(bin, strata, side, 5000 + static_cast<std::uint64_t>(r));
      const auto sh = response_shares(bin, strata, t, false);
      for (int j = 0; j < 3; ++j) gaps[static_cast<std::size_t>(j)].push_back(sh[static_cast<std::size_t>(j)][1] - sh[static_cast<std::size_t>(j)][0]);
    }
    for (const auto& g : gaps) {
      const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
      double v = 0.0;
      for (double x : g) v += (x - mean) * (x - mean) / static_cast<double>(g.size());
      const double mc_se = std::sqrt(v / static_cast<double>(g.size()));
      rand_ok = rand_ok && std::abs(mean) <= 2 * mc_se;
      rand_detail += fmt("%.2f ", std::abs(mean) / mc_se);
    }
  }
  const bool ok = gap_basic <= 1e-10 && worst_share <= 1.0 + 1e-9 && gap_late <= 1e-10 && rand_ok;
  return {ok, fmt("single stratum vs basic %.3g; share gap %.3f rows of the trimmed arm (<= 1); LATE(Z=D) vs ITT %.3g; ",
                  gap_basic, worst_share, gap_late) +
                  "randomized gap / MC SE per stratum and side: " + rand_detail + "(<= 2)"};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 13. Every CLI command twice with the same config and seed.
Outcome c13() {
  const std::string dir = "/tmp/leebounds_acceptance";
  std::system(("mkdir -p " + dir).c_str());
  DgpConfig cfg;
  cfg.n_noise = 4;
  auto base = draw_sample(cfg, 1500, 1301);
  write_csv(dir + "/one.csv", base);
  // Second outcome, a cluster id and an instrument equal to treatment for LATE.
  MatrixXd Y(static_cast<Eigen::Index>(base.n()), 2);
  std::vector<std::int64_t> cluster(base.n());
  for (std::size_t i = 0; i < base.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Y(ii, 0) = base.outcome(ii, 0);
    Y(ii, 1) = 0.5 * base.outcome(ii, 0) + 0.1 * base.d(i);
    cluster[i] = static_cast<std::int64_t>(i / 3);
  }
  auto two = make_dataset(base.treatment, base.selection, Y, base.covariates, base.weight, cluster,
                          base.covariate_names, {"Y", "Y2"});
  two.instrument = two.treatment;
  write_csv(dir + "/two.csv", two);

  const std::string cli = LEEBOUNDS_CLI_PATH;
  const std::vector<std::string> commands = {
      "estimate --data " + dir + "/one.csv --cells X1 X2 --splits 3 --seed 7",
      "test-monotonicity --data " + dir + "/one.csv --cells X1 X2",
      "simulate --runs 4 --n 600 --seed 3",
      "support --data " + dir + "/two.csv --outcome Y Y2 --cluster cluster --covariates X1 X2 Z1 Z2 --grid-size 16 "
      "--bootstrap 100 --growth --zeta 1 2 --circle --seed 5",
      "trimreg --data " + dir + "/two.csv --outcome Y --covariates X1 X2 --strata X1 X2 --instrument Z --late "
      "--cluster cluster --trim-bootstrap 50 --seed 9",
  };
  bool ok = true;
  int idx = 0;
  std::string detail;
  for (const auto& c : commands) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      const std::string out = dir + "/report_" + std::to_string(idx) + "_" + std::to_string(rep) + ".json";
      const std::string csv = dir + "/table_" + std::to_string(idx) + "_" + std::to_string(rep) + ".csv";
      const std::string text = dir + "/table_" + std::to_string(idx) + "_" + std::to_string(rep) + ".txt";
      const int rc = std::system((cli + " " + c + " --out " + out + " --csv " + csv + " --text " + text + " 2>/dev/null").c_str());
      const std::string body = slurp(out) + slurp(csv) + slurp(text);
      if (rc != 0 || body.empty()) {
        ok = false;
        detail += "command " + std::to_string(idx) + " failed; ";
      }
      if (rep == 0)
        first = body;
      else if (body != first) {
        ok = false;
        detail += "command " + std::to_string(idx) + " differs; ";
      }
    }
    ++idx;
  }
  return {ok, detail.empty() ? "5 commands produced byte-identical reports on rerun" : detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"scalar reduction identity", c1},  {"orthogonality", c2},       {"simulation table", c3},
      {"oracle correctness", c4},         {"critical values", c5},     {"monotonicity size and power", c6},
      {"quantile calibration", c7},       {"lasso support recovery", c8}, {"support function", c9},
      {"best circle", c10},               {"inference nesting", c11},  {"trimmed regressions", c12},
      {"CLI determinism", c13},
  };
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) which.push_back(i);
  int failures = 0;
  for (int k : which) {
    if (k < 1 || k > static_cast<int>(criteria.size())) {
      std::cerr << "unknown criterion " << k << "\n";
      return 2;
    }
    const auto& [name, fn] = criteria[static_cast<std::size_t>(k - 1)];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << name << "): " << o.detail << std::endl;
    failures += !o.pass;
  }
  return failures;
}
