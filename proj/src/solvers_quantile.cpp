#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/solvers.hpp"

namespace leebounds {

namespace {

constexpr double kStepScale = 0.99995;

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double t = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0) t = std::min(t, -v(i) / dv(i));
  return t;
}

// Frisch-Newton interior point for min sum rho_tau(y - X b), written as the
// bounded primal LP  min c'x  s.t.  X'x = (1-tau) X'1,  0 <= x <= 1,  c = -y,
// whose dual variable is -b.
Eigen::VectorXd frisch_newton(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau, int max_iter,
                              int& iterations, double& rel_gap) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd c = -y;
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 - tau);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, tau);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(X.transpose() * X);
  Eigen::VectorXd yd = ldlt.solve(X.transpose() * c);
  Eigen::VectorXd r = c - X * yd;
  const double bump = 1e-8 * (1.0 + r.cwiseAbs().maxCoeff());
  Eigen::VectorXd z = r.cwiseMax(0.0).array() + bump;
  Eigen::VectorXd w = (-r).cwiseMax(0.0).array() + bump;
  double gap = z.dot(x) + w.dot(s);
  const double scale = 1.0 + y.cwiseAbs().sum();
  iterations = 0;
  Eigen::VectorXd q(n), dx(n), ds(n), dz(n), dw(n), dy(p), rhs(p);
  while (gap > 1e-13 * scale && iterations < max_iter) {
    ++iterations;
    q = (z.cwiseQuotient(x) + w.cwiseQuotient(s)).cwiseInverse();
    r = z - w;
    const Eigen::MatrixXd ada = X.transpose() * q.asDiagonal() * X;
    Eigen::LLT<Eigen::MatrixXd> chol(ada);
    if (chol.info() != Eigen::Success) break;
    // Affine scaling direction.
    rhs = X.transpose() * q.cwiseProduct(r);
    dy = chol.solve(rhs);
    dx = q.cwiseProduct(X * dy - r);
    ds = -dx;
    dz = -z.array() - z.array() * dx.array() / x.array();
    dw = -w.array() + w.array() * dx.array() / s.array();
    double fp = std::min(kStepScale * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
    double fd = std::min(kStepScale * std::min(max_step(z, dz), max_step(w, dw)), 1.0);
    if (std::min(fp, fd) < 1.0) {
      // Mehrotra predictor-corrector step.
      const double g = (x + fp * dx).dot(z + fd * dz) + (s + fp * ds).dot(w + fd * dw);
      const double mu = gap * std::pow(g / gap, 3) / (2.0 * static_cast<double>(n));
      const Eigen::ArrayXd dxdz = dx.array() * dz.array();
      const Eigen::ArrayXd dsdw = ds.array() * dw.array();
      const Eigen::ArrayXd xinv = x.array().inverse();
      const Eigen::ArrayXd sinv = s.array().inverse();
      const Eigen::VectorXd rho = (mu * (xinv - sinv) - r.array() - dxdz * xinv + dsdw * sinv).matrix();
      dy = chol.solve(-(X.transpose() * q.cwiseProduct(rho)));
      dx = q.cwiseProduct(X * dy + rho);
      ds = -dx;
      dz = (mu * xinv - z.array() - xinv * z.array() * dx.array() - dxdz * xinv).matrix();
      dw = (mu * sinv - w.array() - sinv * w.array() * ds.array() - dsdw * sinv).matrix();
      fp = std::min(kStepScale * std::min(max_step(x, dx), max_step(s, ds)), 1.0);
      fd = std::min(kStepScale * std::min(max_step(z, dz), max_step(w, dw)), 1.0);
    }
    x += fp * dx;
    s += fp * ds;
    yd += fd * dy;
    z += fd * dz;
    w += fd * dw;
    gap = z.dot(x) + w.dot(s);
  }
  rel_gap = gap / scale;
  return -yd;
}

// Moves an interior solution to a vertex of the optimal face: interpolate the
// p observations with the smallest absolute residuals (ties broken by index).
Eigen::VectorXd polish_vertex(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
                              const Eigen::VectorXd& b) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::VectorXd r = y - X * b;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index c) { return std::abs(r(a)) < std::abs(r(c)); });
  Eigen::MatrixXd basis(p, p);  // orthonormalized accepted rows
  std::vector<Eigen::Index> chosen;
  for (Eigen::Index idx : order) {
    if (static_cast<Eigen::Index>(chosen.size()) == p) break;
    Eigen::VectorXd v = X.row(idx).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      v -= basis.col(kk).dot(v) * basis.col(kk);
    }
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      v -= basis.col(kk).dot(v) * basis.col(kk);
    }
    const double nv = v.norm();
    if (nv <= 1e-9 * norm0) continue;
    basis.col(static_cast<Eigen::Index>(chosen.size())) = v / nv;
    chosen.push_back(idx);
  }
  if (static_cast<Eigen::Index>(chosen.size()) < p) return b;
  Eigen::MatrixXd Xh(p, p);
  Eigen::VectorXd yh(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    Xh.row(k) = X.row(chosen[static_cast<std::size_t>(k)]);
    yh(k) = y(chosen[static_cast<std::size_t>(k)]);
  }
  const Eigen::VectorXd bh = Xh.partialPivLu().solve(yh);
  if (!bh.allFinite()) return b;
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(n);
  const double f_ip = quantile_objective(X, y, unit, tau, b);
  const double f_v = quantile_objective(X, y, unit, tau, bh);
  return f_v <= f_ip + 1e-9 * std::max(1.0, std::abs(f_ip)) ? bh : b;
}

struct Scaled {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
};

Scaled scale_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (X.rows() != y.size() || (w.size() != 0 && w.size() != y.size()))
    fail(ErrorKind::Shape, "design, response and weights must have the same number of rows");
  Eigen::VectorXd ww = w.size() == 0 ? Eigen::VectorXd::Ones(y.size()) : w;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (ww(i) > 0) rows.push_back(i);
  if (rows.empty()) fail(ErrorKind::InsufficientData, "no rows with positive weight");
  Eigen::VectorXd kept(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) kept(static_cast<Eigen::Index>(k)) = ww(rows[k]);
  kept = unit_mean_weights(kept);
  Scaled s;
  s.X.resize(kept.size(), X.cols());
  s.y.resize(kept.size());
  s.w = kept;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    s.X.row(kk) = kept(kk) * X.row(rows[k]);
    s.y(kk) = kept(kk) * y(rows[k]);
  }
  return s;
}

std::vector<int> support_of(const Eigen::VectorXd& b, double thresh) {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (std::abs(b(j)) > thresh) s.push_back(static_cast<int>(j));
  return s;
}

FitResult solve_scaled(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double u, const SolverOptions& opt) {
  int iters = 0;
  double rel_gap = 0.0;
  Eigen::VectorXd b = frisch_newton(X, y, u, 200, iters, rel_gap);
  if (X.cols() <= 60) b = polish_vertex(X, y, u, b);
  FitResult f;
  f.coefficients = b;
  f.iterations = iters;
  f.converged = b.allFinite() && rel_gap <= 1e-8;
  (void)opt;
  return f;
}

}  // namespace

double check_loss(double r, double u) { return r >= 0 ? u * r : (u - 1.0) * r; }

double quantile_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double u,
                          const Eigen::VectorXd& b) {
  const Eigen::VectorXd r = y - X * b;
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += (w.size() ? w(i) : 1.0) * check_loss(r(i), u);
  return s / static_cast<double>(r.size());
}

Eigen::VectorXd rms_loadings(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  Eigen::VectorXd ww = w.size() == 0 ? Eigen::VectorXd::Ones(X.rows()) : unit_mean_weights(w);
  Eigen::VectorXd rho(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    rho(j) = std::sqrt(X.col(j).cwiseAbs2().dot(ww) / static_cast<double>(X.rows()));
  return rho;
}

FitResult fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double u,
                       const SolverOptions& opt) {
  if (!(u > 0.0 && u < 1.0)) fail(ErrorKind::Parameter, "quantile level must lie in (0,1)");
  const Scaled s = scale_rows(X, y, w);
  if (weighted_rank(s.X, Eigen::VectorXd()) < s.X.cols())
    fail(ErrorKind::Singularity, "quantile regression design is rank deficient");
  FitResult f = solve_scaled(s.X, s.y, u, opt);
  if (!f.converged) fail(ErrorKind::Convergence, "quantile interior point did not converge");
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(s.y.size());
  f.objective = quantile_objective(s.X, s.y, unit, u, f.coefficients);
  f.selected_support = support_of(f.coefficients, 0.0);
  return f;
}

FitResult fit_lasso_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double u,
                             const PenaltySpec& pen, const SolverOptions& opt) {
  if (!(u > 0.0 && u < 1.0)) fail(ErrorKind::Parameter, "quantile level must lie in (0,1)");
  if (pen.lambda < 0) fail(ErrorKind::Parameter, "penalty lambda must be nonnegative");
  if (pen.lambda == 0.0) return fit_quantile(X, y, w, u, opt);
  const Scaled s = scale_rows(X, y, w);
  const Eigen::Index n = s.X.rows();
  const Eigen::Index p = s.X.cols();
  Eigen::VectorXd rho = pen.loadings.size() ? pen.loadings : rms_loadings(X, w);
  if (rho.size() != p) fail(ErrorKind::Parameter, "penalty loadings length mismatch");
  std::vector<char> penalized(static_cast<std::size_t>(p), 1);
  if (!pen.penalize_intercept) penalized[0] = 0;
  for (int j : pen.unpenalized) {
    if (j < 0 || j >= p) fail(ErrorKind::Parameter, "unpenalized column index out of range");
    penalized[static_cast<std::size_t>(j)] = 0;
  }
  // Each penalized coefficient contributes two pseudo-observations whose
  // check losses sum to c_j |b_j|.
  const double level = pen.lambda * std::sqrt(u * (1.0 - u));
  std::vector<Eigen::Index> pen_cols;
  for (Eigen::Index j = 0; j < p; ++j)
    if (penalized[static_cast<std::size_t>(j)] && rho(j) > 0) pen_cols.push_back(j);
  const Eigen::Index m = n + 2 * static_cast<Eigen::Index>(pen_cols.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  A.topRows(n) = s.X;
  b.head(n) = s.y;
  for (std::size_t k = 0; k < pen_cols.size(); ++k) {
    const Eigen::Index j = pen_cols[k];
    const double cj = level * rho(j);
    A(n + 2 * static_cast<Eigen::Index>(k), j) = cj;
    A(n + 2 * static_cast<Eigen::Index>(k) + 1, j) = -cj;
  }
  if (weighted_rank(A, Eigen::VectorXd()) < p)
    fail(ErrorKind::Singularity, "penalized quantile design is rank deficient");
  FitResult f = solve_scaled(A, b, u, opt);
  if (!f.converged) fail(ErrorKind::Convergence, "penalized quantile interior point did not converge");
  const double thresh = 1e-7 * std::max(1.0, f.coefficients.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < p; ++j)
    if (std::abs(f.coefficients(j)) <= thresh && penalized[static_cast<std::size_t>(j)]) f.coefficients(j) = 0.0;
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(n);
  double penalty = 0.0;
  for (Eigen::Index j : pen_cols) penalty += rho(j) * std::abs(f.coefficients(j));
  f.objective = quantile_objective(s.X, s.y, unit, u, f.coefficients) + level * penalty / static_cast<double>(n);
  f.selected_support = support_of(f.coefficients, 0.0);
  return f;
}

FitResult post_lasso_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double u,
                              const FitResult& lasso, const std::vector<int>& mandated, const SolverOptions& opt) {
  std::set<int> cols(lasso.selected_support.begin(), lasso.selected_support.end());
  cols.insert(mandated.begin(), mandated.end());
  cols.insert(0);
  std::vector<int> keep(cols.begin(), cols.end());
  Eigen::MatrixXd Xs(X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) Xs.col(static_cast<Eigen::Index>(k)) = X.col(keep[k]);
  FitResult sub = fit_quantile(Xs, y, w, u, opt);
  FitResult out = sub;
  out.coefficients = Eigen::VectorXd::Zero(X.cols());
  for (std::size_t k = 0; k < keep.size(); ++k)
    out.coefficients(keep[k]) = sub.coefficients(static_cast<Eigen::Index>(k));
  out.selected_support = support_of(out.coefficients, 0.0);
  return out;
}

}  // namespace leebounds
