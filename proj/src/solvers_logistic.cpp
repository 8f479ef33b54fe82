#include <algorithm>
#include <cmath>
#include <set>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/solvers.hpp"

namespace leebounds {

namespace {

struct Prepared {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd w;  // mean one
};

Prepared keep_positive(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (X.rows() != y.size() || (w.size() != 0 && w.size() != y.size()))
    fail(ErrorKind::Shape, "design, response and weights must have the same number of rows");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (w.size() == 0 || w(i) > 0) rows.push_back(i);
  if (rows.empty()) fail(ErrorKind::InsufficientData, "no rows with positive weight");
  Prepared p;
  p.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  p.y.resize(static_cast<Eigen::Index>(rows.size()));
  p.w.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = rows[k];
    const auto kk = static_cast<Eigen::Index>(k);
    p.X.row(kk) = X.row(i);
    p.y(kk) = y(i);
    p.w(kk) = w.size() == 0 ? 1.0 : w(i);
  }
  p.w = unit_mean_weights(p.w);
  return p;
}

double nll(const Prepared& d, const Eigen::VectorXd& eta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) s += d.w(i) * (log1p_exp(eta(i)) - d.y(i) * eta(i));
  return s / static_cast<double>(eta.size());
}

Eigen::VectorXd gradient(const Prepared& d, const Eigen::VectorXd& eta) {
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) r(i) = d.w(i) * (logistic(eta(i)) - d.y(i));
  return d.X.transpose() * r / static_cast<double>(eta.size());
}

void check_binary(const Prepared& d) {
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    if (d.y(i) == 0.0) has0 = true;
    else if (d.y(i) == 1.0) has1 = true;
    else fail(ErrorKind::Value, "logistic response must be 0/1");
  }
  if (!has0 || !has1) fail(ErrorKind::Separation, "response is constant; the likelihood has no finite maximizer");
}

std::vector<int> support_of(const Eigen::VectorXd& b) {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (b(j) != 0.0) s.push_back(static_cast<int>(j));
  return s;
}

double soft(double c, double t) {
  if (c > t) return c - t;
  if (c < -t) return c + t;
  return 0.0;
}

}  // namespace

int weighted_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  Eigen::MatrixXd A = X;
  for (Eigen::Index i = 0; i < A.rows(); ++i) A.row(i) *= (w.size() == 0 ? 1.0 : std::sqrt(std::max(w(i), 0.0)));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  return static_cast<int>(qr.rank());
}

PenaltySpec default_penalty(PenaltyKind kind, std::size_t n, std::size_t p, double confidence) {
  const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
  const double pp = static_cast<double>(std::max<std::size_t>(p, 1));
  const double logn = std::max(std::log(nn), 1.0);
  const double base = 1.1 * std::sqrt(nn) * normal_quantile(1.0 - confidence / (2.0 * pp * logn));
  PenaltySpec spec;
  spec.lambda = kind == PenaltyKind::Logistic ? 0.5 * base : base;
  return spec;
}

FitResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       const SolverOptions& opt) {
  const Prepared d = keep_positive(X, y, w);
  check_binary(d);
  if (weighted_rank(d.X, d.w) < d.X.cols()) fail(ErrorKind::Singularity, "logistic design is rank deficient");
  const Eigen::Index p = d.X.cols();
  const double n = static_cast<double>(d.X.rows());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = d.X * b;
  double obj = nll(d, eta);
  FitResult fit;
  for (int it = 1; it <= 500; ++it) {
    const Eigen::VectorXd g = gradient(d, eta);
    fit.iterations = it;
    fit.kkt_residual = g.cwiseAbs().maxCoeff();
    if (fit.kkt_residual <= opt.tol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd v(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double m = logistic(eta(i));
      v(i) = d.w(i) * std::max(m * (1.0 - m), 1e-300);
    }
    const Eigen::MatrixXd H = d.X.transpose() * v.asDiagonal() * d.X / n;
    const Eigen::VectorXd step = H.ldlt().solve(g);
    double t = 1.0;
    Eigen::VectorXd b_new, eta_new;
    double obj_new = obj;
    // Near the optimum the objective change drops below rounding; take the full step.
    const bool tiny = -g.dot(step) < 1e-13 * (1.0 + std::abs(obj));
    for (int ls = 0; ls < 60; ++ls) {
      b_new = b - t * step;
      eta_new = d.X * b_new;
      obj_new = nll(d, eta_new);
      if (tiny || obj_new <= obj + 1e-4 * t * (-g.dot(step))) break;
      t *= 0.5;
    }
    b = b_new;
    eta = eta_new;
    obj = obj_new;
    if (!b.allFinite() || b.norm() > opt.separation_norm)
      fail(ErrorKind::Separation, "coefficient norm exceeded " + std::to_string(opt.separation_norm) +
                                      " (perfect or quasi-complete separation)");
  }
  if (!fit.converged) {
    if (eta.cwiseAbs().maxCoeff() > 30.0)
      fail(ErrorKind::Separation, "fitted probabilities collapse to 0 or 1 (separation)");
    fail(ErrorKind::Convergence, "logistic Newton iterations did not converge; gradient " +
                                     std::to_string(fit.kkt_residual) + " after " + std::to_string(fit.iterations) +
                                     " iterations");
  }
  fit.coefficients = b;
  fit.objective = obj;
  fit.selected_support = support_of(b);
  return fit;
}

FitResult fit_lasso_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             const PenaltySpec& pen, const SolverOptions& opt) {
  const Prepared d = keep_positive(X, y, w);
  check_binary(d);
  const Eigen::Index p = d.X.cols();
  const Eigen::Index nr = d.X.rows();
  const double n = static_cast<double>(nr);
  if (pen.lambda < 0) fail(ErrorKind::Parameter, "penalty lambda must be nonnegative");

  Eigen::VectorXd rho = pen.loadings;
  if (rho.size() == 0) {
    rho.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double m = d.X.col(j).dot(d.w) / n;
      const double v = (d.X.col(j).array() - m).square().matrix().dot(d.w) / n;
      rho(j) = v > 1e-24 ? std::sqrt(v) : 1.0;
    }
  }
  if (rho.size() != p || (rho.array() < 0).any()) fail(ErrorKind::Parameter, "penalty loadings invalid");
  Eigen::VectorXd lam = (pen.lambda / n) * rho;
  if (!pen.penalize_intercept) lam(0) = 0.0;
  for (int j : pen.unpenalized) {
    if (j < 0 || j >= p) fail(ErrorKind::Parameter, "unpenalized column index out of range");
    lam(j) = 0.0;
  }

  auto objective = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& eta) {
    return nll(d, eta) + lam.dot(b.cwiseAbs());
  };
  auto kkt = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& eta) {
    const Eigen::VectorXd g = gradient(d, eta);
    double r = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      double e;
      if (lam(j) == 0.0) e = std::abs(g(j));
      else if (b(j) != 0.0) e = std::abs(g(j) + lam(j) * (b(j) > 0 ? 1.0 : -1.0));
      else e = std::max(0.0, std::abs(g(j)) - lam(j));
      r = std::max(r, e);
    }
    return r;
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(nr);
  double obj = objective(b, eta);
  FitResult fit;
  int sweeps = 0;
  Eigen::VectorXd v(nr), r(nr), xv(p);
  for (int outer = 0; outer < opt.max_iter; ++outer) {
    fit.kkt_residual = kkt(b, eta);
    if (fit.kkt_residual <= opt.tol) {
      fit.converged = true;
      break;
    }
    // Quadratic approximation around the current point.
    for (Eigen::Index i = 0; i < nr; ++i) {
      const double m = logistic(eta(i));
      const double vv = std::max(m * (1.0 - m), 1e-6);
      v(i) = d.w(i) * vv / n;
      r(i) = (d.y(i) - m) / vv;
    }
    for (Eigen::Index j = 0; j < p; ++j) xv(j) = d.X.col(j).cwiseAbs2().dot(v);
    Eigen::VectorXd bq = b;
    auto sweep = [&](bool active_only) {
      double max_change = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (active_only && bq(j) == 0.0 && lam(j) > 0.0) continue;
        if (xv(j) <= 0.0) continue;
        const double c = d.X.col(j).dot(v.cwiseProduct(r)) + xv(j) * bq(j);
        const double nb = soft(c, lam(j)) / xv(j);
        const double delta = nb - bq(j);
        if (delta != 0.0) {
          r -= delta * d.X.col(j);
          bq(j) = nb;
          max_change = std::max(max_change, std::abs(delta) * std::sqrt(xv(j)));
        }
      }
      ++sweeps;
      return max_change;
    };
    // The inner problem is solved only as precisely as the outer residual warrants.
    const double inner_tol = std::clamp(1e-3 * fit.kkt_residual, 1e-15, 1e-8);
    for (int inner = 0; inner < 1000; ++inner) {
      double ch = sweep(false);
      if (ch < inner_tol) break;
      for (int a = 0; a < 1000 && ch >= inner_tol; ++a) ch = sweep(true);
      if (sweeps > opt.max_iter) break;
    }
    // Damped update keeps the penalized objective monotone.
    double t = 1.0;
    Eigen::VectorXd b_new = bq, eta_new = d.X * bq;
    double obj_new = objective(b_new, eta_new);
    for (int ls = 0; ls < 50 && obj_new > obj + 1e-12 * std::abs(obj); ++ls) {
      t *= 0.5;
      b_new = b + t * (bq - b);
      eta_new = d.X * b_new;
      obj_new = objective(b_new, eta_new);
    }
    const bool stalled = (b_new - b).cwiseAbs().maxCoeff() == 0.0;
    b = b_new;
    eta = eta_new;
    obj = obj_new;
    if (!b.allFinite() || b.norm() > opt.separation_norm)
      fail(ErrorKind::Separation, "lasso-logistic coefficient norm exceeded " + std::to_string(opt.separation_norm));
    if (sweeps > opt.max_iter || stalled) {
      fit.kkt_residual = kkt(b, eta);
      fit.converged = fit.kkt_residual <= opt.tol;
      break;
    }
  }
  fit.iterations = sweeps;
  if (!fit.converged)
    fail(ErrorKind::Convergence, "lasso-logistic did not reach KKT tolerance; residual " +
                                     std::to_string(fit.kkt_residual) + " after " + std::to_string(sweeps) +
                                     " sweeps");
  fit.coefficients = b;
  fit.objective = obj;
  fit.selected_support = support_of(b);
  return fit;
}

FitResult post_lasso_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const FitResult& lasso, const std::vector<int>& mandated, const SolverOptions& opt) {
  std::set<int> cols(lasso.selected_support.begin(), lasso.selected_support.end());
  cols.insert(mandated.begin(), mandated.end());
  cols.insert(0);
  std::vector<int> keep(cols.begin(), cols.end());
  Eigen::MatrixXd Xs(X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) Xs.col(static_cast<Eigen::Index>(k)) = X.col(keep[k]);
  FitResult sub = fit_logistic(Xs, y, w, opt);
  FitResult out = sub;
  out.coefficients = Eigen::VectorXd::Zero(X.cols());
  for (std::size_t k = 0; k < keep.size(); ++k)
    out.coefficients(keep[k]) = sub.coefficients(static_cast<Eigen::Index>(k));
  out.selected_support = support_of(out.coefficients);
  return out;
}

}  // namespace leebounds
