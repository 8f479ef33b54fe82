#include <cmath>
#include <limits>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/solvers.hpp"

namespace leebounds {

namespace {

Eigen::VectorXd wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    const char* what) {
  if (X.rows() != y.size() || w.size() != y.size()) fail(ErrorKind::Shape, std::string(what) + ": row count mismatch");
  const Eigen::VectorXd sw = w.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd A = sw.asDiagonal() * X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) fail(ErrorKind::Singularity, std::string(what) + ": weighted design is rank deficient");
  return qr.solve(sw.cwiseProduct(y));
}

std::vector<int> nonzero(const Eigen::VectorXd& b) {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (b(j) != 0.0) s.push_back(static_cast<int>(j));
  return s;
}

}  // namespace

FitResult fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const Eigen::VectorXd ww = w.size() ? w : Eigen::VectorXd::Ones(y.size());
  FitResult f;
  f.coefficients = wls(X, y, ww, "OLS");
  const Eigen::VectorXd r = y - X * f.coefficients;
  f.objective = r.cwiseAbs2().dot(ww) / ww.sum();
  f.converged = true;
  f.iterations = 1;
  f.selected_support = nonzero(f.coefficients);
  return f;
}

FitResult fit_tsls(const Eigen::MatrixXd& X_exog, const Eigen::MatrixXd& d_endog, const Eigen::MatrixXd& Z,
                   const Eigen::VectorXd& y, const Eigen::VectorXd& w, double weak_t_floor) {
  const Eigen::Index n = y.size();
  if (X_exog.rows() != n || d_endog.rows() != n || Z.rows() != n)
    fail(ErrorKind::Shape, "2SLS: row count mismatch");
  if (Z.cols() < d_endog.cols()) fail(ErrorKind::Parameter, "2SLS: fewer instruments than endogenous regressors");
  const Eigen::VectorXd ww = w.size() ? w : Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd first(n, Z.cols() + X_exog.cols());
  first << Z, X_exog;
  Eigen::MatrixXd dhat(n, d_endog.cols());
  FitResult out;
  for (Eigen::Index k = 0; k < d_endog.cols(); ++k) {
    const Eigen::VectorXd pi = wls(first, d_endog.col(k), ww, "2SLS first stage");
    dhat.col(k) = first * pi;
    if (k == 0) {
      // Conventional t statistic for the first instrument.
      const Eigen::VectorXd r = d_endog.col(k) - dhat.col(k);
      const double dof = std::max<double>(1.0, static_cast<double>(n - first.cols()));
      const double wsum = ww.sum();
      const double sigma2 = r.cwiseAbs2().dot(ww) / dof * (static_cast<double>(n) / wsum);
      const Eigen::MatrixXd xtwx = first.transpose() * ww.asDiagonal() * first;
      const double v = sigma2 * xtwx.inverse()(0, 0);
      out.first_stage_t = v > 0 ? pi(0) / std::sqrt(v) : std::numeric_limits<double>::infinity();
      out.weak_instrument = !(std::abs(out.first_stage_t) >= weak_t_floor);
    }
  }
  Eigen::MatrixXd second(n, d_endog.cols() + X_exog.cols());
  second << dhat, X_exog;
  out.coefficients = wls(second, y, ww, "2SLS second stage");
  Eigen::MatrixXd structural(n, second.cols());
  structural << d_endog, X_exog;
  const Eigen::VectorXd r = y - structural * out.coefficients;
  out.objective = r.cwiseAbs2().dot(ww) / ww.sum();
  out.converged = true;
  out.iterations = 1;
  out.selected_support = nonzero(out.coefficients);
  return out;
}

}  // namespace leebounds
