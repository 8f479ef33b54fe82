#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace leebounds {

struct FitResult {
  Eigen::VectorXd coefficients;
  std::vector<int> selected_support;  // {j : coefficient_j != 0}
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  double kkt_residual = 0.0;
  // 2SLS only: first-stage t statistic on the (first) instrument and the flag.
  double first_stage_t = 0.0;
  bool weak_instrument = false;
};

struct PenaltySpec {
  double lambda = 0.0;
  bool penalize_intercept = false;
  Eigen::VectorXd loadings;      // empty: solver default
  std::vector<int> unpenalized;  // caller-mandated columns, never penalized
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  double separation_norm = 1e4;
};

enum class PenaltyKind { Logistic, Quantile };

// lambda = 1.1 sqrt(n) Phi^{-1}(1 - confidence / (2 p log n)); the logistic
// objective uses half of it because its score is bounded by 1/2.
PenaltySpec default_penalty(PenaltyKind kind, std::size_t n, std::size_t p, double confidence = 0.1);

FitResult fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       const SolverOptions& opt = {});

// Minimizes mean weighted negative log-likelihood + (lambda/n) sum_j rho_j |b_j|.
// Default loadings: weighted standard deviation of column j.
FitResult fit_lasso_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             const PenaltySpec& pen, const SolverOptions& opt = {});

// Unpenalized refit on support(lasso) union mandated; returns full-length coefficients.
FitResult post_lasso_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const FitResult& lasso, const std::vector<int>& mandated,
                              const SolverOptions& opt = {});

FitResult fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double u,
                       const SolverOptions& opt = {});

// Minimizes mean weighted check loss + lambda sqrt(u(1-u))/n sum_j rho_j |b_j|,
// rho_j = root weighted mean square of column j.
FitResult fit_lasso_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                             double u, const PenaltySpec& pen, const SolverOptions& opt = {});

FitResult post_lasso_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              double u, const FitResult& lasso, const std::vector<int>& mandated,
                              const SolverOptions& opt = {});

FitResult fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

// Coefficients ordered (endogenous..., exogenous...). Z holds the excluded instruments.
FitResult fit_tsls(const Eigen::MatrixXd& X_exog, const Eigen::MatrixXd& d_endog, const Eigen::MatrixXd& Z,
                   const Eigen::VectorXd& y, const Eigen::VectorXd& w, double weak_t_floor = 3.0);

// Helpers shared with tests.
double check_loss(double r, double u);
double quantile_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double u,
                          const Eigen::VectorXd& b);
Eigen::VectorXd rms_loadings(const Eigen::MatrixXd& X, const Eigen::VectorXd& w);
// Column rank of X restricted to rows with positive weight.
int weighted_rank(const Eigen::MatrixXd& X, const Eigen::VectorXd& w);

}  // namespace leebounds
