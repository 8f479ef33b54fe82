#include "leebounds/first_stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"

namespace leebounds {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> all_columns(const Dataset& data, const std::vector<int>& requested) {
  std::vector<int> cols;
  if (requested.empty()) {
    for (std::size_t j = 0; j < data.p(); ++j) cols.push_back(static_cast<int>(j));
    return cols;
  }
  std::set<int> seen{0};
  cols.push_back(0);
  for (int j : requested) {
    if (j < 0 || static_cast<std::size_t>(j) >= data.p())
      fail(ErrorKind::Parameter, "covariate column index " + std::to_string(j) + " out of range");
    if (seen.insert(j).second) cols.push_back(j);
  }
  return cols;
}

// Greedy selection of linearly independent columns (in the given order) by
// incremental Gram-Schmidt on the rows of X.
std::vector<int> independent_columns(const Eigen::MatrixXd& X, const std::vector<int>& candidates) {
  std::vector<int> keep;
  std::vector<Eigen::VectorXd> basis;
  for (int j : candidates) {
    Eigen::VectorXd v = X.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) v -= b.dot(v) * b;
    const double norm = v.norm();
    if (norm > 1e-9 * norm0) {
      basis.push_back(v / norm);
      keep.push_back(j);
    }
  }
  return keep;
}

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
  return out;
}

Eigen::VectorXd gather(const RowRef& x, const std::vector<int>& cols) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) v(static_cast<Eigen::Index>(k)) = x(cols[k]);
  return v;
}

}  // namespace

const char* region_name(Region r) { return r == Region::Help ? "help" : "hurt"; }

double SelectionFit::s(int d, const RowRef& x) const {
  const Eigen::VectorXd xs = gather(x, columns);
  double eta = xs.dot(alpha);
  if (d == 1) eta += xs.dot(gamma);
  return std::clamp(logistic(eta), clamp_lo, clamp_hi);
}

SelectionFit fit_selection(const Dataset& data, const std::vector<std::size_t>& rows, const FirstStageOptions& opt) {
  const auto cols = all_columns(data, opt.selection_columns);
  const int pc = static_cast<int>(cols.size());
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  int arm_count[2] = {0, 0};
  int selected[2] = {0, 0};
  for (std::size_t i : rows) {
    if (data.w(i) <= 0) continue;
    ++arm_count[data.d(i)];
    selected[data.d(i)] += data.s(i);
  }
  if (arm_count[0] == 0 || arm_count[1] == 0)
    fail(ErrorKind::InsufficientData, "selection model needs both treatment arms in the training rows");
  for (int d = 0; d < 2; ++d)
    if (selected[d] == 0 || selected[d] == arm_count[d])
      fail(ErrorKind::Separation, std::string("selection is constant in the ") + (d ? "treated" : "control") +
                                      " arm of the training rows");

  Eigen::MatrixXd Z(n, 2 * pc);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = rows[static_cast<std::size_t>(r)];
    const double d = data.d(i);
    for (int k = 0; k < pc; ++k) {
      const double v = data.covariates(static_cast<Eigen::Index>(i), cols[static_cast<std::size_t>(k)]);
      Z(r, k) = v;
      Z(r, pc + k) = d * v;
    }
    y(r) = data.s(i);
    w(r) = data.w(i);
  }
  // Rows with zero weight carry no information for the rank screen.
  Eigen::MatrixXd Zw = Z;
  for (Eigen::Index r = 0; r < n; ++r) Zw.row(r) *= std::sqrt(w(r));

  std::vector<int> candidates;
  if (opt.selection == SelectionLearner::Logistic) {
    for (int j = 0; j < 2 * pc; ++j) candidates.push_back(j);
  } else {
    PenaltySpec pen = default_penalty(PenaltyKind::Logistic, rows.size(), static_cast<std::size_t>(2 * pc),
                                      opt.penalty_confidence);
    if (opt.selection_lambda >= 0) pen.lambda = opt.selection_lambda;
    pen.unpenalized = {0, pc};
    const FitResult lasso = fit_lasso_logistic(Z, y, w, pen, opt.solver);
    std::set<int> sup(lasso.selected_support.begin(), lasso.selected_support.end());
    sup.insert(0);
    sup.insert(pc);
    candidates.assign(sup.begin(), sup.end());
  }
  const auto keep = independent_columns(Zw, candidates);
  const FitResult fit = fit_logistic(take_columns(Z, keep), y, w, opt.solver);

  SelectionFit out;
  out.columns = cols;
  out.alpha = Eigen::VectorXd::Zero(pc);
  out.gamma = Eigen::VectorXd::Zero(pc);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const double b = fit.coefficients(static_cast<Eigen::Index>(k));
    if (keep[k] < pc)
      out.alpha(keep[k]) = b;
    else
      out.gamma(keep[k] - pc) = b;
    if (b != 0.0) out.support.push_back(keep[k]);
  }
  out.clamp_lo = opt.clamp_lo;
  out.clamp_hi = opt.clamp_hi;
  return out;
}

RegionPartition partition_from_p(const std::vector<double>& p, const Eigen::VectorXd& w) {
  RegionPartition part;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Region r = region_of(p[i]);
    part.label.push_back(r);
    const double wi = w(static_cast<Eigen::Index>(i));
    total += wi;
    (r == Region::Help ? part.help_share : part.hurt_share) += wi;
  }
  if (total > 0) {
    part.help_share /= total;
    part.hurt_share /= total;
  }
  return part;
}

RegionPartition classify_regions(const SelectionFit& fit, const Dataset& data) {
  std::vector<double> p(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) p[i] = fit.p(data.covariates.row(static_cast<Eigen::Index>(i)));
  return partition_from_p(p, data.weight);
}

int level_index(double level) {
  double k = std::round(level * 100.0);
  if (!(k >= 1.0)) k = 1.0;
  if (k > 99.0) k = 99.0;
  return static_cast<int>(k) - 1;
}

Eigen::VectorXd rearrange(const Eigen::VectorXd& raw, double lo, double hi) {
  Eigen::VectorXd v = raw;
  std::sort(v.data(), v.data() + v.size());
  return v.cwiseMax(lo).cwiseMin(hi);
}

Eigen::VectorXd QuantileGridFit::evaluate(int group, const RowRef& x) const {
  const Eigen::VectorXd xs = gather(x, columns);
  return rearrange(coef[static_cast<std::size_t>(group)].transpose() * xs, min_cap, max_cap);
}

double QuantileGridFit::at_level(int group, const RowRef& x, double level) const {
  return evaluate(group, x)(level_index(level));
}

QuantileGridFit QuantileGridFit::negated() const {
  QuantileGridFit out = *this;
  for (int g = 0; g < 2; ++g) out.coef[g] = -coef[g].rowwise().reverse();
  out.min_cap = -max_cap;
  out.max_cap = -min_cap;
  return out;
}

QuantileGridFit fit_quantile_grid(const Dataset& data, const Eigen::VectorXd& y, const std::vector<std::size_t>& rows,
                                  const FirstStageOptions& opt) {
  QuantileGridFit out;
  out.columns = all_columns(data, opt.quantile_columns);
  const int pc = static_cast<int>(out.columns.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int g = 0; g < 2; ++g) {
    std::vector<std::size_t> grp;
    for (std::size_t i : rows)
      if (data.s(i) == 1 && data.d(i) == g && data.w(i) > 0 && std::isfinite(y(static_cast<Eigen::Index>(i))))
        grp.push_back(i);
    if (grp.empty())
      fail(ErrorKind::InsufficientData, std::string("no selected ") + (g ? "treated" : "control") +
                                            " rows to fit the outcome quantiles");
    const Eigen::Index m = static_cast<Eigen::Index>(grp.size());
    Eigen::MatrixXd X(m, pc);
    Eigen::VectorXd yy(m), w(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto i = static_cast<Eigen::Index>(grp[static_cast<std::size_t>(r)]);
      for (int k = 0; k < pc; ++k) X(r, k) = data.covariates(i, out.columns[static_cast<std::size_t>(k)]);
      yy(r) = y(i);
      w(r) = data.w(static_cast<std::size_t>(i));
      lo = std::min(lo, yy(r));
      hi = std::max(hi, yy(r));
    }
    std::vector<int> candidates;
    for (int k = 0; k < pc; ++k) candidates.push_back(k);
    candidates = independent_columns(X, candidates);
    if (opt.quantile == QuantileLearner::LassoQuantile && candidates.size() > 1) {
      const Eigen::MatrixXd Xc = take_columns(X, candidates);
      PenaltySpec pen = default_penalty(PenaltyKind::Quantile, grp.size(), candidates.size(), opt.penalty_confidence);
      if (opt.quantile_lambda >= 0) pen.lambda = opt.quantile_lambda;
      // Selection at the median on y and on -y keeps the grid antisymmetric.
      std::set<int> sup{0};
      for (double sign : {1.0, -1.0}) {
        const FitResult f = fit_lasso_quantile(Xc, sign * yy, w, 0.5, pen, opt.solver);
        for (int j : f.selected_support) sup.insert(candidates[static_cast<std::size_t>(j)]);
      }
      candidates.assign(sup.begin(), sup.end());
    }
    // Keep the design estimable on this group.
    if (static_cast<Eigen::Index>(candidates.size()) >= m) candidates.resize(static_cast<std::size_t>(std::max<Eigen::Index>(1, m - 1)));
    const Eigen::MatrixXd Xs = take_columns(X, candidates);
    const Eigen::VectorXd neg = -yy;
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(pc, QuantileGridFit::kLevels);
    auto put = [&](int level, const Eigen::VectorXd& b) {
      for (std::size_t k = 0; k < candidates.size(); ++k) coef(candidates[k], level) = b(static_cast<Eigen::Index>(k));
    };
    for (int k = 1; k <= 49; ++k) {
      const double u = k / 100.0;
      put(k - 1, fit_quantile(Xs, yy, w, u, opt.solver).coefficients);
      put(99 - k, -fit_quantile(Xs, neg, w, u, opt.solver).coefficients);
    }
    put(49, 0.5 * (fit_quantile(Xs, yy, w, 0.5, opt.solver).coefficients -
                   fit_quantile(Xs, neg, w, 0.5, opt.solver).coefficients));
    out.coef[static_cast<std::size_t>(g)] = coef;
    out.support[static_cast<std::size_t>(g)] = candidates;
  }
  out.min_cap = lo;
  out.max_cap = hi;
  return out;
}

RowNuisance make_row_nuisance(double s0, double s1, const std::function<double(int, double)>& quantile) {
  RowNuisance r;
  r.s0 = s0;
  r.s1 = s1;
  r.p = s0 / s1;
  r.region = region_of(r.p);
  if (r.region == Region::Help) {
    r.q_upper = quantile(1, 1.0 - r.p);
    r.q_lower = quantile(1, r.p);
  } else {
    r.q_upper = quantile(0, 1.0 / r.p);
    r.q_lower = quantile(0, 1.0 - 1.0 / r.p);
  }
  return r;
}

RowNuisance FittedNuisance::evaluate(const RowRef& x) const {
  const double s0 = selection_.s(0, x), s1 = selection_.s(1, x);
  const int group = region_of(s0 / s1) == Region::Help ? 1 : 0;
  const Eigen::VectorXd grid = grid_.evaluate(group, x);
  return make_row_nuisance(s0, s1, [&](int, double level) { return grid(level_index(level)); });
}

double sample_propensity(const Dataset& data) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    num += data.w(i) * data.d(i);
    den += data.w(i);
  }
  const double pi = num / den;
  if (!(pi > 0.0 && pi < 1.0)) fail(ErrorKind::InsufficientData, "both treatment arms must be present");
  return pi;
}

NuisanceBundle assemble_bundle(std::shared_ptr<const NuisanceModel> model, const Dataset& data,
                               const std::vector<std::size_t>& eval_rows, double pi) {
  if (!(pi > 0.0 && pi < 1.0)) fail(ErrorKind::Parameter, "propensity must lie in (0,1)");
  NuisanceBundle b;
  b.model = std::move(model);
  b.pi = pi;
  b.rows.reserve(eval_rows.size());
  std::vector<double> p;
  Eigen::VectorXd w(static_cast<Eigen::Index>(eval_rows.size()));
  double help_num = 0.0, help_den = 0.0, hurt_num = 0.0, hurt_den = 0.0;
  for (std::size_t k = 0; k < eval_rows.size(); ++k) {
    const std::size_t i = eval_rows[k];
    const RowNuisance r = b.model->evaluate(data.covariates.row(static_cast<Eigen::Index>(i)));
    b.rows.push_back(r);
    p.push_back(r.p);
    w(static_cast<Eigen::Index>(k)) = data.w(i);
    if (r.region == Region::Help) {
      help_num += data.w(i) * r.s0;
      help_den += data.w(i);
    } else {
      hurt_num += data.w(i) * r.s1;
      hurt_den += data.w(i);
    }
  }
  b.regions = partition_from_p(p, w);
  b.mu10_help = help_den > 0 ? help_num / help_den : kNaN;
  b.mu11_hurt = hurt_den > 0 ? hurt_num / hurt_den : kNaN;
  return b;
}

}  // namespace leebounds
