#include "leebounds/bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "leebounds/errors.hpp"
#include "leebounds/inference.hpp"
#include "leebounds/numeric.hpp"

namespace leebounds {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CellTrim {
  double w_total = 0.0;
  double s0 = 0.0;
  double s1 = 0.0;
  double p = 1.0;
  Region region = Region::Help;
  double q_upper = 0.0;
  double q_lower = 0.0;
  double beta_L = 0.0;
  double beta_U = 0.0;
};

double mean_if(const std::vector<double>& v, const std::vector<double>& w, double q, bool keep_above) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (keep_above ? v[i] >= q : v[i] <= q) {
      num += w[i] * v[i];
      den += w[i];
    }
  }
  return num / den;
}

double plain_mean(const std::vector<double>& v, const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    num += w[i] * v[i];
    den += w[i];
  }
  return num / den;
}

// Trimming bounds over a set of rows; label forces the trimmed arm.
CellTrim trim_rows(const Dataset& data, const std::vector<std::size_t>& rows, const Region* label,
                   const std::string& where) {
  double W[2] = {0, 0}, Ws[2] = {0, 0};
  std::vector<double> vals[2], wts[2];
  for (std::size_t i : rows) {
    const int d = data.d(i);
    W[d] += data.w(i);
    if (data.s(i) == 1) {
      Ws[d] += data.w(i);
      if (data.w(i) > 0) {
        vals[d].push_back(data.y(i));
        wts[d].push_back(data.w(i));
      }
    }
  }
  for (int d = 0; d < 2; ++d) {
    if (W[d] <= 0)
      fail(where.empty() ? ErrorKind::InsufficientData : ErrorKind::CellSupport,
           where + (where.empty() ? "" : ": ") + "no " + (d ? "treated" : "control") + " rows");
    if (vals[d].empty())
      fail(where.empty() ? ErrorKind::InsufficientData : ErrorKind::CellSupport,
           where + (where.empty() ? "" : ": ") + "no selected " + (d ? "treated" : "control") + " rows");
  }
  CellTrim c;
  c.w_total = W[0] + W[1];
  c.s0 = Ws[0] / W[0];
  c.s1 = Ws[1] / W[1];
  c.p = c.s0 / c.s1;
  c.region = label ? *label : region_of(c.p);
  if (c.region == Region::Help) {
    c.q_upper = empirical_quantile(vals[1], wts[1], 1.0 - c.p);
    c.q_lower = empirical_quantile(vals[1], wts[1], c.p);
    const double mc = plain_mean(vals[0], wts[0]);
    c.beta_U = mean_if(vals[1], wts[1], c.q_upper, true) - mc;
    c.beta_L = mean_if(vals[1], wts[1], c.q_lower, false) - mc;
  } else {
    c.q_upper = empirical_quantile(vals[0], wts[0], 1.0 / c.p);
    c.q_lower = empirical_quantile(vals[0], wts[0], 1.0 - 1.0 / c.p);
    const double mt = plain_mean(vals[1], wts[1]);
    c.beta_U = mt - mean_if(vals[0], wts[0], c.q_upper, false);
    c.beta_L = mt - mean_if(vals[0], wts[0], c.q_lower, true);
  }
  return c;
}

RowNuisance row_from_trim(const CellTrim& c) {
  RowNuisance r;
  r.s0 = c.s0;
  r.s1 = c.s1;
  r.p = c.p;
  r.region = c.region;
  r.q_upper = c.q_upper;
  r.q_lower = c.q_lower;
  return r;
}

void fill_series(const Dataset& data, const Eigen::VectorXd& y, const std::vector<std::size_t>& rows,
                 const std::vector<RowNuisance>& xi, const MomentContext& ctx, Eigen::VectorXd& gL,
                 Eigen::VectorXd& gU) {
  gL.resize(static_cast<Eigen::Index>(rows.size()));
  gU.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    const double yi = y(static_cast<Eigen::Index>(i));
    gL(static_cast<Eigen::Index>(k)) = moment_g(data.d(i), data.s(i), yi, xi[k], ctx, MomentSide::Lower);
    gU(static_cast<Eigen::Index>(k)) = moment_g(data.d(i), data.s(i), yi, xi[k], ctx, MomentSide::Upper);
  }
}

// Region normalizers are sample means of a_i = (1-D)S/(1-pi) (help) or
// DS/pi (hurt); their estimation adds beta_r (1 - a_i / mu_r) to row i.
void normalizer_adjustment(const Dataset& data, const std::vector<std::size_t>& rows,
                           const std::vector<RowNuisance>& xi, const MomentContext& ctx, BoundsEstimate& est,
                           const std::vector<int>* strata = nullptr) {
  double num[2][2] = {{0, 0}, {0, 0}}, den[2] = {0, 0};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int r = xi[k].region == Region::Help ? 0 : 1;
    const double w = data.w(rows[k]);
    num[r][0] += w * est.g_L(static_cast<Eigen::Index>(k));
    num[r][1] += w * est.g_U(static_cast<Eigen::Index>(k));
    den[r] += w;
  }
  est.adj_L.resize(static_cast<Eigen::Index>(rows.size()));
  est.adj_U.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    const int r = xi[k].region == Region::Help ? 0 : 1;
    const double a = r == 0 ? (1 - data.d(i)) * data.s(i) / (1.0 - ctx.pi) : data.d(i) * data.s(i) / ctx.pi;
    const double ratio = 1.0 - a / (r == 0 ? ctx.mu10_help : ctx.mu11_hurt);
    est.adj_L(static_cast<Eigen::Index>(k)) = num[r][0] / den[r] * ratio;
    est.adj_U(static_cast<Eigen::Index>(k)) = num[r][1] / den[r] * ratio;
  }
  if (!ctx.estimated_pi) return;
  // Arm shares are estimated within each stratum, so rows are centred at
  // their (stratum, arm) mean and shifted back to the stratum mean.
  int J = 1;
  if (strata) J = *std::max_element(strata->begin(), strata->end()) + 1;
  std::vector<std::array<double, 3>> sw(static_cast<std::size_t>(3 * J), {0.0, 0.0, 0.0});
  auto slot = [&](std::size_t k, int arm) {
    return static_cast<std::size_t>(3 * (strata ? (*strata)[rows[k]] : 0) + arm);
  };
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double w = data.w(rows[k]);
    for (int arm : {data.d(rows[k]), 2}) {
      auto& a = sw[slot(k, arm)];
      a[0] += w * (est.g_L(kk) + est.adj_L(kk));
      a[1] += w * (est.g_U(kk) + est.adj_U(kk));
      a[2] += w;
    }
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const auto& a = sw[slot(k, data.d(rows[k]))];
    const auto& t = sw[slot(k, 2)];
    if (a[2] <= 0) continue;
    est.adj_L(kk) -= a[0] / a[2] - t[0] / t[2];
    est.adj_U(kk) -= a[1] / a[2] - t[1] / t[2];
  }
}

BoundsEstimate base_estimate(const Dataset& data, const std::string& method) {
  BoundsEstimate est;
  est.method = method;
  est.n = data.n();
  est.weight = data.weight;
  est.cluster = data.cluster;
  return est;
}

// Shifts both series so that their weighted means equal the reported bounds.
void recentre(BoundsEstimate& est) {
  est.g_L.array() += est.beta_L - weighted_mean(est.g_L, est.weight);
  est.g_U.array() += est.beta_U - weighted_mean(est.g_U, est.weight);
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> r(data.n());
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

Eigen::VectorXd outcome_column(const Dataset& data, int col) {
  if (col < 0 || static_cast<std::size_t>(col) >= data.d_out())
    fail(ErrorKind::Parameter, "outcome column " + std::to_string(col) + " out of range");
  return data.outcome.col(col);
}

}  // namespace

double BoundsEstimate::se_L() const { return n_scale > 0 ? std::sqrt(omega(0, 0) / n_scale) : kNaN; }
double BoundsEstimate::se_U() const { return n_scale > 0 ? std::sqrt(omega(1, 1) / n_scale) : kNaN; }

double empirical_quantile(const std::vector<double>& values, const std::vector<double>& weights, double u) {
  if (values.empty()) fail(ErrorKind::InsufficientData, "quantile of an empty sample");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0)) fail(ErrorKind::InsufficientData, "quantile with zero total weight");
  const double target = u * total * (1.0 - 1e-12);
  double cum = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    cum += weights[idx[k]];
    // Ties are absorbed before testing so the CDF is evaluated at distinct values.
    if (k + 1 < idx.size() && values[idx[k + 1]] == values[idx[k]]) continue;
    if (cum >= target) return values[idx[k]];
  }
  return values[idx.back()];
}

BoundsEstimate basic_bounds(const Dataset& data) {
  const auto rows = all_rows(data);
  const CellTrim c = trim_rows(data, rows, nullptr, "");
  BoundsEstimate est = base_estimate(data, "basic");
  est.beta_L = c.beta_L;
  est.beta_U = c.beta_U;
  est.help_share = c.region == Region::Help ? 1.0 : 0.0;
  est.hurt_share = 1.0 - est.help_share;
  MomentContext ctx;
  ctx.pi = sample_propensity(data);
  ctx.estimated_pi = true;
  ctx.mu10_help = c.s0;
  ctx.mu11_hurt = c.s1;
  const std::vector<RowNuisance> xi(rows.size(), row_from_trim(c));
  fill_series(data, data.outcome.col(0), rows, xi, ctx, est.g_L, est.g_U);
  recentre(est);
  normalizer_adjustment(data, rows, xi, ctx, est);
  est.diagnostics["p_hat"] = c.p;
  est.diagnostics["s0_hat"] = c.s0;
  est.diagnostics["s1_hat"] = c.s1;
  est.diagnostics["q_upper"] = c.q_upper;
  est.diagnostics["q_lower"] = c.q_lower;
  attach_variance(est, true);
  return est;
}

BoundsEstimate cell_bounds(const Dataset& data, const std::vector<int>& cells, const std::vector<Region>& labels) {
  if (cells.size() != data.n()) fail(ErrorKind::Shape, "cell vector length differs from the row count");
  const int J = cells.empty() ? 0 : *std::max_element(cells.begin(), cells.end()) + 1;
  if (!labels.empty() && static_cast<int>(labels.size()) != J)
    fail(ErrorKind::Shape, "one region label per cell is required");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(J));
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (cells[i] < 0) fail(ErrorKind::Value, "negative cell id");
    members[static_cast<std::size_t>(cells[i])].push_back(i);
  }
  std::vector<CellTrim> trims;
  double total = 0.0;
  for (int j = 0; j < J; ++j) {
    if (members[static_cast<std::size_t>(j)].empty()) fail(ErrorKind::CellSupport, "cell " + std::to_string(j) + " is empty");
    const Region* lab = labels.empty() ? nullptr : &labels[static_cast<std::size_t>(j)];
    trims.push_back(trim_rows(data, members[static_cast<std::size_t>(j)], lab, "cell " + std::to_string(j)));
    total += trims.back().w_total;
  }
  double mass[2] = {0, 0}, norm[2] = {0, 0}, numL[2] = {0, 0}, numU[2] = {0, 0};
  for (const auto& c : trims) {
    const int r = c.region == Region::Help ? 0 : 1;
    const double pj = c.w_total / total;
    const double at = pj * (r == 0 ? c.s0 : c.s1);
    mass[r] += pj;
    norm[r] += at;
    numL[r] += at * c.beta_L;
    numU[r] += at * c.beta_U;
  }
  BoundsEstimate est = base_estimate(data, "cell");
  for (int r = 0; r < 2; ++r) {
    if (mass[r] <= 0) continue;
    est.beta_L += mass[r] * numL[r] / norm[r];
    est.beta_U += mass[r] * numU[r] / norm[r];
  }
  est.help_share = mass[0];
  est.hurt_share = mass[1];
  MomentContext ctx;
  ctx.pi = sample_propensity(data);
  ctx.estimated_pi = true;
  ctx.mu10_help = mass[0] > 0 ? norm[0] / mass[0] : kNaN;
  ctx.mu11_hurt = mass[1] > 0 ? norm[1] / mass[1] : kNaN;
  std::vector<RowNuisance> xi;
  for (std::size_t i = 0; i < data.n(); ++i) xi.push_back(row_from_trim(trims[static_cast<std::size_t>(cells[i])]));
  fill_series(data, data.outcome.col(0), all_rows(data), xi, ctx, est.g_L, est.g_U);
  recentre(est);
  normalizer_adjustment(data, all_rows(data), xi, ctx, est, &cells);
  est.diagnostics["cells"] = J;
  attach_variance(est, true);
  return est;
}

double moment_m(int d, int s, double y, const RowNuisance& xi, const MomentContext& ctx, MomentSide side) {
  if (s == 0) return 0.0;
  const bool upper = side == MomentSide::Upper;
  if (xi.region == Region::Help) {
    const double q = upper ? xi.q_upper : xi.q_lower;
    if (d == 1) {
      const bool keep = upper ? y >= q : y <= q;
      return keep ? y / ctx.pi / ctx.mu10_help : 0.0;
    }
    return -y / (1.0 - ctx.pi) / ctx.mu10_help;
  }
  const double q = upper ? xi.q_upper : xi.q_lower;
  if (d == 1) return y / ctx.pi / ctx.mu11_hurt;
  const bool keep = upper ? y <= q : y >= q;
  return keep ? -y / (1.0 - ctx.pi) / ctx.mu11_hurt : 0.0;
}

double moment_correction(int d, int s, double y, const RowNuisance& xi, const MomentContext& ctx, MomentSide side) {
  if (s == 0) return 0.0;
  const bool upper = side == MomentSide::Upper;
  const double q = upper ? xi.q_upper : xi.q_lower;
  // -q times the matching selection-share terms; mean zero at the true nuisance.
  if (xi.region == Region::Help) {
    if (d == 1) {
      const bool keep = upper ? y >= q : y <= q;
      return keep ? -q / ctx.pi / ctx.mu10_help : 0.0;
    }
    return q / (1.0 - ctx.pi) / ctx.mu10_help;
  }
  if (d == 1) return -q / ctx.pi / ctx.mu11_hurt;
  const bool keep = upper ? y <= q : y >= q;
  return keep ? q / (1.0 - ctx.pi) / ctx.mu11_hurt : 0.0;
}

double moment_g(int d, int s, double y, const RowNuisance& xi, const MomentContext& ctx, MomentSide side) {
  return moment_m(d, s, y, xi, ctx, side) + moment_correction(d, s, y, xi, ctx, side);
}

namespace {

BoundsEstimate orthogonal_on_rows(const Dataset& data, const Eigen::VectorXd& y, const std::vector<std::size_t>& rows,
                                  const NuisanceBundle& bundle, const std::string& method, bool estimated_pi) {
  BoundsEstimate est;
  est.method = method;
  est.n = rows.size();
  est.weight.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    est.weight(static_cast<Eigen::Index>(k)) = data.w(rows[k]);
    if (data.has_clusters()) est.cluster.push_back(data.cluster[rows[k]]);
  }
  MomentContext ctx{bundle.pi, bundle.mu10_help, bundle.mu11_hurt, estimated_pi};
  fill_series(data, y, rows, bundle.rows, ctx, est.g_L, est.g_U);
  est.beta_L = weighted_mean(est.g_L, est.weight);
  est.beta_U = weighted_mean(est.g_U, est.weight);
  normalizer_adjustment(data, rows, bundle.rows, ctx, est);
  est.help_share = bundle.regions.help_share;
  est.hurt_share = bundle.regions.hurt_share;
  est.diagnostics["pi"] = bundle.pi;
  est.diagnostics["mu10_help"] = bundle.mu10_help;
  est.diagnostics["mu11_hurt"] = bundle.mu11_hurt;
  return est;
}

}  // namespace

BoundsEstimate orthogonal_bounds(const Dataset& data, const std::vector<std::size_t>& rows, const NuisanceBundle& bundle) {
  auto est = orthogonal_on_rows(data, outcome_column(data, 0), rows, bundle, "orthogonal", false);
  attach_variance(est, true);
  return est;
}

BoundsEstimate crossfit_bounds(const Dataset& data, const CrossfitOptions& opt) {
  return crossfit_bounds(data, outcome_column(data, opt.outcome_column), opt);
}

std::vector<SelectionFit> crossfit_selection(const Dataset& data, const CrossfitOptions& opt) {
  const FoldPartition folds = kfold_partition(data.n(), opt.K, opt.seed);
  std::vector<SelectionFit> out(static_cast<std::size_t>(opt.K));
  parallel_for(static_cast<std::size_t>(opt.K), opt.threads, [&](std::size_t k) {
    try {
      out[k] = fit_selection(data, folds.complement_rows(static_cast<int>(k)), opt.first_stage);
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(k) + ": " + e.what());
    }
  });
  return out;
}

BoundsEstimate crossfit_bounds(const Dataset& data, const Eigen::VectorXd& y, const CrossfitOptions& opt) {
  return crossfit_bounds(data, y, opt, nullptr);
}

BoundsEstimate crossfit_bounds(const Dataset& data, const Eigen::VectorXd& y, const CrossfitOptions& opt,
                               const std::vector<SelectionFit>* selection) {
  if (selection && selection->size() != static_cast<std::size_t>(opt.K))
    fail(ErrorKind::Shape, "one selection fit per fold is required");
  const FoldPartition folds = kfold_partition(data.n(), opt.K, opt.seed);
  const double pi = opt.propensity == PropensityKind::Known ? opt.pi : sample_propensity(data);
  std::vector<BoundsEstimate> parts(static_cast<std::size_t>(opt.K));
  std::vector<std::vector<std::size_t>> eval(static_cast<std::size_t>(opt.K));
  parallel_for(static_cast<std::size_t>(opt.K), opt.threads, [&](std::size_t k) {
    const int fold = static_cast<int>(k);
    try {
      const auto train = folds.complement_rows(fold);
      eval[k] = folds.fold_rows(fold);
      SelectionFit sel = selection ? (*selection)[k] : fit_selection(data, train, opt.first_stage);
      QuantileGridFit grid = fit_quantile_grid(data, y, train, opt.first_stage);
      auto model = std::make_shared<FittedNuisance>(std::move(sel), std::move(grid));
      const NuisanceBundle b = assemble_bundle(model, data, eval[k], pi);
      parts[k] = orthogonal_on_rows(data, y, eval[k], b, "crossfit", opt.propensity == PropensityKind::SampleShare);
      parts[k].diagnostics["selection_support"] = static_cast<double>(model->selection().support.size());
      parts[k].diagnostics["grid_support_treated"] = static_cast<double>(model->grid().support[1].size());
      parts[k].diagnostics["grid_support_control"] = static_cast<double>(model->grid().support[0].size());
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(fold) + ": " + e.what());
    }
  });
  BoundsEstimate est = base_estimate(data, "crossfit");
  est.g_L.resize(static_cast<Eigen::Index>(data.n()));
  est.g_U.resize(static_cast<Eigen::Index>(data.n()));
  est.adj_L.resize(static_cast<Eigen::Index>(data.n()));
  est.adj_U.resize(static_cast<Eigen::Index>(data.n()));
  double help = 0.0, wsum = 0.0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& part = parts[k];
    for (std::size_t r = 0; r < eval[k].size(); ++r) {
      est.g_L(static_cast<Eigen::Index>(eval[k][r])) = part.g_L(static_cast<Eigen::Index>(r));
      est.g_U(static_cast<Eigen::Index>(eval[k][r])) = part.g_U(static_cast<Eigen::Index>(r));
      est.adj_L(static_cast<Eigen::Index>(eval[k][r])) = part.adj_L(static_cast<Eigen::Index>(r));
      est.adj_U(static_cast<Eigen::Index>(eval[k][r])) = part.adj_U(static_cast<Eigen::Index>(r));
    }
    const double wk = part.weight.sum();
    help += part.help_share * wk;
    wsum += wk;
    for (const auto& [key, v] : part.diagnostics) est.diagnostics["fold" + std::to_string(k) + "_" + key] = v;
  }
  est.beta_L = weighted_mean(est.g_L, est.weight);
  est.beta_U = weighted_mean(est.g_U, est.weight);
  est.help_share = help / wsum;
  est.hurt_share = 1.0 - est.help_share;
  est.diagnostics["K"] = opt.K;
  est.diagnostics["pi"] = pi;
  attach_variance(est, opt.cluster_variance);
  return est;
}

std::shared_ptr<const NuisanceModel> constant_nuisance(const Dataset& data) {
  double W[2] = {0, 0}, Ws[2] = {0, 0};
  auto vals = std::make_shared<std::array<std::vector<double>, 2>>();
  auto wts = std::make_shared<std::array<std::vector<double>, 2>>();
  for (std::size_t i = 0; i < data.n(); ++i) {
    const int d = data.d(i);
    W[d] += data.w(i);
    if (data.s(i) == 1) {
      Ws[d] += data.w(i);
      (*vals)[static_cast<std::size_t>(d)].push_back(data.y(i));
      (*wts)[static_cast<std::size_t>(d)].push_back(data.w(i));
    }
  }
  if (W[0] <= 0 || W[1] <= 0 || Ws[0] <= 0 || Ws[1] <= 0)
    fail(ErrorKind::InsufficientData, "both arms need selected rows");
  const double s0 = Ws[0] / W[0], s1 = Ws[1] / W[1];
  const RowNuisance fixed = make_row_nuisance(s0, s1, [&](int g, double level) {
    return empirical_quantile((*vals)[static_cast<std::size_t>(g)], (*wts)[static_cast<std::size_t>(g)], level);
  });
  return std::make_shared<PluginNuisance>([fixed](const RowRef&) { return fixed; });
}

BoundsEstimate bounds_from_nuisance(const Dataset& data, std::shared_ptr<const NuisanceModel> model, double pi) {
  const auto rows = all_rows(data);
  const NuisanceBundle b = assemble_bundle(std::move(model), data, rows, pi);
  auto est = orthogonal_on_rows(data, data.outcome.col(0), rows, b, "plugin", false);
  est.cluster = data.cluster;
  attach_variance(est, true);
  return est;
}

BoundsEstimate fit_and_evaluate(const Dataset& train, const Dataset& eval, const CrossfitOptions& opt) {
  const Eigen::VectorXd ytrain = outcome_column(train, opt.outcome_column);
  const auto train_rows = all_rows(train);
  SelectionFit sel = fit_selection(train, train_rows, opt.first_stage);
  QuantileGridFit grid = fit_quantile_grid(train, ytrain, train_rows, opt.first_stage);
  auto model = std::make_shared<FittedNuisance>(std::move(sel), std::move(grid));
  const double pi = opt.propensity == PropensityKind::Known ? opt.pi : sample_propensity(eval);
  const auto rows = all_rows(eval);
  const NuisanceBundle b = assemble_bundle(model, eval, rows, pi);
  auto est = orthogonal_on_rows(eval, outcome_column(eval, opt.outcome_column), rows, b, "split", opt.propensity == PropensityKind::SampleShare);
  attach_variance(est, opt.cluster_variance);
  return est;
}

BoundsEstimate sort_bounds(const BoundsEstimate& in) {
  BoundsEstimate est = in;
  est.sorted = true;
  if (in.beta_L > in.beta_U) {
    est.swapped = true;
    std::swap(est.beta_L, est.beta_U);
    std::swap(est.g_L, est.g_U);
    std::swap(est.adj_L, est.adj_U);
    est.omega(0, 0) = in.omega(1, 1);
    est.omega(1, 1) = in.omega(0, 0);
  }
  return est;
}

void attach_variance(BoundsEstimate& est, bool use_clusters) {
  Eigen::VectorXd vL = est.g_L, vU = est.g_U;
  if (est.adj_L.size() == vL.size() && est.adj_U.size() == vU.size()) {
    vL += est.adj_L;
    vU += est.adj_U;
  }
  if (use_clusters && !est.cluster.empty()) {
    est.omega = cluster_variance(vL, vU, est.cluster, est.weight);
    est.n_units = std::set<std::int64_t>(est.cluster.begin(), est.cluster.end()).size();
    est.clustered = true;
    est.n_scale = static_cast<double>(est.n) * static_cast<double>(est.n) / static_cast<double>(est.n_units);
  } else {
    est.omega = variance_matrix(vL, vU, est.weight);
    est.n_units = est.n;
    est.clustered = false;
    est.n_scale = static_cast<double>(est.n);
  }
}

}  // namespace leebounds
