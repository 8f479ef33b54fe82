#include "leebounds/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace leebounds {

namespace {

// JSON has no NaN; missing values are written as null.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

const char* side_name(MomentSide s) { return s == MomentSide::Lower ? "lower" : "upper"; }

Json trim_json(const TrimmedSample& t) {
  Json j;
  j["side"] = side_name(t.side);
  j["retained"] = t.retained.size();
  j["selected_per_stratum"] = t.selected_per_stratum;
  j["trimmed_per_stratum"] = t.trimmed_per_stratum;
  Json p = Json::array();
  for (double v : t.p) p.push_back(num(v));
  j["p"] = p;
  if (t.seed) j["seed"] = t.seed;
  return j;
}

Json regression_json(const RegressionBound& r, bool late) {
  Json j;
  j["coef"] = num(r.coef);
  j["se"] = num(r.se);
  j["n"] = r.n;
  if (late) {
    j["first_stage_t"] = num(r.first_stage_t);
    j["weak_instrument"] = r.weak_instrument;
  }
  return j;
}

Json oracle_json(const OracleBounds& o) {
  Json j;
  j["beta_L"] = num(o.beta_L);
  j["beta_U"] = num(o.beta_U);
  j["help_share"] = num(o.help_share);
  return j;
}

}  // namespace

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Json to_json(const BoundsEstimate& est) {
  Json j;
  j["method"] = est.method;
  j["beta_L"] = num(est.beta_L);
  j["beta_U"] = num(est.beta_U);
  j["se_L"] = num(est.se_L());
  j["se_U"] = num(est.se_U());
  j["n"] = est.n;
  j["n_units"] = est.n_units;
  j["clustered"] = est.clustered;
  j["sorted"] = est.sorted;
  j["swapped"] = est.swapped;
  j["help_share"] = num(est.help_share);
  j["hurt_share"] = num(est.hurt_share);
  Json d = Json::object();
  for (const auto& [k, v] : est.diagnostics) d[k] = num(v);
  j["diagnostics"] = d;
  return j;
}

Json to_json(const ConfidenceRegion& cr) {
  Json j;
  j["kind"] = region_kind_name(cr.kind);
  j["level"] = cr.level;
  j["lower"] = num(cr.lower);
  j["upper"] = num(cr.upper);
  j["empty"] = cr.empty;
  j["critical_lower"] = num(cr.critical_lower);
  j["critical_upper"] = num(cr.critical_upper);
  if (cr.kind == RegionKind::Stoye) j["approximation"] = true;
  return j;
}

Json to_json(const SplitAggregate& agg, const std::vector<SplitEstimate>& splits) {
  Json j;
  j["beta_L"] = num(agg.beta_L);
  j["beta_U"] = num(agg.beta_U);
  j["region"] = to_json(agg.region);
  Json arr = Json::array();
  for (const auto& s : splits) {
    Json e;
    e["seed"] = s.seed;
    e["beta_L"] = num(s.beta_L);
    e["beta_U"] = num(s.beta_U);
    e["sd_L"] = num(s.sd_L);
    e["sd_U"] = num(s.sd_U);
    e["n_main"] = s.n_main;
    arr.push_back(e);
  }
  j["splits"] = arr;
  return j;
}

Json to_json(const MonotonicityTestResult& res) {
  Json j;
  j["null"] = std::string("Delta(x) ") + direction_name(res.direction);
  j["pi_hat"] = num(res.pi_hat);
  j["T"] = num(res.T);
  j["critical_05"] = num(res.critical_05);
  j["critical_01"] = num(res.critical_01);
  j["reject_05"] = res.reject_05;
  j["reject_01"] = res.reject_01;
  Json cells = Json::array();
  for (const auto& c : res.cells) {
    Json e;
    e["cell"] = c.cell;
    e["n"] = c.n;
    e["mean"] = num(c.mean);
    e["se"] = num(c.se);
    e["t"] = num(c.t);
    cells.push_back(e);
  }
  j["cells"] = cells;
  return j;
}

Json to_json(const DgpConfig& cfg) {
  Json j;
  j["alpha"] = cfg.alpha;
  j["gamma"] = cfg.gamma;
  j["kappa"] = cfg.kappa;
  j["sigma"] = cfg.sigma;
  j["cell_prob"] = cfg.cell_prob;
  j["n_noise"] = cfg.n_noise;
  j["rho"] = cfg.rho;
  j["pi"] = cfg.pi;
  j["population_size"] = cfg.population_size;
  j["population_seed"] = cfg.population_seed;
  return j;
}

Json to_json(const McReport& rep) {
  Json j;
  j["config"] = to_json(rep.config);
  j["config_hash"] = hex64(rep.config_hash);
  j["n"] = rep.options.n;
  j["runs"] = rep.options.runs;
  j["seed"] = rep.options.seed;
  j["K"] = rep.options.K;
  j["level"] = rep.options.level;
  j["resample_population"] = rep.options.resample_population;
  j["sharp_analytic"] = oracle_json(rep.analytic_sharp);
  j["sharp_target"] = oracle_json(rep.target_sharp);
  j["basic_analytic"] = oracle_json(rep.analytic_basic);
  j["basic_target"] = oracle_json(rep.target_basic);
  Json methods = Json::array();
  for (const auto& m : rep.methods) {
    Json e;
    e["method"] = method_name(m.method);
    e["target_L"] = num(m.target_L);
    e["target_U"] = num(m.target_U);
    e["bias_L"] = num(m.bias_L);
    e["bias_U"] = num(m.bias_U);
    e["sd_L"] = num(m.sd_L);
    e["sd_U"] = num(m.sd_U);
    e["coverage_L"] = num(m.coverage_L);
    e["coverage_U"] = num(m.coverage_U);
    e["mean_se_L"] = num(m.mean_se_L);
    e["mean_se_U"] = num(m.mean_se_U);
    e["completed"] = m.completed;
    Json f = Json::object();
    for (const auto& [k, v] : m.failures) f[k] = v;
    e["failures"] = f;
    methods.push_back(e);
  }
  j["methods"] = methods;
  return j;
}

Json to_json(const SupportCurve& curve) {
  Json j;
  j["dim"] = curve.dim();
  j["directions"] = curve.grid.size();
  j["bootstrap_draws"] = curve.bootstrap.rows();
  if (curve.bootstrap.rows() > 0) {
    j["band_level"] = curve.band_level;
    j["band_critical"] = num(curve.band_critical);
  }
  Json pts = Json::array();
  for (std::size_t k = 0; k < curve.grid.size(); ++k) {
    Json e;
    std::vector<double> q(curve.grid[k].data(), curve.grid[k].data() + curve.grid[k].size());
    e["q"] = q;
    e["sigma"] = num(curve.sigma(static_cast<Eigen::Index>(k)));
    e["se"] = num(curve.se(static_cast<Eigen::Index>(k)));
    pts.push_back(e);
  }
  j["curve"] = pts;
  return j;
}

Json to_json(const ProjectionBounds& b) {
  Json j;
  j["lower"] = num(b.lower);
  j["upper"] = num(b.upper);
  j["direction"] = std::vector<double>(b.direction.data(), b.direction.data() + b.direction.size());
  j["approximate"] = b.approximate;
  return j;
}

Json to_json(const Circle& c) {
  Json j;
  j["center"] = {num(c.center(0)), num(c.center(1))};
  j["radius"] = num(c.radius);
  j["rss"] = num(c.rss);
  return j;
}

Json to_json(const TrimRegResult& res) {
  Json j;
  j["estimand"] = res.late ? "LATE" : "ITT";
  j["lower"] = regression_json(res.lower, res.late);
  j["upper"] = regression_json(res.upper, res.late);
  j["swapped"] = res.swapped;
  j["bootstrap_draws"] = res.draws;
  j["failed_draws"] = res.failed_draws;
  j["trim_lower"] = trim_json(res.trim_lower);
  j["trim_upper"] = trim_json(res.trim_upper);
  return j;
}

std::string format_monotonicity(const MonotonicityTestResult& res) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "H0: Delta(x) %s in every cell; J=%zu; critical values %.3f (0.05) %.3f (0.01)\n",
                direction_name(res.direction), res.cells.size(), res.critical_05, res.critical_01);
  os << buf;
  os << "  cell        n       mean         se          t\n";
  for (const auto& c : res.cells) {
    std::snprintf(buf, sizeof buf, "%6d %8zu %10.5f %10.5f %10.3f\n", c.cell, c.n, c.mean, c.se, c.t);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "T = %.3f; reject at 0.05: %s; reject at 0.01: %s\n", res.T,
                res.reject_05 ? "yes" : "no", res.reject_01 ? "yes" : "no");
  os << buf;
  return os.str();
}

std::string format_trimreg(const TrimRegResult& res) {
  std::ostringstream os;
  char buf[160];
  os << (res.late ? "LATE" : "ITT") << " bounds (coefficient on D)\n";
  os << "  side        coef         se        n\n";
  for (const auto* r : {&res.lower, &res.upper}) {
    std::snprintf(buf, sizeof buf, "  %-5s %10.5f %10.5f %8zu\n", r == &res.lower ? "lower" : "upper", r->coef, r->se,
                  r->n);
    os << buf;
  }
  if (res.late && (res.lower.weak_instrument || res.upper.weak_instrument)) os << "  warning: weak first stage\n";
  return os.str();
}

}  // namespace leebounds
