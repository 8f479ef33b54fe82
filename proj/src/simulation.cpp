#include "leebounds/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "leebounds/errors.hpp"
#include "leebounds/inference.hpp"
#include "leebounds/numeric.hpp"

namespace leebounds {

namespace {

constexpr double kCellX1[4] = {0, 1, 0, 1};
constexpr double kCellX2[4] = {0, 0, 1, 1};

int cell_of(double x1, double x2) { return (x1 > 0.5 ? 1 : 0) + (x2 > 0.5 ? 2 : 0); }

struct Mixture {
  std::vector<double> w, m;
  double sigma = 1.0;

  double survival(double q) const {
    double s = 0.0, tot = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      s += w[k] * (1.0 - normal_cdf((q - m[k]) / sigma));
      tot += w[k];
    }
    return s / tot;
  }
  double mean() const {
    double s = 0.0, tot = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      s += w[k] * m[k];
      tot += w[k];
    }
    return s / tot;
  }
  // Quantile at which the upper tail holds the given share.
  double upper_point(double share) const {
    double lo = *std::min_element(m.begin(), m.end()) - 40 * sigma;
    double hi = *std::max_element(m.begin(), m.end()) + 40 * sigma;
    for (int it = 0; it < 400 && hi - lo > 1e-15 * (1 + std::abs(lo) + std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (survival(mid) > share ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
  // Mean of the top (keep_top) or bottom share.
  double tail_mean(double share, bool keep_top) const {
    if (share >= 1.0) return mean();
    const double q = keep_top ? upper_point(share) : upper_point(1.0 - share);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double z = (q - m[k]) / sigma;
      if (keep_top) {
        const double tail = 1.0 - normal_cdf(z);
        num += w[k] * (m[k] * tail + sigma * normal_pdf(z));
        den += w[k] * tail;
      } else {
        const double tail = normal_cdf(z);
        num += w[k] * (m[k] * tail - sigma * normal_pdf(z));
        den += w[k] * tail;
      }
    }
    return num / den;
  }
};

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<Region> cell_labels(const DgpConfig& cfg) {
  std::vector<Region> labels;
  for (const auto& c : cell_truth(cfg)) labels.push_back(c.region);
  return labels;
}

// Region id per row (help = 0, hurt = 1) compacted to the regions present.
std::vector<int> region_cells(const std::vector<Region>& per_row, std::vector<Region>& labels) {
  bool present[2] = {false, false};
  for (Region r : per_row) present[r == Region::Help ? 0 : 1] = true;
  labels.clear();
  int id[2] = {-1, -1};
  for (int r = 0; r < 2; ++r)
    if (present[r]) {
      id[r] = static_cast<int>(labels.size());
      labels.push_back(r == 0 ? Region::Help : Region::Hurt);
    }
  std::vector<int> cells;
  for (Region r : per_row) cells.push_back(id[r == Region::Help ? 0 : 1]);
  return cells;
}

}  // namespace

void DgpConfig::validate() const {
  if (!(sigma > 0)) fail(ErrorKind::Parameter, "sigma must be positive");
  double tot = 0.0;
  for (double p : cell_prob) {
    if (p < 0) fail(ErrorKind::Parameter, "cell probabilities must be nonnegative");
    tot += p;
  }
  if (std::abs(tot - 1.0) > 1e-9) fail(ErrorKind::Parameter, "cell probabilities must sum to one");
  if (!(rho > -1 && rho < 1)) fail(ErrorKind::Parameter, "rho must lie in (-1,1)");
  if (!(pi > 0 && pi < 1)) fail(ErrorKind::Parameter, "pi must lie in (0,1)");
  if (n_noise < 0) fail(ErrorKind::Parameter, "n_noise must be nonnegative");
  if (population_size < 2) fail(ErrorKind::Parameter, "population size must be at least 2");
}

std::string DgpConfig::canonical() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "alpha=" << alpha[0] << ',' << alpha[1] << ',' << alpha[2] << ";gamma=" << gamma[0] << ',' << gamma[1] << ','
     << gamma[2] << ";kappa=" << kappa[0] << ',' << kappa[1] << ";sigma=" << sigma << ";cells=" << cell_prob[0] << ','
     << cell_prob[1] << ',' << cell_prob[2] << ',' << cell_prob[3] << ";n_noise=" << n_noise << ";rho=" << rho
     << ";pi=" << pi << ";population=" << population_size << ";population_seed=" << population_seed;
  return os.str();
}

std::uint64_t config_hash(const DgpConfig& cfg) { return fnv1a64(cfg.canonical()); }

std::array<CellTruth, 4> cell_truth(const DgpConfig& cfg) {
  std::array<CellTruth, 4> out;
  for (int c = 0; c < 4; ++c) {
    CellTruth& t = out[static_cast<std::size_t>(c)];
    t.x1 = kCellX1[c];
    t.x2 = kCellX2[c];
    t.prob = cfg.cell_prob[static_cast<std::size_t>(c)];
    const double eta0 = cfg.alpha[0] + cfg.alpha[1] * t.x1 + cfg.alpha[2] * t.x2;
    const double g = cfg.gamma[0] + cfg.gamma[1] * t.x1 + cfg.gamma[2] * t.x2;
    t.s0 = logistic(eta0);
    t.s1 = logistic(eta0 + g);
    t.p = g == 0.0 ? 1.0 : t.s0 / t.s1;
    t.region = region_of(t.p);
    t.mean = cfg.kappa[0] + cfg.kappa[1] * t.x1;
    const double sg = cfg.sigma;
    if (t.region == Region::Help) {
      t.beta_U = sg * normal_pdf(normal_quantile(1.0 - t.p)) / t.p;
      t.beta_L = -sg * normal_pdf(normal_quantile(t.p)) / t.p;
    } else {
      t.beta_U = sg * normal_pdf(normal_quantile(1.0 / t.p)) * t.p;
      t.beta_L = -sg * normal_pdf(normal_quantile(1.0 - 1.0 / t.p)) * t.p;
    }
  }
  return out;
}

OracleBounds oracle_bounds(const DgpConfig& cfg) {
  cfg.validate();
  double mass[2] = {0, 0}, norm[2] = {0, 0}, nL[2] = {0, 0}, nU[2] = {0, 0};
  for (const auto& t : cell_truth(cfg)) {
    if (t.prob == 0) continue;
    const int r = t.region == Region::Help ? 0 : 1;
    const double at = t.prob * (r == 0 ? t.s0 : t.s1);
    mass[r] += t.prob;
    norm[r] += at;
    nL[r] += at * t.beta_L;
    nU[r] += at * t.beta_U;
  }
  OracleBounds o;
  for (int r = 0; r < 2; ++r) {
    if (mass[r] <= 0) continue;
    o.beta_L += mass[r] * nL[r] / norm[r];
    o.beta_U += mass[r] * nU[r] / norm[r];
  }
  o.mu10_help = mass[0] > 0 ? norm[0] / mass[0] : std::nan("");
  o.mu11_hurt = mass[1] > 0 ? norm[1] / mass[1] : std::nan("");
  o.help_share = mass[0];
  return o;
}

OracleBounds basic_population_bounds(const DgpConfig& cfg) {
  cfg.validate();
  OracleBounds o;
  const auto cells = cell_truth(cfg);
  for (int r = 0; r < 2; ++r) {
    const Region region = r == 0 ? Region::Help : Region::Hurt;
    Mixture treated, control;
    treated.sigma = control.sigma = cfg.sigma;
    double mass = 0.0, a0 = 0.0, a1 = 0.0;
    for (const auto& t : cells) {
      if (t.region != region || t.prob == 0) continue;
      mass += t.prob;
      a0 += t.prob * t.s0;
      a1 += t.prob * t.s1;
      treated.w.push_back(t.prob * t.s1);
      treated.m.push_back(t.mean);
      control.w.push_back(t.prob * t.s0);
      control.m.push_back(t.mean);
    }
    if (mass == 0) continue;
    const double p = a0 / a1;
    double bL, bU;
    if (region == Region::Help) {
      bU = treated.tail_mean(p, true) - control.mean();
      bL = treated.tail_mean(p, false) - control.mean();
    } else {
      bU = treated.mean() - control.tail_mean(1.0 / p, false);
      bL = treated.mean() - control.tail_mean(1.0 / p, true);
    }
    o.beta_L += mass * bL;
    o.beta_U += mass * bU;
    if (r == 0) {
      o.help_share = mass;
      o.mu10_help = a0 / mass;
    } else {
      o.mu11_hurt = a1 / mass;
    }
  }
  return o;
}

Dataset draw_sample(const DgpConfig& cfg, std::size_t n, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x647261770ULL));
  const int k = cfg.n_noise;
  const Eigen::Index N = static_cast<Eigen::Index>(n);
  Eigen::VectorXi D(N), S(N);
  Eigen::MatrixXd Y(N, 1), X(N, 3 + k);
  const double m1 = cfg.cell_prob[1] + cfg.cell_prob[3], m2 = cfg.cell_prob[2] + cfg.cell_prob[3];
  const double sd1 = std::sqrt(std::max(m1 * (1 - m1), 1e-12)), sd2 = std::sqrt(std::max(m2 * (1 - m2), 1e-12));
  const double resid = std::sqrt(1.0 - cfg.rho * cfg.rho);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double u = rng.uniform();
    int c = 0;
    double acc = cfg.cell_prob[0];
    while (c < 3 && u > acc) acc += cfg.cell_prob[static_cast<std::size_t>(++c)];
    const double x1 = kCellX1[c], x2 = kCellX2[c];
    const int d = rng.bernoulli(cfg.pi) ? 1 : 0;
    const double eta = cfg.alpha[0] + cfg.alpha[1] * x1 + cfg.alpha[2] * x2 +
                       d * (cfg.gamma[0] + cfg.gamma[1] * x1 + cfg.gamma[2] * x2);
    const int s = eta + rng.logistic_draw() >= 0.0 ? 1 : 0;
    D(i) = d;
    S(i) = s;
    Y(i, 0) = cfg.kappa[0] + cfg.kappa[1] * x1 + cfg.sigma * rng.normal();
    X(i, 0) = 1.0;
    X(i, 1) = x1;
    X(i, 2) = x2;
    for (int j = 0; j < k; ++j) {
      const double base = j % 2 == 0 ? (x1 - m1) / sd1 : (x2 - m2) / sd2;
      X(i, 3 + j) = cfg.rho * base + resid * rng.normal();
    }
  }
  std::vector<std::string> names{"const", "X1", "X2"};
  for (int j = 0; j < k; ++j) names.push_back("Z" + std::to_string(j + 1));
  return make_dataset(D, S, Y, X, Eigen::VectorXd(), {}, names, {"Y"});
}

std::vector<int> true_cells(const Dataset& data) {
  const int c1 = data.covariate_index("X1"), c2 = data.covariate_index("X2");
  if (c1 < 0 || c2 < 0) fail(ErrorKind::Schema, "simulated data needs X1 and X2 columns");
  std::vector<int> cells(data.n());
  for (std::size_t i = 0; i < data.n(); ++i)
    cells[i] = cell_of(data.covariates(static_cast<Eigen::Index>(i), c1), data.covariates(static_cast<Eigen::Index>(i), c2));
  return cells;
}

double fractional_trim_mean(const std::vector<double>& values, const std::vector<double>& weights, double keep_share,
                            bool keep_top) {
  if (values.empty()) fail(ErrorKind::InsufficientData, "trimmed mean of an empty sample");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return keep_top ? values[a] > values[b] : values[a] < values[b];
  });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double budget = std::min(keep_share, 1.0) * total, num = 0.0, den = 0.0;
  for (std::size_t k : idx) {
    if (budget <= 0) break;
    const double take = std::min(weights[k], budget);
    num += take * values[k];
    den += take;
    budget -= take;
  }
  return num / den;
}

OracleBounds finite_population_bounds(const Dataset& data, const std::vector<int>& cells,
                                      const std::vector<Region>& labels) {
  const int J = static_cast<int>(labels.size());
  std::vector<double> W(static_cast<std::size_t>(2 * J), 0.0), Ws(static_cast<std::size_t>(2 * J), 0.0);
  std::vector<std::vector<double>> vals(static_cast<std::size_t>(2 * J)), wts(static_cast<std::size_t>(2 * J));
  double total = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const std::size_t slot = static_cast<std::size_t>(2 * cells[i] + data.d(i));
    W[slot] += data.w(i);
    total += data.w(i);
    if (data.s(i)) {
      Ws[slot] += data.w(i);
      vals[slot].push_back(data.y(i));
      wts[slot].push_back(data.w(i));
    }
  }
  double mass[2] = {0, 0}, norm[2] = {0, 0}, nL[2] = {0, 0}, nU[2] = {0, 0};
  for (int j = 0; j < J; ++j) {
    const std::size_t c0 = static_cast<std::size_t>(2 * j), c1 = c0 + 1;
    if (W[c0] + W[c1] == 0) continue;
    if (vals[c0].empty() || vals[c1].empty())
      fail(ErrorKind::CellSupport, "cell " + std::to_string(j) + " lacks selected rows in an arm");
    const double s0 = Ws[c0] / W[c0], s1 = Ws[c1] / W[c1], p = s0 / s1;
    const int r = labels[static_cast<std::size_t>(j)] == Region::Help ? 0 : 1;
    double bL, bU;
    if (r == 0) {
      const double mc = fractional_trim_mean(vals[c0], wts[c0], 1.0, true);
      bU = fractional_trim_mean(vals[c1], wts[c1], p, true) - mc;
      bL = fractional_trim_mean(vals[c1], wts[c1], p, false) - mc;
    } else {
      const double mt = fractional_trim_mean(vals[c1], wts[c1], 1.0, true);
      bU = mt - fractional_trim_mean(vals[c0], wts[c0], 1.0 / p, false);
      bL = mt - fractional_trim_mean(vals[c0], wts[c0], 1.0 / p, true);
    }
    const double pj = (W[c0] + W[c1]) / total;
    const double at = pj * (r == 0 ? s0 : s1);
    mass[r] += pj;
    norm[r] += at;
    nL[r] += at * bL;
    nU[r] += at * bU;
  }
  OracleBounds o;
  for (int r = 0; r < 2; ++r) {
    if (mass[r] <= 0) continue;
    o.beta_L += mass[r] * nL[r] / norm[r];
    o.beta_U += mass[r] * nU[r] / norm[r];
  }
  o.help_share = mass[0];
  o.mu10_help = mass[0] > 0 ? norm[0] / mass[0] : std::nan("");
  o.mu11_hurt = mass[1] > 0 ? norm[1] / mass[1] : std::nan("");
  return o;
}

std::shared_ptr<const NuisanceModel> true_nuisance(const DgpConfig& cfg) {
  const auto cells = cell_truth(cfg);
  const double sigma = cfg.sigma;
  return std::make_shared<PluginNuisance>([cells, sigma](const RowRef& x) {
    const auto& t = cells[static_cast<std::size_t>(cell_of(x(1), x(2)))];
    RowNuisance r = make_row_nuisance(t.s0, t.s1, [&](int, double level) {
      return t.mean + sigma * normal_quantile(std::clamp(level, 1e-12, 1.0 - 1e-12));
    });
    r.p = t.p;
    r.region = t.region;
    return r;
  });
}

const char* method_name(McMethod m) {
  switch (m) {
    case McMethod::Oracle: return "oracle";
    case McMethod::Basic: return "basic";
    case McMethod::Naive: return "naive";
    case McMethod::Better: return "better";
  }
  return "unknown";
}

McMethod parse_method(const std::string& s) {
  for (McMethod m : {McMethod::Oracle, McMethod::Basic, McMethod::Naive, McMethod::Better})
    if (s == method_name(m)) return m;
  fail(ErrorKind::Parameter, "unknown simulation method '" + s + "'");
}

McReport run_monte_carlo(const DgpConfig& cfg, const McOptions& opt) {
  cfg.validate();
  if (opt.runs < 1) fail(ErrorKind::Parameter, "runs must be at least 1");
  if (opt.n < 10) fail(ErrorKind::Parameter, "sample size too small");
  McReport rep;
  rep.config = cfg;
  rep.options = opt;
  rep.config_hash = config_hash(cfg);
  rep.analytic_sharp = oracle_bounds(cfg);
  rep.analytic_basic = basic_population_bounds(cfg);
  const std::vector<Region> labels = cell_labels(cfg);

  Dataset population;
  if (opt.resample_population) {
    population = draw_sample(cfg, cfg.population_size, cfg.population_seed);
    rep.target_sharp = finite_population_bounds(population, true_cells(population), labels);
    std::vector<Region> per_row, rlabels;
    for (int c : true_cells(population)) per_row.push_back(labels[static_cast<std::size_t>(c)]);
    const auto rcells = region_cells(per_row, rlabels);
    rep.target_basic = finite_population_bounds(population, rcells, rlabels);
  } else {
    rep.target_sharp = rep.analytic_sharp;
    rep.target_basic = rep.analytic_basic;
  }

  struct Outcome {
    bool ok = false;
    std::string reason;
    double L = 0, U = 0, seL = 0, seU = 0;
  };
  const std::size_t M = opt.methods.size();
  std::vector<std::vector<Outcome>> results(static_cast<std::size_t>(opt.runs), std::vector<Outcome>(M));

  parallel_for(static_cast<std::size_t>(opt.runs), opt.threads, [&](std::size_t run) {
    const std::uint64_t rseed = mix_seed(opt.seed, 0x6d63ULL, run);
    Dataset sample;
    if (opt.resample_population) {
      Rng rng(rseed);
      std::vector<std::size_t> rows(opt.n);
      for (auto& r : rows) r = rng.index(population.n());
      sample = subset(population, rows);
    } else {
      sample = draw_sample(cfg, opt.n, rseed);
    }
    for (std::size_t m = 0; m < M; ++m) {
      Outcome& out = results[run][m];
      try {
        BoundsEstimate est;
        switch (opt.methods[m]) {
          case McMethod::Oracle:
            est = cell_bounds(sample, true_cells(sample), labels);
            break;
          case McMethod::Basic: {
            FirstStageOptions fs;
            fs.selection = SelectionLearner::Logistic;
            std::vector<std::size_t> all(sample.n());
            std::iota(all.begin(), all.end(), std::size_t{0});
            const SelectionFit sel = fit_selection(sample, all, fs);
            std::vector<Region> rlabels;
            const auto rcells = region_cells(classify_regions(sel, sample).label, rlabels);
            est = cell_bounds(sample, rcells, rlabels);
            break;
          }
          case McMethod::Naive:
          case McMethod::Better: {
            CrossfitOptions co;
            co.K = opt.K;
            co.seed = mix_seed(rseed, 0x6366ULL);
            if (opt.methods[m] == McMethod::Naive) {
              co.first_stage.selection = SelectionLearner::Logistic;
              co.first_stage.quantile = QuantileLearner::Quantile;
            }
            est = crossfit_bounds(sample, co);
            break;
          }
        }
        out.L = est.beta_L;
        out.U = est.beta_U;
        out.seL = est.se_L();
        out.seU = est.se_U();
        out.ok = std::isfinite(out.L) && std::isfinite(out.U) && std::isfinite(out.seL) && std::isfinite(out.seU);
        if (!out.ok) out.reason = "non-finite estimate";
      } catch (const Error& e) {
        out.reason = kind_name(e.kind());
      }
    }
  });

  const double z = normal_quantile(1.0 - (1.0 - opt.level) / 2.0);
  for (std::size_t m = 0; m < M; ++m) {
    McMethodSummary s;
    s.method = opt.methods[m];
    const OracleBounds& target = s.method == McMethod::Basic ? rep.target_basic : rep.target_sharp;
    s.target_L = target.beta_L;
    s.target_U = target.beta_U;
    std::vector<double> L, U, seL, seU;
    int covL = 0, covU = 0;
    for (int run = 0; run < opt.runs; ++run) {
      const Outcome& o = results[static_cast<std::size_t>(run)][m];
      if (!o.ok) {
        ++s.failures[o.reason];
        continue;
      }
      L.push_back(o.L);
      U.push_back(o.U);
      seL.push_back(o.seL);
      seU.push_back(o.seU);
      covL += std::abs(o.L - s.target_L) <= z * o.seL ? 1 : 0;
      covU += std::abs(o.U - s.target_U) <= z * o.seU ? 1 : 0;
    }
    s.completed = static_cast<int>(L.size());
    if (s.completed > 0) {
      s.bias_L = mean_of(L) - s.target_L;
      s.bias_U = mean_of(U) - s.target_U;
      s.sd_L = sd_of(L);
      s.sd_U = sd_of(U);
      s.coverage_L = static_cast<double>(covL) / s.completed;
      s.coverage_U = static_cast<double>(covU) / s.completed;
      s.mean_se_L = mean_of(seL);
      s.mean_se_U = mean_of(seU);
    }
    rep.methods.push_back(s);
  }
  return rep;
}

std::string format_mc_table(const McReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "Monte Carlo: n=" << r.options.n << " runs=" << r.options.runs << " seed=" << r.options.seed
     << " config_hash=" << std::hex << r.config_hash << std::dec << "\n";
  os << "sharp bounds [computed]: analytic [" << r.analytic_sharp.beta_L << ", " << r.analytic_sharp.beta_U
     << "], target [" << r.target_sharp.beta_L << ", " << r.target_sharp.beta_U << "]\n";
  os << "basic bounds [computed]: analytic [" << r.analytic_basic.beta_L << ", " << r.analytic_basic.beta_U
     << "], target [" << r.target_basic.beta_L << ", " << r.target_basic.beta_U << "]\n";
  os << std::setw(8) << "method" << std::setw(10) << "bias_L" << std::setw(10) << "bias_U" << std::setw(10) << "sd_L"
     << std::setw(10) << "sd_U" << std::setw(10) << "cover_L" << std::setw(10) << "cover_U" << std::setw(8) << "done"
     << "\n";
  for (const auto& m : r.methods) {
    os << std::setw(8) << method_name(m.method) << std::setw(10) << m.bias_L << std::setw(10) << m.bias_U
       << std::setw(10) << m.sd_L << std::setw(10) << m.sd_U << std::setw(10) << m.coverage_L << std::setw(10)
       << m.coverage_U << std::setw(8) << m.completed << "\n";
  }
  return os.str();
}

std::string mc_csv(const McReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "method,target_L,target_U,bias_L,bias_U,sd_L,sd_U,coverage_L,coverage_U,mean_se_L,mean_se_U,completed,failed\n";
  for (const auto& m : r.methods) {
    int failed = 0;
    for (const auto& [k, v] : m.failures) failed += v;
    os << method_name(m.method) << ',' << m.target_L << ',' << m.target_U << ',' << m.bias_L << ',' << m.bias_U << ','
       << m.sd_L << ',' << m.sd_U << ',' << m.coverage_L << ',' << m.coverage_U << ',' << m.mean_se_L << ','
       << m.mean_se_U << ',' << m.completed << ',' << failed << "\n";
  }
  return os.str();
}

}  // namespace leebounds
