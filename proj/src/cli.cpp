#include "leebounds/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "leebounds/bounds.hpp"
#include "leebounds/dataset.hpp"
#include "leebounds/errors.hpp"
#include "leebounds/inference.hpp"
#include "leebounds/monotonicity.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/report.hpp"
#include "leebounds/simulation.hpp"
#include "leebounds/support.hpp"
#include "leebounds/trimreg.hpp"
#include "leebounds/version.hpp"

namespace leebounds {

namespace {

// Flat JSON object: each key is a long option name, arrays give repeated values.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    Json doc;
    try {
      doc = Json::parse(input);
    } catch (const std::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      CLI::ConfigItem item;
      item.name = key;
      auto add = [&](const Json& v) {
        if (v.is_string())
          item.inputs.push_back(v.get<std::string>());
        else if (v.is_boolean())
          item.inputs.push_back(v.get<bool>() ? "true" : "false");
        else if (v.is_number())
          item.inputs.push_back(v.dump());
        else
          throw CLI::ConversionError("config key '" + key + "' has an unsupported value");
      };
      if (value.is_array()) {
        for (const auto& v : value) add(v);
      } else {
        add(value);
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

struct RunConfig {
  std::string command;
  std::string data;
  std::string treatment = "D";
  std::string selection = "S";
  std::vector<std::string> outcomes{"Y"};
  std::vector<std::string> covariates;
  std::string weight;
  std::string cluster;
  std::string instrument;
  std::string out;
  std::string text;
  std::string csv;
  std::uint64_t seed = 1;
  int threads = 1;

  // estimate
  std::vector<std::string> methods{"basic", "better"};
  std::vector<std::string> cells;
  int K = 2;
  double level = 0.95;
  std::string selection_learner = "lasso";
  std::string quantile_learner = "lasso";
  std::string propensity = "share";
  double pi = 0.5;
  bool no_cluster_variance = false;
  bool sorted = false;
  int splits = 0;
  double aux_fraction = 0.5;

  // test-monotonicity
  std::string direction = "nonneg";

  // simulate
  int runs = 500;
  std::size_t n = 3000;
  std::vector<std::string> mc_methods{"oracle", "basic", "better"};
  bool iid = false;
  int mc_K = 5;
  std::vector<double> alpha, gamma, kappa, cell_prob;
  double sigma = -1, rho = 2, sim_pi = -1;
  int n_noise = -1;

  // support
  int grid_size = 64;
  std::vector<std::string> directions;
  int bootstrap = 0;
  std::vector<double> zeta;
  bool growth = false;
  bool circle = false;

  // trimreg
  std::vector<std::string> strata;
  bool late = false;
  bool binary = false;
  int trim_bootstrap = 1000;
  double phi_floor = 0.05;

  Json to_json() const {
    Json j;
    j["command"] = command;
    auto put = [&](const char* k, const auto& v) { j[k] = v; };
    if (command != "simulate") {
      put("data", data);
      put("treatment", treatment);
      put("selection", selection);
      put("outcome", outcomes);
      put("covariates", covariates);
      put("weight", weight);
      put("cluster", cluster);
      put("instrument", instrument);
    }
    put("seed", seed);
    if (command == "estimate") {
      put("methods", methods);
      put("cells", cells);
      put("K", K);
      put("level", level);
      put("selection_learner", selection_learner);
      put("quantile_learner", quantile_learner);
      put("propensity", propensity);
      put("pi", pi);
      put("cluster_variance", !no_cluster_variance);
      put("sorted", sorted);
      put("splits", splits);
      put("aux_fraction", aux_fraction);
    } else if (command == "test-monotonicity") {
      put("cells", cells);
      put("direction", direction);
    } else if (command == "simulate") {
      put("runs", runs);
      put("n", n);
      put("mc_methods", mc_methods);
      put("iid", iid);
      put("K", mc_K);
      put("level", level);
    } else if (command == "support") {
      put("K", K);
      put("selection_learner", selection_learner);
      put("quantile_learner", quantile_learner);
      put("grid_size", grid_size);
      put("directions", directions);
      put("bootstrap", bootstrap);
      put("level", level);
      put("zeta", zeta);
      put("growth", growth);
      put("circle", circle);
    } else if (command == "trimreg") {
      put("strata", strata);
      put("late", late);
      put("binary", binary);
      put("bootstrap", trim_bootstrap);
      put("phi_floor", phi_floor);
    }
    return j;
  }
};

Dataset load(const RunConfig& c) {
  if (c.data.empty()) fail(ErrorKind::Parameter, "--data is required");
  CsvSchema schema;
  schema.treatment = c.treatment;
  schema.selection = c.selection;
  schema.outcomes = c.outcomes;
  schema.covariates = c.covariates;
  schema.weight = c.weight;
  schema.cluster = c.cluster;
  schema.instrument = c.instrument;
  return load_csv(c.data, schema);
}

std::vector<int> column_indices(const Dataset& data, const std::vector<std::string>& names, const char* what) {
  std::vector<int> cols;
  for (const auto& name : names) {
    const int j = data.covariate_index(name);
    if (j < 0) fail(ErrorKind::Schema, std::string(what) + " column '" + name + "' is not a covariate");
    cols.push_back(j);
  }
  return cols;
}

FirstStageOptions first_stage(const RunConfig& c) {
  FirstStageOptions fs;
  if (c.selection_learner == "logistic")
    fs.selection = SelectionLearner::Logistic;
  else if (c.selection_learner != "lasso")
    fail(ErrorKind::Parameter, "selection learner must be lasso or logistic");
  if (c.quantile_learner == "quantile")
    fs.quantile = QuantileLearner::Quantile;
  else if (c.quantile_learner != "lasso")
    fail(ErrorKind::Parameter, "quantile learner must be lasso or quantile");
  return fs;
}

CrossfitOptions crossfit_options(const RunConfig& c) {
  CrossfitOptions opt;
  opt.K = c.K;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.first_stage = first_stage(c);
  opt.cluster_variance = !c.no_cluster_variance;
  if (c.propensity == "known") {
    opt.propensity = PropensityKind::Known;
    opt.pi = c.pi;
    if (!(c.pi > 0 && c.pi < 1)) fail(ErrorKind::Parameter, "--pi must lie in (0,1)");
  } else if (c.propensity != "share") {
    fail(ErrorKind::Parameter, "propensity must be share or known");
  }
  return opt;
}

Json bounds_block(const BoundsEstimate& raw, const RunConfig& c) {
  const BoundsEstimate est = c.sorted ? sort_bounds(raw) : raw;
  Json j = to_json(est);
  j["set_region"] = to_json(set_confidence_region(est, c.level));
  j["imbens_manski"] = to_json(im_interval(est, c.level));
  j["stoye"] = to_json(stoye_interval(sort_bounds(est), c.level));
  return j;
}

// A method that fails is reported with its error; the first failure sets the exit code.
Json cmd_estimate(const RunConfig& c, int& status) {
  const Dataset data = load(c);
  if (!(c.level > 0 && c.level < 1)) fail(ErrorKind::Parameter, "--level must lie in (0,1)");
  std::vector<std::string> methods = c.methods;
  if (!c.cells.empty() && std::find(methods.begin(), methods.end(), "cell") == methods.end()) methods.push_back("cell");
  for (const auto& m : methods) {
    if (m != "basic" && m != "cell" && m != "better") fail(ErrorKind::Parameter, "unknown method '" + m + "'");
    if (m == "cell" && c.cells.empty()) fail(ErrorKind::Parameter, "method 'cell' needs --cells");
  }
  std::vector<int> cells;
  if (!c.cells.empty()) cells = cell_ids(data, column_indices(data, c.cells, "cell"));
  const CrossfitOptions opt = crossfit_options(c);

  Json res = Json::object();
  auto guarded = [&](const std::string& name, const std::function<Json()>& fn) {
    try {
      res[name] = fn();
    } catch (const Error& e) {
      res[name] = Json{{"error", e.what()}, {"error_kind", kind_name(e.kind())}};
      if (status == 0) status = exit_code_for(e.kind());
    }
  };
  for (const auto& m : methods) {
    if (m == "basic")
      guarded(m, [&] { return bounds_block(basic_bounds(data), c); });
    else if (m == "cell")
      guarded(m, [&] { return bounds_block(cell_bounds(data, cells), c); });
    else
      guarded(m, [&] { return bounds_block(crossfit_bounds(data, opt), c); });
  }
  if (c.splits > 0) {
    guarded("variational", [&] {
      const auto splits = agnostic_splits(data, c.splits, c.aux_fraction, opt, c.seed);
      return to_json(aggregate_splits(splits, (1.0 - c.level) / 2.0), splits);
    });
  }
  return res;
}

Json cmd_monotonicity(const RunConfig& c, std::string& text) {
  const Dataset data = load(c);
  if (c.cells.empty()) fail(ErrorKind::Parameter, "--cells is required");
  Direction dir = Direction::NonNegative;
  if (c.direction == "nonpos")
    dir = Direction::NonPositive;
  else if (c.direction != "nonneg")
    fail(ErrorKind::Parameter, "direction must be nonneg or nonpos");
  const auto res = test_monotonicity(data, cell_ids(data, column_indices(data, c.cells, "cell")), dir);
  text = format_monotonicity(res);
  return to_json(res);
}

Json cmd_simulate(const RunConfig& c, std::string& text, std::string& csv) {
  DgpConfig cfg;
  auto copy = [](const std::vector<double>& v, auto& dst, const char* name) {
    if (v.empty()) return;
    if (v.size() != dst.size()) fail(ErrorKind::Parameter, std::string("--") + name + " needs " + std::to_string(dst.size()) + " values");
    std::copy(v.begin(), v.end(), dst.begin());
  };
  copy(c.alpha, cfg.alpha, "alpha");
  copy(c.gamma, cfg.gamma, "gamma");
  copy(c.kappa, cfg.kappa, "kappa");
  copy(c.cell_prob, cfg.cell_prob, "cell-prob");
  if (c.sigma >= 0) cfg.sigma = c.sigma;
  if (c.rho <= 1) cfg.rho = c.rho;
  if (c.sim_pi >= 0) cfg.pi = c.sim_pi;
  if (c.n_noise >= 0) cfg.n_noise = c.n_noise;
  cfg.validate();
  McOptions opt;
  opt.n = c.n;
  opt.runs = c.runs;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.K = c.mc_K;
  opt.level = c.level;
  opt.resample_population = !c.iid;
  opt.methods.clear();
  for (const auto& m : c.mc_methods) opt.methods.push_back(parse_method(m));
  const McReport rep = run_monte_carlo(cfg, opt);
  text = format_mc_table(rep);
  csv = mc_csv(rep);
  return to_json(rep);
}

Json cmd_support(const RunConfig& c, std::string& csv) {
  const Dataset data = load(c);
  DirectionGrid grid;
  if (!c.directions.empty()) {
    std::vector<std::vector<double>> dirs;
    for (const auto& s : c.directions) {
      std::vector<double> v;
      std::stringstream ss(s);
      std::string tok;
      while (std::getline(ss, tok, ':')) {
        try {
          v.push_back(std::stod(tok));
        } catch (const std::exception&) {
          fail(ErrorKind::Parameter, "direction '" + s + "' is not a colon separated list of numbers");
        }
      }
      dirs.push_back(v);
    }
    grid = make_grid(dirs);
  } else {
    grid = default_grid(static_cast<int>(data.d_out()), c.grid_size);
  }
  SupportCurve curve = support_estimate(data, grid, crossfit_options(c));
  if (c.bootstrap > 0) weighted_bootstrap(curve, c.bootstrap, c.seed, c.level, c.threads);
  Json res = to_json(curve);
  if (c.growth) res["growth"] = to_json(growth_bounds(curve));
  if (!c.zeta.empty())
    res["ste"] = to_json(ste_bounds(curve, Eigen::Map<const Eigen::VectorXd>(c.zeta.data(), static_cast<Eigen::Index>(c.zeta.size()))));
  if (c.circle) res["best_circle"] = to_json(best_circle(curve));
  csv = support_csv(curve);
  return res;
}

Json cmd_trimreg(const RunConfig& c, std::string& text) {
  const Dataset data = load(c);
  std::vector<int> strata;
  if (c.strata.empty())
    strata.assign(data.n(), 0);
  else
    strata = cell_ids(data, column_indices(data, c.strata, "stratum"));
  TrimRegOptions opt;
  opt.bootstrap = c.trim_bootstrap;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.binary = c.binary;
  opt.phi_floor = c.phi_floor;
  const TrimRegResult res = c.late ? late_bounds(data, strata, opt) : itt_bounds(data, strata, opt);
  text = format_trimreg(res);
  return to_json(res);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Parameter, "cannot open '" + path + "' for writing");
  f << content;
  if (!f) fail(ErrorKind::Parameter, "failed writing '" + path + "'");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Trimming bounds for treatment effects under sample selection"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values; command line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_version_flag("--version", kVersion);

  app.add_option("command", c.command, "estimate | test-monotonicity | simulate | support | trimreg")
      ->required()
      ->check(CLI::IsMember({"estimate", "test-monotonicity", "simulate", "support", "trimreg"}));

  const std::string gd = "Data";
  app.add_option("--data", c.data, "input CSV file")->group(gd);
  app.add_option("--treatment", c.treatment, "treatment column")->capture_default_str()->group(gd);
  app.add_option("--selection", c.selection, "selection column")->capture_default_str()->group(gd);
  app.add_option("--outcome", c.outcomes, "outcome column(s)")->capture_default_str()->group(gd);
  app.add_option("--covariates", c.covariates, "covariate columns (default: all other columns)")->group(gd);
  app.add_option("--weight", c.weight, "weight column")->group(gd);
  app.add_option("--cluster", c.cluster, "cluster id column")->group(gd);
  app.add_option("--instrument", c.instrument, "binary instrument column (LATE)")->group(gd);

  const std::string go = "Output";
  app.add_option("--out", c.out, "JSON report path (default: standard output)")->group(go);
  app.add_option("--text", c.text, "plain text table path")->group(go);
  app.add_option("--csv", c.csv, "CSV path (simulate, support)")->group(go);

  const std::string gr = "Run";
  app.add_option("--seed", c.seed, "random seed")->capture_default_str()->group(gr);
  app.add_option("--threads", c.threads, "worker threads; results do not depend on it")
      ->capture_default_str()
      ->check(CLI::PositiveNumber)
      ->group(gr);
  app.add_option("--level", c.level, "confidence level")->capture_default_str()->group(gr);

  const std::string ge = "Estimation";
  app.add_option("--methods", c.methods, "estimate: basic, cell, better")->capture_default_str()->group(ge);
  app.add_option("--cells", c.cells, "discrete covariate columns defining cells")->group(ge);
  app.add_option("--K", c.K, "cross-fitting folds")->capture_default_str()->group(ge);
  app.add_option("--selection-learner", c.selection_learner, "lasso | logistic")->capture_default_str()->group(ge);
  app.add_option("--quantile-learner", c.quantile_learner, "lasso | quantile")->capture_default_str()->group(ge);
  app.add_option("--propensity", c.propensity, "share | known")->capture_default_str()->group(ge);
  app.add_option("--pi", c.pi, "known treatment probability")->capture_default_str()->group(ge);
  app.add_flag("--no-cluster-variance", c.no_cluster_variance, "ignore clusters in standard errors")->group(ge);
  app.add_flag("--sorted", c.sorted, "report sorted bounds")->group(ge);
  app.add_option("--splits", c.splits, "number of auxiliary/main splits for variational inference")
      ->capture_default_str()
      ->group(ge);
  app.add_option("--aux-fraction", c.aux_fraction, "auxiliary share of each split")->capture_default_str()->group(ge);
  app.add_option("--direction", c.direction, "test-monotonicity null: nonneg | nonpos")->capture_default_str()->group(ge);

  const std::string gs = "Simulation";
  app.add_option("--runs", c.runs, "Monte Carlo runs")->capture_default_str()->group(gs);
  app.add_option("--n", c.n, "sample size per run")->capture_default_str()->group(gs);
  app.add_option("--mc-methods", c.mc_methods, "oracle, basic, naive, better")->capture_default_str()->group(gs);
  app.add_flag("--iid", c.iid, "draw fresh samples instead of resampling the population")->group(gs);
  app.add_option("--mc-K", c.mc_K, "cross-fitting folds in simulations")->capture_default_str()->group(gs);
  app.add_option("--alpha", c.alpha, "selection coefficients (3 values)")->group(gs);
  app.add_option("--gamma", c.gamma, "treatment interaction coefficients (3 values)")->group(gs);
  app.add_option("--kappa", c.kappa, "outcome coefficients (2 values)")->group(gs);
  app.add_option("--cell-prob", c.cell_prob, "covariate cell probabilities (4 values)")->group(gs);
  app.add_option("--sigma", c.sigma, "outcome noise SD")->group(gs);
  app.add_option("--rho", c.rho, "decoy correlation")->group(gs);
  app.add_option("--treat-prob", c.sim_pi, "treatment probability")->group(gs);
  app.add_option("--n-noise", c.n_noise, "number of decoy covariates")->group(gs);

  const std::string gp = "Support function";
  app.add_option("--grid-size", c.grid_size, "directions in the default two-dimensional grid")
      ->capture_default_str()
      ->group(gp);
  app.add_option("--directions", c.directions, "explicit directions, components separated by ':'")->group(gp);
  app.add_option("--bootstrap", c.bootstrap, "multiplier bootstrap draws")->capture_default_str()->group(gp);
  app.add_option("--zeta", c.zeta, "outcome scales for standardized effect bounds")->group(gp);
  app.add_flag("--growth", c.growth, "report growth bounds (two outcomes)")->group(gp);
  app.add_flag("--circle", c.circle, "report the best fitting circle")->group(gp);

  const std::string gt = "Trimmed regression";
  app.add_option("--strata", c.strata, "stratification columns (fixed effects)")->group(gt);
  app.add_flag("--late", c.late, "2SLS with the instrument instead of ITT OLS")->group(gt);
  app.add_flag("--binary", c.binary, "randomized trimming for a 0/1 outcome")->group(gt);
  app.add_option("--trim-bootstrap", c.trim_bootstrap, "bootstrap draws for standard errors")
      ->capture_default_str()
      ->group(gt);
  app.add_option("--phi-floor", c.phi_floor, "lower clamp of the outcome share in randomized trimming")
      ->capture_default_str()
      ->group(gt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, out, err);
    return 2;
  }

  try {
    Json report;
    report["tool"] = "leebounds";
    report["version"] = kVersion;
    const Json cfg = c.to_json();
    report["config"] = cfg;
    report["config_hash"] = hex64(fnv1a64(cfg.dump()));
    report["seed"] = c.seed;
    std::string text, csv;
    int status = 0;
    if (c.command == "estimate")
      report["results"] = cmd_estimate(c, status);
    else if (c.command == "test-monotonicity")
      report["results"] = cmd_monotonicity(c, text);
    else if (c.command == "simulate")
      report["results"] = cmd_simulate(c, text, csv);
    else if (c.command == "support")
      report["results"] = cmd_support(c, csv);
    else
      report["results"] = cmd_trimreg(c, text);

    const std::string body = report.dump(2) + "\n";
    if (c.out.empty())
      out << body;
    else
      write_file(c.out, body);
    if (!text.empty()) {
      if (c.text.empty()) {
        if (!c.out.empty()) out << text;
      } else {
        write_file(c.text, text);
      }
    }
    if (!c.csv.empty() && !csv.empty()) write_file(c.csv, csv);
    if (status != 0) err << "leebounds: one or more methods failed; see the report\n";
    return status;
  } catch (const Error& e) {
    err << "leebounds: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "leebounds: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace leebounds
