#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leebounds/bounds.hpp"
#include "leebounds/dataset.hpp"
#include "leebounds/first_stage.hpp"

namespace leebounds {

struct DgpConfig {
  std::array<double, 3> alpha{0.3, 0.9, -0.7};   // selection on (1, X1, X2)
  std::array<double, 3> gamma{0.9, -1.8, -1.4};  // treatment interaction on (1, X1, X2)
  std::array<double, 2> kappa{2.2, -0.6};        // outcome on (1, X1)
  double sigma = 0.2;
  // Cell probabilities for (X1, X2) = (0,0), (1,0), (0,1), (1,1).
  std::array<double, 4> cell_prob{0.33, 0.27, 0.22, 0.18};
  int n_noise = 28;
  double rho = 0.7;
  double pi = 0.5;
  std::size_t population_size = 9145;
  std::uint64_t population_seed = 20240101;

  void validate() const;
  std::string canonical() const;
};

std::uint64_t config_hash(const DgpConfig& cfg);

struct CellTruth {
  double x1 = 0.0;
  double x2 = 0.0;
  double prob = 0.0;
  double s0 = 0.0;
  double s1 = 0.0;
  double p = 1.0;
  Region region = Region::Help;
  double mean = 0.0;
  double beta_L = 0.0;
  double beta_U = 0.0;
};

std::array<CellTruth, 4> cell_truth(const DgpConfig& cfg);

struct OracleBounds {
  double beta_L = 0.0;
  double beta_U = 0.0;
  double mu10_help = 0.0;
  double mu11_hurt = 0.0;
  double help_share = 0.0;
};

// Sharp bounds from the analytic per-cell truncated Gaussian means.
OracleBounds oracle_bounds(const DgpConfig& cfg);
// Trimming within the true help and hurt regions, ignoring the cells.
OracleBounds basic_population_bounds(const DgpConfig& cfg);

// Independent draws. Columns: const, X1, X2, decoys Z1..Zk.
Dataset draw_sample(const DgpConfig& cfg, std::size_t n, std::uint64_t seed);
// Cell index 0..3 of each row from the X1, X2 columns.
std::vector<int> true_cells(const Dataset& data);

// Mean of the top (or bottom) share of a weighted sample with the boundary
// observation entering fractionally.
double fractional_trim_mean(const std::vector<double>& values, const std::vector<double>& weights, double keep_share,
                            bool keep_top);

// Sharp cell bounds of a finite sample with fractional trimming and the given
// cell labels; the estimand when resampling that sample.
OracleBounds finite_population_bounds(const Dataset& data, const std::vector<int>& cells,
                                      const std::vector<Region>& labels);

// Nuisance model holding the true selection probabilities and quantiles.
std::shared_ptr<const NuisanceModel> true_nuisance(const DgpConfig& cfg);

enum class McMethod { Oracle, Basic, Naive, Better };
const char* method_name(McMethod m);
McMethod parse_method(const std::string& s);

struct McOptions {
  std::size_t n = 3000;
  int runs = 500;
  std::vector<McMethod> methods{McMethod::Oracle, McMethod::Basic, McMethod::Better};
  std::uint64_t seed = 1;
  bool resample_population = true;
  int K = 5;
  int threads = 1;
  double level = 0.95;
};

struct McMethodSummary {
  McMethod method = McMethod::Oracle;
  double target_L = 0.0;
  double target_U = 0.0;
  double bias_L = 0.0;
  double bias_U = 0.0;
  double sd_L = 0.0;
  double sd_U = 0.0;
  double coverage_L = 0.0;
  double coverage_U = 0.0;
  double mean_se_L = 0.0;
  double mean_se_U = 0.0;
  int completed = 0;
  std::map<std::string, int> failures;
};

struct McReport {
  DgpConfig config;
  McOptions options;
  std::uint64_t config_hash = 0;
  OracleBounds analytic_sharp;
  OracleBounds analytic_basic;
  OracleBounds target_sharp;  // finite-population estimand under resampling
  OracleBounds target_basic;
  std::vector<McMethodSummary> methods;
};

McReport run_monte_carlo(const DgpConfig& cfg, const McOptions& opt);

std::string format_mc_table(const McReport& r);
std::string mc_csv(const McReport& r);

}  // namespace leebounds
