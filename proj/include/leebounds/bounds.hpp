#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leebounds/dataset.hpp"
#include "leebounds/first_stage.hpp"

namespace leebounds {

enum class MomentSide { Lower, Upper };

struct BoundsEstimate {
  std::string method;
  double beta_L = 0.0;
  double beta_U = 0.0;
  bool sorted = false;
  bool swapped = false;
  Eigen::Matrix2d omega = Eigen::Matrix2d::Zero();  // covariance of sqrt(n_units) * (beta_L, beta_U)
  std::size_t n = 0;
  std::size_t n_units = 0;  // clusters when clustered, rows otherwise
  // Standard errors are sqrt(omega / n_scale); n_scale = n, or n^2 / G with G clusters.
  double n_scale = 0.0;
  bool clustered = false;
  Eigen::VectorXd g_L;  // per-observation moments; weighted means equal the bounds
  Eigen::VectorXd g_U;
  // Influence of the estimated region normalizers; added to g for variances.
  Eigen::VectorXd adj_L;
  Eigen::VectorXd adj_U;
  Eigen::VectorXd weight;
  std::vector<std::int64_t> cluster;
  double help_share = 1.0;
  double hurt_share = 0.0;
  std::map<std::string, double> diagnostics;

  double se_L() const;
  double se_U() const;
};

// Smallest observed value whose weighted CDF reaches u.
double empirical_quantile(const std::vector<double>& values, const std::vector<double>& weights, double u);

// Trimming bounds without covariates. When the control selection rate
// exceeds the treated one the control arm is trimmed instead.
BoundsEstimate basic_bounds(const Dataset& data);

// Per-cell trimming bounds aggregated over help and hurt cells. labels, when
// given, fixes the region of each cell instead of the sign of 1 - p_hat.
BoundsEstimate cell_bounds(const Dataset& data, const std::vector<int>& cells,
                           const std::vector<Region>& labels = {});

// Moment functions for one observation given its nuisance values and the
// region normalizers.
struct MomentContext {
  double pi = 0.5;
  double mu10_help = 1.0;
  double mu11_hurt = 1.0;
  bool estimated_pi = false;  // pi is the sample treated share
};

double moment_m(int d, int s, double y, const RowNuisance& xi, const MomentContext& ctx, MomentSide side);
double moment_g(int d, int s, double y, const RowNuisance& xi, const MomentContext& ctx, MomentSide side);
double moment_correction(int d, int s, double y, const RowNuisance& xi, const MomentContext& ctx, MomentSide side);

enum class PropensityKind { SampleShare, Known };

struct CrossfitOptions {
  int K = 2;
  std::uint64_t seed = 1;
  PropensityKind propensity = PropensityKind::SampleShare;
  double pi = 0.5;  // used when propensity is Known
  FirstStageOptions first_stage;
  int threads = 1;
  bool cluster_variance = true;
  int outcome_column = 0;
};

// Orthogonal bounds from an evaluated bundle over the rows it was built on.
BoundsEstimate orthogonal_bounds(const Dataset& data, const std::vector<std::size_t>& rows, const NuisanceBundle& bundle);

BoundsEstimate crossfit_bounds(const Dataset& data, const CrossfitOptions& opt);
// Same pipeline with an explicit outcome vector (NaN where unselected).
BoundsEstimate crossfit_bounds(const Dataset& data, const Eigen::VectorXd& y, const CrossfitOptions& opt);
// Per-fold selection fits on the training complements of kfold_partition(n, K, seed).
std::vector<SelectionFit> crossfit_selection(const Dataset& data, const CrossfitOptions& opt);
// Reuses precomputed selection fits (one per fold) when selection is not null.
BoundsEstimate crossfit_bounds(const Dataset& data, const Eigen::VectorXd& y, const CrossfitOptions& opt,
                               const std::vector<SelectionFit>* selection);

// Plug-in orthogonal bounds with a fixed nuisance model evaluated on every row.
BoundsEstimate bounds_from_nuisance(const Dataset& data, std::shared_ptr<const NuisanceModel> model, double pi);

// Sample-analog nuisance that ignores covariates: selection rates by arm and
// empirical outcome quantiles.
std::shared_ptr<const NuisanceModel> constant_nuisance(const Dataset& data);

// First stage fitted on train, moments evaluated on eval.
BoundsEstimate fit_and_evaluate(const Dataset& train, const Dataset& eval, const CrossfitOptions& opt);

BoundsEstimate sort_bounds(const BoundsEstimate& est);

// Fills omega and n_units from the stored series.
void attach_variance(BoundsEstimate& est, bool use_clusters);

}  // namespace leebounds
