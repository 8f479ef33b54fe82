#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leebounds/bounds.hpp"

namespace leebounds {

enum class RegionKind { Set, ImbensManski, Stoye, Variational };
const char* region_kind_name(RegionKind k);

struct ConfidenceRegion {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  RegionKind kind = RegionKind::Set;
  bool empty = false;
  double critical_lower = 0.0;
  double critical_upper = 0.0;
};

struct SplitEstimate {
  double beta_L = 0.0;
  double beta_U = 0.0;
  double sd_L = 0.0;
  double sd_U = 0.0;
  std::size_t n_main = 0;
  std::uint64_t seed = 0;
};

// Weighted second-moment matrix of the centered series, weights rescaled to mean one.
Eigen::Matrix2d variance_matrix(const Eigen::VectorXd& g_L, const Eigen::VectorXd& g_U, const Eigen::VectorXd& w);

// Cluster sums of weighted centered moments, outer products averaged over clusters.
Eigen::Matrix2d cluster_variance(const Eigen::VectorXd& g_L, const Eigen::VectorXd& g_U,
                                 const std::vector<std::int64_t>& cluster, const Eigen::VectorXd& w);

ConfidenceRegion set_confidence_region(const BoundsEstimate& est, double level);
ConfidenceRegion im_interval(const BoundsEstimate& est, double level);
ConfidenceRegion stoye_interval(const BoundsEstimate& est, double level);

// Critical value of the Imbens-Manski interval for a standardized width
// delta = sqrt(n) (U - L) / max(sd_L, sd_U).
double im_critical_value(double delta, double level);

double upper_median(std::vector<double> v);
double lower_median(std::vector<double> v);
double median(std::vector<double> v);

struct SplitAggregate {
  double beta_L = 0.0;
  double beta_U = 0.0;
  ConfidenceRegion region;
};

// Per-split regions are built at level 1 - alpha; the aggregate has level 1 - 2 alpha.
SplitAggregate aggregate_splits(const std::vector<SplitEstimate>& splits, double alpha);

std::vector<SplitEstimate> agnostic_splits(const Dataset& data, int n_splits, double aux_fraction,
                                           const CrossfitOptions& opt, std::uint64_t seed);

}  // namespace leebounds
