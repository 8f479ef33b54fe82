#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leebounds/bounds.hpp"
#include "leebounds/dataset.hpp"

namespace leebounds {

using DirectionGrid = std::vector<Eigen::VectorXd>;

// d = 1: {+1, -1}; d = 2: m equally spaced unit vectors starting at (1, 0).
DirectionGrid default_grid(int d, int m = 64);
// Normalizes each direction; throws on a zero vector.
DirectionGrid make_grid(const std::vector<std::vector<double>>& directions);

struct SupportCurve {
  DirectionGrid grid;
  Eigen::VectorXd sigma;  // support function estimate per direction
  Eigen::VectorXd se;
  // Per-row linearized series (n x |grid|); weighted column means equal sigma.
  Eigen::MatrixXd series;
  Eigen::VectorXd weight;
  std::vector<std::int64_t> cluster;
  Eigen::MatrixXd bootstrap;  // B x |grid|, empty until weighted_bootstrap runs
  double band_critical = 0.0;  // sup-t critical value from the bootstrap
  double band_level = 0.95;

  int dim() const { return grid.empty() ? 0 : static_cast<int>(grid.front().size()); }
};

// Rows are selected when every outcome is observed (data.selection must agree).
SupportCurve support_estimate(const Dataset& data, const DirectionGrid& grid, const CrossfitOptions& opt);

// Exponential multiplier bootstrap of the second stage. Fills curve.bootstrap
// and the uniform band critical value at the given level.
void weighted_bootstrap(SupportCurve& curve, int B, std::uint64_t seed, double level = 0.95, int threads = 1);

struct ProjectionBounds {
  double lower = 0.0;
  double upper = 0.0;
  Eigen::VectorXd direction;
  bool approximate = false;  // nearest grid direction used
};

// Bounds on beta_2 - beta_1 from the support function at q = (-1, 1)/sqrt2 and -q.
ProjectionBounds growth_bounds(const SupportCurve& curve);

// Bounds on (1/d) sum_j beta_j / zeta_j.
ProjectionBounds ste_bounds(const SupportCurve& curve, const Eigen::VectorXd& zeta, double angle_tol = 0.1);

struct Circle {
  Eigen::Vector2d center;
  double radius = 0.0;
  double rss = 0.0;
};

// Least squares fit of sigma(q) ~ q'center + radius.
Circle best_circle(const SupportCurve& curve);

std::string support_csv(const SupportCurve& curve);

}  // namespace leebounds
