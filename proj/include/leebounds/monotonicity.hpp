#pragma once

#include <functional>
#include <vector>

#include "leebounds/dataset.hpp"
#include "leebounds/first_stage.hpp"

namespace leebounds {

// Delta(x) = s(1,x) - s(0,x) from the interacted selection fit.
std::function<double(const RowRef&)> delta_hat(const Dataset& data, const FirstStageOptions& opt);

// Null hypothesis tested: Delta(x) >= 0 everywhere (NonNegative) or <= 0.
enum class Direction { NonNegative, NonPositive };

const char* direction_name(Direction d);

struct CellStatistic {
  int cell = 0;
  std::size_t n = 0;
  double mean = 0.0;  // mean score, estimates Delta on the cell
  double se = 0.0;    // sd / sqrt(n)
  double t = 0.0;
};

struct MonotonicityTestResult {
  Direction direction = Direction::NonNegative;
  std::vector<CellStatistic> cells;
  double T = 0.0;  // max of direction-signed t statistics
  double critical_05 = 0.0;
  double critical_01 = 0.0;
  bool reject_05 = false;
  bool reject_01 = false;
  double pi_hat = 0.0;
};

// Self-normalized critical value z / sqrt(1 - z^2/n), z = Phi^{-1}(1 - alpha/J).
double sn_critical_value(int J, double alpha, std::size_t n);

// cells: id per row in 0..J-1.
MonotonicityTestResult test_monotonicity(const Dataset& data, const std::vector<int>& cells, Direction direction);

}  // namespace leebounds
