#include "leebounds/monotonicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"

namespace leebounds {

std::function<double(const RowRef&)> delta_hat(const Dataset& data, const FirstStageOptions& opt) {
  std::vector<std::size_t> rows(data.n());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  auto fit = std::make_shared<SelectionFit>(fit_selection(data, rows, opt));
  return [fit](const RowRef& x) { return fit->delta(x); };
}

const char* direction_name(Direction d) { return d == Direction::NonNegative ? ">=0" : "<=0"; }

double sn_critical_value(int J, double alpha, std::size_t n) {
  if (J < 1) fail(ErrorKind::Parameter, "cell count must be at least 1");
  if (!(alpha > 0 && alpha < 1)) fail(ErrorKind::Parameter, "alpha must lie in (0,1)");
  const double z = normal_quantile(1.0 - alpha / J);
  const double r = 1.0 - z * z / static_cast<double>(n);
  if (r <= 0) fail(ErrorKind::Parameter, "sample size too small for the critical value");
  return z / std::sqrt(r);
}

MonotonicityTestResult test_monotonicity(const Dataset& data, const std::vector<int>& cells, Direction direction) {
  if (cells.size() != data.n()) fail(ErrorKind::Shape, "cell vector length differs from the row count");
  if (cells.empty()) fail(ErrorKind::InsufficientData, "empty dataset");
  const int J = *std::max_element(cells.begin(), cells.end()) + 1;
  MonotonicityTestResult res;
  res.direction = direction;
  double wd = 0.0, wt = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    wd += data.w(i) * data.d(i);
    wt += data.w(i);
  }
  const double pi = wd / wt;
  res.pi_hat = pi;

  std::vector<double> sw(J, 0.0), swx(J, 0.0), swxx(J, 0.0);
  std::vector<std::size_t> cnt(J, 0), arm0(J, 0), arm1(J, 0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const int j = cells[i];
    if (j < 0) fail(ErrorKind::Value, "negative cell id");
    const double xi = (data.d(i) / pi - (1 - data.d(i)) / (1.0 - pi)) * data.s(i);
    const double w = data.w(i);
    sw[j] += w;
    swx[j] += w * xi;
    swxx[j] += w * xi * xi;
    ++cnt[j];
    ++(data.d(i) ? arm1 : arm0)[j];
  }
  const double sign = direction == Direction::NonNegative ? -1.0 : 1.0;
  res.T = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < J; ++j) {
    if (arm0[j] < 2 || arm1[j] < 2)
      fail(ErrorKind::CellSupport, "cell " + std::to_string(j) + " needs at least 2 rows in each arm");
    CellStatistic c;
    c.cell = j;
    c.n = cnt[j];
    c.mean = swx[j] / sw[j];
    const double var = std::max(0.0, swxx[j] / sw[j] - c.mean * c.mean);
    c.se = std::sqrt(var / static_cast<double>(c.n));
    if (c.se > 0)
      c.t = c.mean / c.se;
    else
      c.t = c.mean == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.mean);
    res.T = std::max(res.T, sign * c.t);
    res.cells.push_back(c);
  }
  res.critical_05 = sn_critical_value(J, 0.05, data.n());
  res.critical_01 = sn_critical_value(J, 0.01, data.n());
  res.reject_05 = res.T > res.critical_05;
  res.reject_01 = res.T > res.critical_01;
  return res;
}

}  // namespace leebounds
