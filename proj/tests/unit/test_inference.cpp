#include <cmath>

#include "../common/oracles.hpp"
#include "doctest.h"
#include "leebounds/errors.hpp"
#include "leebounds/inference.hpp"
#include "leebounds/numeric.hpp"

using namespace leebounds;
using Eigen::VectorXd;

namespace {

BoundsEstimate make_est(double L, double U, double sdL, double sdU, std::size_t n) {
  BoundsEstimate est;
  est.beta_L = L;
  est.beta_U = U;
  est.n = est.n_units = n;
  est.n_scale = static_cast<double>(n);
  est.omega << sdL * sdL, 0.0, 0.0, sdU * sdU;
  return est;
}

}  // namespace

TEST_CASE("variance matrix hand values") {
  VectorXd gl(2), gu(2);
  gl << 1, -1;
  gu << 2, -2;
  const auto V = variance_matrix(gl, gu, VectorXd::Ones(2));
  CHECK(V(0, 0) == doctest::Approx(1.0));
  CHECK(V(0, 1) == doctest::Approx(2.0));
  CHECK(V(1, 0) == doctest::Approx(2.0));
  CHECK(V(1, 1) == doctest::Approx(4.0));
  const auto Z = variance_matrix(VectorXd::Constant(5, 3.0), VectorXd::Constant(5, -1.0), VectorXd::Ones(5));
  CHECK(Z.cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(variance_matrix(VectorXd::Ones(3), VectorXd::Ones(2), VectorXd::Ones(3)), Error);
}

TEST_CASE("cluster variance reductions") {
  Rng rng(4);
  const int n = 40;
  VectorXd gl(n), gu(n), w(n);
  std::vector<std::int64_t> single(n);
  for (int i = 0; i < n; ++i) {
    gl(i) = rng.normal();
    gu(i) = gl(i) + rng.normal();
    w(i) = 0.5 + rng.uniform();
    single[static_cast<std::size_t>(i)] = 100 - i;
  }
  const auto plain = variance_matrix(gl, gu, w);
  const auto clus = cluster_variance(gl, gu, single, w);
  CHECK((plain - clus).cwiseAbs().maxCoeff() < 1e-12);

  // Every row duplicated into a two-row cluster: cluster sums double.
  VectorXd gl2(2 * n), gu2(2 * n), w2(2 * n);
  std::vector<std::int64_t> pairs(2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    gl2(i) = gl(i / 2);
    gu2(i) = gu(i / 2);
    w2(i) = 1.0;
    pairs[static_cast<std::size_t>(i)] = i / 2;
  }
  const auto dup = cluster_variance(gl2, gu2, pairs, w2);
  const auto base = variance_matrix(gl, gu, VectorXd::Ones(n));
  CHECK((dup - 4.0 * base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("set confidence region") {
  // sd 1 with N = 100 gives se 0.1.
  const auto r = set_confidence_region(make_est(0.0, 1.0, 1.0, 1.0, 100), 0.95);
  CHECK(r.lower == doctest::Approx(-0.195996).epsilon(1e-5));
  CHECK(r.upper == doctest::Approx(1.195996).epsilon(1e-5));
  const auto z = set_confidence_region(make_est(0.0, 1.0, 0.0, 0.0, 100), 0.95);
  CHECK(z.lower == 0.0);
  CHECK(z.upper == 1.0);
  const auto half = set_confidence_region(make_est(0.0, 1.0, 1.0, 1.0, 100), 0.5);
  CHECK(half.lower > r.lower);
  CHECK(half.upper < r.upper);
}

TEST_CASE("Imbens-Manski critical value") {
  CHECK(im_critical_value(0.0, 0.95) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(im_critical_value(1e3, 0.95) == doctest::Approx(1.644854).epsilon(1e-6));
  const double c = oracle::bisect([](double x) { return oracle::Phi(x + 1.0) - oracle::Phi(-x) - 0.95; }, 0.0, 5.0);
  const auto r = im_interval(make_est(0.0, 0.1, 1.0, 1.0, 100), 0.95);
  CHECK(r.critical_lower == doctest::Approx(c).epsilon(1e-8));
  CHECK(r.lower == doctest::Approx(-0.1 * c).epsilon(1e-8));
  CHECK(r.upper == doctest::Approx(0.1 + 0.1 * c).epsilon(1e-8));

  Rng rng(9);
  const double z1 = oracle::Phi_inv(0.95), z2 = oracle::Phi_inv(0.975);
  for (int k = 0; k < 200; ++k) {
    const double L = rng.normal(), U = L + std::abs(rng.normal());
    const auto im = im_interval(make_est(L, U, 0.1 + rng.uniform(), 0.1 + rng.uniform(), 200), 0.95);
    CHECK(im.critical_lower >= z1 - 1e-9);
    CHECK(im.critical_lower <= z2 + 1e-9);
  }
}

TEST_CASE("Stoye interval limits") {
  const auto est = make_est(0.3, 0.3, 1.0, 1.0, 400);
  const auto s = stoye_interval(est, 0.95);
  const auto im = im_interval(est, 0.95);
  CHECK(s.lower == doctest::Approx(im.lower).epsilon(1e-6));
  CHECK(s.upper == doctest::Approx(im.upper).epsilon(1e-6));
  CHECK_FALSE(s.empty);

  const auto inverted = stoye_interval(make_est(1.0, -1.0, 0.01, 0.01, 100), 0.95);
  CHECK(inverted.empty);

  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    const auto r = stoye_interval(make_est(rng.normal(), rng.normal(), rng.uniform(), rng.uniform(), 50), 0.9);
    CHECK(r.empty == (r.lower > r.upper));
  }
}

TEST_CASE("medians and split aggregation") {
  CHECK(upper_median({3, 1, 2}) == 2);
  CHECK(lower_median({3, 1, 2}) == 2);
  CHECK(upper_median({1, 2, 3, 4}) == 3);
  CHECK(lower_median({4, 3, 2, 1}) == 2);
  CHECK(median({1, 2, 3, 4}) == 2.5);
  CHECK_THROWS_AS(upper_median({}), Error);

  SplitEstimate s;
  s.beta_L = -0.2;
  s.beta_U = 0.4;
  s.sd_L = 1.0;
  s.sd_U = 2.0;
  s.n_main = 400;
  const auto agg = aggregate_splits({s}, 0.05);
  const double z = oracle::Phi_inv(0.975);
  CHECK(agg.beta_L == -0.2);
  CHECK(agg.beta_U == 0.4);
  CHECK(agg.region.lower == doctest::Approx(-0.2 - z * 0.05).epsilon(1e-9));
  CHECK(agg.region.upper == doctest::Approx(0.4 + z * 0.1).epsilon(1e-9));
  CHECK(agg.region.level == doctest::Approx(0.9));
  CHECK_THROWS_AS(aggregate_splits({}, 0.05), Error);
}
