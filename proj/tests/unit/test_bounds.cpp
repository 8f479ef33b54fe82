#include <algorithm>
#include <cmath>
#include <numeric>

#include "../common/oracles.hpp"
#include "doctest.h"
#include "leebounds/bounds.hpp"
#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/simulation.hpp"

using namespace leebounds;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

Dataset scalar_data(const std::vector<int>& d, const std::vector<int>& s, const std::vector<double>& y) {
  const auto n = static_cast<Eigen::Index>(d.size());
  VectorXi D(n), S(n);
  MatrixXd Y(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    D(i) = d[static_cast<std::size_t>(i)];
    S(i) = s[static_cast<std::size_t>(i)];
    Y(i, 0) = S(i) ? y[static_cast<std::size_t>(i)] : NAN;
  }
  return make_dataset(D, S, Y, MatrixXd::Ones(n, 1));
}

// Treated Y = 1..4 all selected; controls select 1 and 3 out of four.
Dataset fixture() { return scalar_data({1, 1, 1, 1, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 0, 0}, {1, 2, 3, 4, 1, 3, 0, 0}); }

// Smallest value whose weighted CDF reaches u, by enumerating the sorted values.
double enumerated_quantile(std::vector<double> v, std::vector<double> w, double u) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double acc = 0.0;
  for (auto i : idx) {
    acc += w[i];
    if (acc / total >= u - 1e-12) return v[i];
  }
  return v[idx.back()];
}

}  // namespace

TEST_CASE("empirical quantile") {
  const std::vector<double> v{1, 2, 3, 4}, w(4, 1.0);
  CHECK(empirical_quantile(v, w, 0.5) == 2);
  CHECK(empirical_quantile(v, w, 1.0) == 4);
  CHECK(empirical_quantile(v, w, 0.25) == 1);
  CHECK_THROWS_AS(empirical_quantile({}, {}, 0.5), Error);

  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> y(17), wt(17);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = std::round(rng.normal() * 4.0);
      wt[i] = 0.2 + rng.uniform();
    }
    const double u = rng.uniform();
    CHECK(empirical_quantile(y, wt, u) == enumerated_quantile(y, wt, u));
  }
}

TEST_CASE("basic bounds hand examples") {
  const auto est = basic_bounds(fixture());
  CHECK(est.beta_L == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(est.beta_U == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(est.help_share == 1.0);

  // Arms exchanged: the control arm is trimmed and the bounds mirror.
  const auto hurt = basic_bounds(scalar_data({0, 0, 0, 0, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1, 0, 0}, {1, 2, 3, 4, 1, 3, 0, 0}));
  CHECK(hurt.beta_L == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(hurt.beta_U == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(hurt.hurt_share == 1.0);

  const auto full = basic_bounds(scalar_data({1, 1, 1, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, {1, 2, 6, 0, 1, 2}));
  CHECK(full.beta_L == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(full.beta_U == doctest::Approx(2.0).epsilon(1e-12));

  const auto flat = basic_bounds(scalar_data({1, 1, 1, 0, 0, 0}, {1, 1, 1, 1, 0, 0}, {7, 7, 7, 7, 0, 0}));
  CHECK(std::abs(flat.beta_L) < 1e-12);
  CHECK(std::abs(flat.beta_U) < 1e-12);

  try {
    basic_bounds(scalar_data({1, 1, 0, 0}, {1, 1, 0, 0}, {1, 2, 0, 0}));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
}

TEST_CASE("cell bounds reduce to basic bounds") {
  const auto data = fixture();
  const auto basic = basic_bounds(data);
  const auto one = cell_bounds(data, std::vector<int>(data.n(), 0));
  CHECK(one.beta_L == doctest::Approx(basic.beta_L).epsilon(1e-12));
  CHECK(one.beta_U == doctest::Approx(basic.beta_U).epsilon(1e-12));

  std::vector<std::size_t> rows(2 * data.n());
  std::vector<int> cells(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = i % data.n();
    cells[i] = i < data.n() ? 0 : 1;
  }
  const auto two = cell_bounds(subset(data, rows), cells);
  CHECK(two.beta_L == doctest::Approx(basic.beta_L).epsilon(1e-12));
  CHECK(two.beta_U == doctest::Approx(basic.beta_U).epsilon(1e-12));
}

TEST_CASE("cell bounds approach the quadrature oracle") {
  DgpConfig cfg;
  const std::size_t n = 60000;
  const auto data = draw_sample(cfg, n, 11);
  std::vector<Region> labels;
  for (const auto& c : cell_truth(cfg)) labels.push_back(c.region);
  const auto est = cell_bounds(data, true_cells(data), labels);
  const auto truth = oracle::dgp_bounds(cfg.alpha, cfg.gamma, cfg.cell_prob, cfg.sigma, 200000);
  CHECK(std::abs(est.beta_L - truth.L) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(est.beta_U - truth.U) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("moment function hand values") {
  RowNuisance xi;
  xi.region = Region::Help;
  xi.q_upper = 1.5;
  const MomentContext ctx{0.5, 0.8, 1.0};
  CHECK(moment_m(1, 1, 2.0, xi, ctx, MomentSide::Upper) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(moment_m(1, 1, 1.0, xi, ctx, MomentSide::Upper) == 0.0);
  CHECK(moment_m(0, 1, 2.0, xi, ctx, MomentSide::Upper) == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(moment_m(0, 0, 2.0, xi, ctx, MomentSide::Upper) == 0.0);
  // Unselected rows carry no correction.
  CHECK(moment_correction(0, 0, 0.0, xi, ctx, MomentSide::Upper) == 0.0);
  CHECK(moment_correction(1, 1, 2.0, xi, ctx, MomentSide::Upper) == doctest::Approx(-1.5 / 0.5 / 0.8).epsilon(1e-12));
  CHECK(moment_correction(0, 1, 2.0, xi, ctx, MomentSide::Upper) == doctest::Approx(1.5 / 0.5 / 0.8).epsilon(1e-12));
}

TEST_CASE("correction has mean zero when the threshold splits exactly") {
  // Ten treated rows all selected, ten controls with five selected: p = 0.5.
  std::vector<int> d, s;
  std::vector<double> y;
  for (int i = 1; i <= 10; ++i) {
    d.push_back(1);
    s.push_back(1);
    y.push_back(i);
  }
  for (int i = 1; i <= 10; ++i) {
    d.push_back(0);
    s.push_back(i <= 5);
    y.push_back(i);
  }
  const auto data = scalar_data(d, s, y);
  RowNuisance xi;
  xi.region = Region::Help;
  xi.q_upper = 6.0;  // five of ten treated values are >= 6
  xi.q_lower = 5.0;  // five of ten are <= 5
  const MomentContext ctx{0.5, 0.5, 1.0};
  for (auto side : {MomentSide::Upper, MomentSide::Lower}) {
    double sum = 0.0, m = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
      sum += moment_correction(data.d(i), data.s(i), data.y(i), xi, ctx, side);
      m += moment_m(data.d(i), data.s(i), data.y(i), xi, ctx, side);
    }
    CHECK(std::abs(sum) < 1e-12);
    // Direct trimmed means: top half {6..10} or bottom half {1..5} minus control mean 3.
    const double expect = side == MomentSide::Upper ? 8.0 - 3.0 : 3.0 - 3.0;
    CHECK(m / static_cast<double>(data.n()) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("normalizer from a constant selection model") {
  const auto data = fixture();
  auto model = std::make_shared<PluginNuisance>([](const RowRef&) {
    return make_row_nuisance(0.4, 0.8, [](int, double) { return 0.0; });
  });
  std::vector<std::size_t> rows(data.n());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto bundle = assemble_bundle(model, data, rows, 0.5);
  CHECK(bundle.mu10_help == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(std::isnan(bundle.mu11_hurt));
  CHECK(bundle.regions.hurt_share == 0.0);
}

TEST_CASE("sorted bounds") {
  BoundsEstimate est;
  est.beta_L = 0.2;
  est.beta_U = 0.1;
  const auto s = sort_bounds(est);
  CHECK(s.beta_L == 0.1);
  CHECK(s.beta_U == 0.2);
  CHECK(s.swapped);
  est.beta_L = 0.1;
  est.beta_U = 0.2;
  const auto t = sort_bounds(est);
  CHECK(t.beta_L == 0.1);
  CHECK(t.beta_U == 0.2);
  CHECK_FALSE(t.swapped);
}

TEST_CASE("cross-fitted bounds on the simulation design") {
  DgpConfig cfg;
  const auto truth = oracle::dgp_bounds(cfg.alpha, cfg.gamma, cfg.cell_prob, cfg.sigma, 200000);
  const auto data = draw_sample(cfg, 9145, 21);
  CrossfitOptions opt;
  const auto est = crossfit_bounds(data, opt);
  CHECK(std::abs(est.beta_L - truth.L) < 3.0 * est.se_L());
  CHECK(std::abs(est.beta_U - truth.U) < 3.0 * est.se_U());
  CHECK(est.help_share > 0.0);
  CHECK(est.hurt_share > 0.0);

  const auto small = draw_sample(cfg, 5000, 22);
  CrossfitOptions o2, o5;
  o5.K = 5;
  const auto e2 = crossfit_bounds(small, o2), e5 = crossfit_bounds(small, o5);
  CHECK(std::abs(e2.beta_L - e5.beta_L) <= 4.0 / std::sqrt(5000.0));
  CHECK(std::abs(e2.beta_U - e5.beta_U) <= 4.0 / std::sqrt(5000.0));
}

TEST_CASE("cross-fitting is reproducible and thread invariant") {
  DgpConfig cfg;
  const auto data = draw_sample(cfg, 2000, 5);
  CrossfitOptions a, b;
  b.threads = 3;
  const auto ea = crossfit_bounds(data, a), eb = crossfit_bounds(data, b);
  CHECK(ea.beta_L == eb.beta_L);
  CHECK(ea.beta_U == eb.beta_U);
  CHECK(ea.se_L() == eb.se_L());
}
