#include "leebounds/trimreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"
#include "leebounds/solvers.hpp"

namespace leebounds {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int stratum_count(const std::vector<int>& strata, std::size_t n) {
  if (strata.size() != n) fail(ErrorKind::Shape, "stratum vector length differs from the row count");
  if (strata.empty()) fail(ErrorKind::InsufficientData, "empty dataset");
  const int lo = *std::min_element(strata.begin(), strata.end());
  if (lo < 0) fail(ErrorKind::Value, "negative stratum id");
  return *std::max_element(strata.begin(), strata.end()) + 1;
}

int arm_of(const Dataset& data, std::size_t i, bool by_instrument) {
  return by_instrument ? data.instrument(static_cast<Eigen::Index>(i)) : data.d(i);
}

// Keep rule for one trimmed cell; returns the threshold and direction.
struct KeepRule {
  double level = 1.0;
  bool keep_above = false;
};

KeepRule keep_rule(double p, MomentSide side) {
  if (p <= 1.0) {
    if (side == MomentSide::Upper) return {1.0 - p, true};
    return {p, false};
  }
  if (side == MomentSide::Upper) return {1.0 / p, false};
  return {1.0 - 1.0 / p, true};
}

using Cell = std::vector<std::size_t>;

// Selected rows per (stratum, trimmed arm, subgroup); subgroup is D for LATE.
std::map<std::array<int, 3>, Cell> selected_cells(const Dataset& data, const std::vector<int>& strata, bool late) {
  std::map<std::array<int, 3>, Cell> cells;
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.s(i) != 1) continue;
    cells[{strata[i], arm_of(data, i, late), late ? data.d(i) : 0}].push_back(i);
  }
  return cells;
}

TrimmedSample trim_core(const Dataset& data, const std::vector<int>& strata, MomentSide side,
                        const std::vector<double>* p_override, bool late) {
  const int J = stratum_count(strata, data.n());
  if (late && !data.has_instrument()) fail(ErrorKind::Schema, "LATE trimming needs an instrument column");
  TrimmedSample t;
  t.side = side;
  t.p = p_override ? *p_override : stratum_thresholds(data, strata, late);
  if (static_cast<int>(t.p.size()) != J) fail(ErrorKind::Shape, "one threshold per stratum is required");
  t.selected_per_stratum.assign(static_cast<std::size_t>(J), 0);
  t.trimmed_per_stratum.assign(static_cast<std::size_t>(J), 0);
  std::vector<char> keep(data.n(), 0);
  for (const auto& [key, rows] : selected_cells(data, strata, late)) {
    const auto j = static_cast<std::size_t>(key[0]);
    const double p = t.p[j];
    const int trimmed_arm = p <= 1.0 ? 1 : 0;
    t.selected_per_stratum[j] += rows.size();
    if (key[1] != trimmed_arm) {
      for (std::size_t i : rows) keep[i] = 1;
      continue;
    }
    std::vector<double> v, w;
    for (std::size_t i : rows) {
      if (data.w(i) <= 0) continue;
      v.push_back(data.y(i));
      w.push_back(data.w(i));
    }
    if (v.empty()) continue;
    const KeepRule rule = keep_rule(p, side);
    const double q = empirical_quantile(v, w, rule.level);
    for (std::size_t i : rows) {
      const double y = data.y(i);
      if (rule.keep_above ? y >= q : y <= q)
        keep[i] = 1;
      else
        ++t.trimmed_per_stratum[j];
    }
  }
  for (std::size_t i = 0; i < data.n(); ++i)
    if (keep[i]) t.retained.push_back(i);
  return t;
}

}  // namespace

std::vector<double> stratum_thresholds(const Dataset& data, const std::vector<int>& strata, bool by_instrument) {
  const int J = stratum_count(strata, data.n());
  if (by_instrument && !data.has_instrument()) fail(ErrorKind::Schema, "dataset has no instrument column");
  std::vector<std::array<double, 2>> W(static_cast<std::size_t>(J), {0.0, 0.0});
  std::vector<std::array<double, 2>> Ws(static_cast<std::size_t>(J), {0.0, 0.0});
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto j = static_cast<std::size_t>(strata[i]);
    const int a = arm_of(data, i, by_instrument);
    W[j][a] += data.w(i);
    if (data.s(i) == 1) Ws[j][a] += data.w(i);
  }
  std::vector<double> p(static_cast<std::size_t>(J));
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (W[j][0] <= 0 || W[j][1] <= 0)
      fail(ErrorKind::StratumSupport, "stratum " + std::to_string(j) + " lacks one of the arms");
    if (Ws[j][0] <= 0 || Ws[j][1] <= 0)
      fail(ErrorKind::StratumSupport, "stratum " + std::to_string(j) + " has an arm without selected rows");
    p[j] = (Ws[j][0] / W[j][0]) / (Ws[j][1] / W[j][1]);
  }
  return p;
}

TrimmedSample trim_itt(const Dataset& data, const std::vector<int>& strata, MomentSide side,
                       const std::vector<double>* p) {
  return trim_core(data, strata, side, p, false);
}

TrimmedSample trim_late(const Dataset& data, const std::vector<int>& strata, MomentSide side,
                        const std::vector<double>* p) {
  if (!data.has_instrument()) fail(ErrorKind::Schema, "LATE trimming needs an instrument column");
  const int J = stratum_count(strata, data.n());
  std::vector<std::array<int, 4>> seen(static_cast<std::size_t>(J), {0, 0, 0, 0});
  for (std::size_t i = 0; i < data.n(); ++i)
    seen[static_cast<std::size_t>(strata[i])][2 * data.instrument(static_cast<Eigen::Index>(i)) + data.d(i)] = 1;
  for (std::size_t j = 0; j < seen.size(); ++j) {
    if (!(seen[j][0] || seen[j][1]) || !(seen[j][2] || seen[j][3]))
      fail(ErrorKind::StratumSupport, "stratum " + std::to_string(j) + " lacks an instrument arm");
  }
  return trim_core(data, strata, side, p, true);
}

TrimmedSample binary_randomized_trim(const Dataset& data, const std::vector<int>& strata, MomentSide side,
                                     std::uint64_t seed, double phi_floor, const std::vector<double>* p) {
  const int J = stratum_count(strata, data.n());
  TrimmedSample t;
  t.side = side;
  t.seed = seed;
  t.p = p ? *p : stratum_thresholds(data, strata, false);
  if (static_cast<int>(t.p.size()) != J) fail(ErrorKind::Shape, "one threshold per stratum is required");
  t.selected_per_stratum.assign(static_cast<std::size_t>(J), 0);
  t.trimmed_per_stratum.assign(static_cast<std::size_t>(J), 0);
  // Upper bounds drop low outcomes of the treated arm (help) or high outcomes
  // of the control arm (hurt); lower bounds the reverse.
  auto target_value = [&](std::size_t j) {
    const bool help = t.p[j] <= 1.0;
    return (side == MomentSide::Upper) == help ? 0.0 : 1.0;
  };
  std::vector<double> cnt(static_cast<std::size_t>(J), 0.0), hit(static_cast<std::size_t>(J), 0.0);
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.s(i) != 1) continue;
    const double y = data.y(i);
    if (y != 0.0 && y != 1.0) fail(ErrorKind::Value, "randomized trimming needs a 0/1 outcome (row " + std::to_string(i) + ")");
    const auto j = static_cast<std::size_t>(strata[i]);
    const int trimmed_arm = t.p[j] <= 1.0 ? 1 : 0;
    if (data.d(i) != trimmed_arm) continue;
    cnt[j] += data.w(i);
    if (y == target_value(j)) hit[j] += data.w(i);
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < data.n(); ++i) {
    if (data.s(i) != 1) continue;
    const auto j = static_cast<std::size_t>(strata[i]);
    ++t.selected_per_stratum[j];
    const int trimmed_arm = t.p[j] <= 1.0 ? 1 : 0;
    bool drop = false;
    if (data.d(i) == trimmed_arm && data.y(i) == target_value(j) && cnt[j] > 0) {
      const double share = t.p[j] <= 1.0 ? 1.0 - t.p[j] : 1.0 - 1.0 / t.p[j];
      const double phi = std::max(hit[j] / cnt[j], phi_floor);
      drop = rng.bernoulli(std::min(1.0, share / phi));
    }
    if (drop)
      ++t.trimmed_per_stratum[j];
    else
      t.retained.push_back(i);
  }
  return t;
}

std::vector<std::array<double, 2>> response_shares(const Dataset& data, const std::vector<int>& strata,
                                                   const TrimmedSample& trim, bool by_instrument) {
  const int J = stratum_count(strata, data.n());
  std::vector<std::array<double, 2>> n(static_cast<std::size_t>(J), {0.0, 0.0});
  std::vector<std::array<double, 2>> k(static_cast<std::size_t>(J), {0.0, 0.0});
  for (std::size_t i = 0; i < data.n(); ++i) n[static_cast<std::size_t>(strata[i])][arm_of(data, i, by_instrument)] += 1;
  for (std::size_t i : trim.retained) k[static_cast<std::size_t>(strata[i])][arm_of(data, i, by_instrument)] += 1;
  for (std::size_t j = 0; j < n.size(); ++j)
    for (int a = 0; a < 2; ++a) k[j][a] = n[j][a] > 0 ? k[j][a] / n[j][a] : kNaN;
  return k;
}

RegressionBound trimmed_regression(const Dataset& data, const std::vector<int>& strata, const TrimmedSample& trim,
                                   bool late) {
  const int J = stratum_count(strata, data.n());
  const auto& rows = trim.retained;
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (m == 0) fail(ErrorKind::InsufficientData, "no rows left after trimming");
  // Fixed effects only for strata present among the retained rows.
  std::vector<int> col(static_cast<std::size_t>(J), -1);
  int nfe = 0;
  for (std::size_t i : rows)
    if (col[static_cast<std::size_t>(strata[i])] < 0) col[static_cast<std::size_t>(strata[i])] = nfe++;
  Eigen::MatrixXd fe = Eigen::MatrixXd::Zero(m, nfe);
  Eigen::VectorXd y(m), d(m), w(m), z(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::size_t i = rows[static_cast<std::size_t>(r)];
    fe(r, col[static_cast<std::size_t>(strata[i])]) = 1.0;
    y(r) = data.y(i);
    d(r) = data.d(i);
    w(r) = data.w(i);
    if (late) z(r) = data.instrument(static_cast<Eigen::Index>(i));
  }
  RegressionBound out;
  out.n = rows.size();
  out.se = kNaN;
  if (late) {
    const FitResult f = fit_tsls(fe, d, z, y, w);
    out.coef = f.coefficients(0);
    out.first_stage_t = f.first_stage_t;
    out.weak_instrument = f.weak_instrument;
  } else {
    Eigen::MatrixXd X(m, nfe + 1);
    X << d, fe;
    out.coef = fit_ols(X, y, w).coefficients(0);
  }
  return out;
}

namespace {

struct SidePair {
  TrimmedSample lower, upper;
};

SidePair trim_both(const Dataset& data, const std::vector<int>& strata, bool late, const TrimRegOptions& opt,
                   std::uint64_t seed) {
  if (opt.binary) {
    if (late) fail(ErrorKind::Parameter, "randomized binary trimming is available for ITT only");
    return {binary_randomized_trim(data, strata, MomentSide::Lower, mix_seed(seed, 1), opt.phi_floor),
            binary_randomized_trim(data, strata, MomentSide::Upper, mix_seed(seed, 2), opt.phi_floor)};
  }
  if (late) return {trim_late(data, strata, MomentSide::Lower), trim_late(data, strata, MomentSide::Upper)};
  return {trim_itt(data, strata, MomentSide::Lower), trim_itt(data, strata, MomentSide::Upper)};
}

TrimRegResult run_bounds(const Dataset& data, const std::vector<int>& strata, const TrimRegOptions& opt, bool late) {
  TrimRegResult res;
  res.late = late;
  SidePair t = trim_both(data, strata, late, opt, opt.seed);
  res.lower = trimmed_regression(data, strata, t.lower, late);
  res.upper = trimmed_regression(data, strata, t.upper, late);
  res.trim_lower = std::move(t.lower);
  res.trim_upper = std::move(t.upper);

  if (opt.bootstrap > 0) {
    // Resampling units are clusters when present, rows otherwise.
    std::vector<std::vector<std::size_t>> units;
    if (data.has_clusters()) {
      std::map<std::int64_t, std::size_t> id;
      for (std::size_t i = 0; i < data.n(); ++i) {
        auto it = id.try_emplace(data.cluster[i], units.size()).first;
        if (it->second == units.size()) units.emplace_back();
        units[it->second].push_back(i);
      }
    } else {
      for (std::size_t i = 0; i < data.n(); ++i) units.push_back({i});
    }
    const auto B = static_cast<std::size_t>(opt.bootstrap);
    std::vector<std::array<double, 2>> draws(B, {kNaN, kNaN});
    parallel_for(B, opt.threads, [&](std::size_t b) {
      const std::uint64_t s = mix_seed(opt.seed, 0x7472696dULL, b);
      Rng rng(s);
      std::vector<std::size_t> rows;
      for (std::size_t u = 0; u < units.size(); ++u) {
        const auto& pick = units[rng.index(units.size())];
        rows.insert(rows.end(), pick.begin(), pick.end());
      }
      const Dataset boot = subset(data, rows);
      std::vector<int> bs(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) bs[k] = strata[rows[k]];
      try {
        const SidePair bt = trim_both(boot, bs, late, opt, s);
        draws[b] = {trimmed_regression(boot, bs, bt.lower, late).coef, trimmed_regression(boot, bs, bt.upper, late).coef};
      } catch (const Error&) {
        // Draws that lose a stratum arm are skipped and counted.
      }
    });
    double sum[2] = {0, 0}, sq[2] = {0, 0};
    for (const auto& d : draws) {
      if (!std::isfinite(d[0]) || !std::isfinite(d[1])) {
        ++res.failed_draws;
        continue;
      }
      ++res.draws;
      for (int k = 0; k < 2; ++k) {
        sum[k] += d[k];
        sq[k] += d[k] * d[k];
      }
    }
    if (res.draws > 1) {
      const double nb = res.draws;
      res.lower.se = std::sqrt(std::max(0.0, (sq[0] - sum[0] * sum[0] / nb) / (nb - 1)));
      res.upper.se = std::sqrt(std::max(0.0, (sq[1] - sum[1] * sum[1] / nb) / (nb - 1)));
    }
  }
  if (res.lower.coef > res.upper.coef) {
    res.swapped = true;
    std::swap(res.lower, res.upper);
  }
  return res;
}

}  // namespace

TrimRegResult itt_bounds(const Dataset& data, const std::vector<int>& strata, const TrimRegOptions& opt) {
  return run_bounds(data, strata, opt, false);
}

TrimRegResult late_bounds(const Dataset& data, const std::vector<int>& strata, const TrimRegOptions& opt) {
  if (!data.has_instrument()) fail(ErrorKind::Schema, "LATE bounds need an instrument column");
  return run_bounds(data, strata, opt, true);
}

}  // namespace leebounds
