#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "leebounds/bounds.hpp"
#include "leebounds/dataset.hpp"

namespace leebounds {

// Which arm is trimmed and which selected rows were dropped. Strata saturate
// the covariates, so thresholds come from per-stratum sample analogs.
struct TrimmedSample {
  MomentSide side = MomentSide::Upper;
  std::vector<std::size_t> retained;  // selected rows kept, ascending
  std::vector<std::size_t> selected_per_stratum;
  std::vector<std::size_t> trimmed_per_stratum;
  std::vector<double> p;  // trimming threshold per stratum
  std::uint64_t seed = 0;  // randomized binary trimming only
};

// Per-stratum ratio of selection rates, arm 0 over arm 1. The arm is D for
// ITT and the instrument for LATE.
std::vector<double> stratum_thresholds(const Dataset& data, const std::vector<int>& strata, bool by_instrument);

// Strata with p <= 1 trim selected rows of arm 1 (upper: keep Y >= Q(1-p),
// lower: keep Y <= Q(p)); strata with p > 1 trim arm 0 (upper: keep
// Y <= Q(1/p), lower: keep Y >= Q(1-1/p)). Quantiles are taken within each
// (stratum, arm) cell for ITT and within each (stratum, arm, D) cell for LATE.
// p overrides the sample thresholds when not null.
TrimmedSample trim_itt(const Dataset& data, const std::vector<int>& strata, MomentSide side,
                       const std::vector<double>* p = nullptr);
TrimmedSample trim_late(const Dataset& data, const std::vector<int>& strata, MomentSide side,
                        const std::vector<double>* p = nullptr);

// Binary outcomes: each selected row of the trimmed arm whose outcome is the
// one being trimmed (0 for upper, 1 for lower) is dropped with probability
// min(1, (1 - p) / phi), phi = max(share of that outcome in the cell, phi_floor).
TrimmedSample binary_randomized_trim(const Dataset& data, const std::vector<int>& strata, MomentSide side,
                                     std::uint64_t seed, double phi_floor = 0.05,
                                     const std::vector<double>* p = nullptr);

// Response share of each arm after trimming, per stratum: [stratum][arm].
std::vector<std::array<double, 2>> response_shares(const Dataset& data, const std::vector<int>& strata,
                                                   const TrimmedSample& trim, bool by_instrument);

struct RegressionBound {
  double coef = 0.0;
  double se = 0.0;  // bootstrap; NaN without draws
  std::size_t n = 0;
  double first_stage_t = 0.0;  // LATE only
  bool weak_instrument = false;
};

struct TrimRegOptions {
  int bootstrap = 1000;  // 0 disables standard errors
  std::uint64_t seed = 1;
  int threads = 1;
  bool binary = false;  // randomized trimming for a 0/1 outcome
  double phi_floor = 0.05;
};

struct TrimRegResult {
  bool late = false;
  RegressionBound lower;
  RegressionBound upper;
  bool swapped = false;
  TrimmedSample trim_lower;
  TrimmedSample trim_upper;
  int draws = 0;
  int failed_draws = 0;
};

// Coefficient on D from weighted OLS (ITT) or 2SLS with Z (LATE) of Y on D and
// stratum fixed effects over the retained rows.
RegressionBound trimmed_regression(const Dataset& data, const std::vector<int>& strata, const TrimmedSample& trim,
                                   bool late);

TrimRegResult itt_bounds(const Dataset& data, const std::vector<int>& strata, const TrimRegOptions& opt = {});
TrimRegResult late_bounds(const Dataset& data, const std::vector<int>& strata, const TrimRegOptions& opt = {});

}  // namespace leebounds
