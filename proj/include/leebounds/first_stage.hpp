#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "leebounds/dataset.hpp"
#include "leebounds/solvers.hpp"

namespace leebounds {

using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;

enum class Region { Help, Hurt };
enum class SelectionLearner { Logistic, LassoLogistic };
enum class QuantileLearner { Quantile, LassoQuantile };

const char* region_name(Region r);
// Tie rule: p = 1 is labelled help.
inline Region region_of(double p) { return p <= 1.0 ? Region::Help : Region::Hurt; }

struct FirstStageOptions {
  SelectionLearner selection = SelectionLearner::LassoLogistic;
  QuantileLearner quantile = QuantileLearner::LassoQuantile;
  std::vector<int> selection_columns;  // covariate columns; empty = all
  std::vector<int> quantile_columns;   // covariate columns; empty = all
  double penalty_confidence = 0.1;
  double selection_lambda = -1.0;  // negative: default plug-in
  double quantile_lambda = -1.0;
  double clamp_lo = 0.01;
  double clamp_hi = 0.99;
  SolverOptions solver;
};

struct SelectionFit {
  std::vector<int> columns;  // covariate columns entering x
  Eigen::VectorXd alpha;     // baseline coefficients
  Eigen::VectorXd gamma;     // treatment interactions
  std::vector<int> support;  // nonzero entries of (alpha, gamma)
  double clamp_lo = 0.01;
  double clamp_hi = 0.99;

  double s(int d, const RowRef& x) const;  // clamped selection probability
  double p(const RowRef& x) const { return s(0, x) / s(1, x); }
  double delta(const RowRef& x) const { return s(1, x) - s(0, x); }
};

// Interacted logistic model Lambda(x'alpha + D x'gamma); the intercept and the
// treatment main effect are never penalized and always refit.
SelectionFit fit_selection(const Dataset& data, const std::vector<std::size_t>& rows, const FirstStageOptions& opt);

struct RegionPartition {
  std::vector<Region> label;
  double help_share = 0.0;
  double hurt_share = 0.0;
};

RegionPartition classify_regions(const SelectionFit& fit, const Dataset& data);
RegionPartition partition_from_p(const std::vector<double>& p, const Eigen::VectorXd& w);

struct QuantileGridFit {
  static constexpr int kLevels = 99;
  std::vector<int> columns;
  std::array<Eigen::MatrixXd, 2> coef;  // [group] columns.size() x 99; group 1 = treated-selected
  std::array<std::vector<int>, 2> support;
  double min_cap = 0.0;
  double max_cap = 0.0;

  // Rearranged (sorted) and capped grid values for one covariate row.
  Eigen::VectorXd evaluate(int group, const RowRef& x) const;
  double at_level(int group, const RowRef& x, double level) const;
  QuantileGridFit negated() const;
};

// Grid node index (0..98) for a level rounded to two decimals and clamped to [0.01, 0.99].
int level_index(double level);

// y holds the outcome per row of data (NaN where unselected).
QuantileGridFit fit_quantile_grid(const Dataset& data, const Eigen::VectorXd& y, const std::vector<std::size_t>& rows,
                                  const FirstStageOptions& opt);

// Monotone rearrangement + capping of a raw grid (exposed for tests).
Eigen::VectorXd rearrange(const Eigen::VectorXd& raw, double lo, double hi);

struct RowNuisance {
  double s0 = 0.0;
  double s1 = 0.0;
  double p = 1.0;
  Region region = Region::Help;
  double q_upper = 0.0;  // help: Q_1(1-p); hurt: Q_0(1/p)
  double q_lower = 0.0;  // help: Q_1(p);   hurt: Q_0(1-1/p)
};

class NuisanceModel {
 public:
  virtual ~NuisanceModel() = default;
  virtual RowNuisance evaluate(const RowRef& x) const = 0;
};

class FittedNuisance : public NuisanceModel {
 public:
  FittedNuisance(SelectionFit selection, QuantileGridFit grid)
      : selection_(std::move(selection)), grid_(std::move(grid)) {}
  RowNuisance evaluate(const RowRef& x) const override;
  const SelectionFit& selection() const { return selection_; }
  const QuantileGridFit& grid() const { return grid_; }

 private:
  SelectionFit selection_;
  QuantileGridFit grid_;
};

class PluginNuisance : public NuisanceModel {
 public:
  explicit PluginNuisance(std::function<RowNuisance(const RowRef&)> fn) : fn_(std::move(fn)) {}
  RowNuisance evaluate(const RowRef& x) const override { return fn_(x); }

 private:
  std::function<RowNuisance(const RowRef&)> fn_;
};

// Builds RowNuisance from selection probabilities and a quantile function
// Q(group, level), following the help/hurt level conventions.
RowNuisance make_row_nuisance(double s0, double s1, const std::function<double(int, double)>& quantile);

struct PropensityMode {
  bool known = false;
  double pi = 0.5;  // used when known
};

struct NuisanceBundle {
  std::shared_ptr<const NuisanceModel> model;
  double pi = 0.5;
  double mu10_help = 0.0;  // NaN when help is empty
  double mu11_hurt = 0.0;  // NaN when hurt is empty
  RegionPartition regions;       // over the evaluation rows
  std::vector<RowNuisance> rows;  // evaluated nuisance per evaluation row
};

double sample_propensity(const Dataset& data);

// Normalizers are s-weighted means over the classified regions of eval_rows.
NuisanceBundle assemble_bundle(std::shared_ptr<const NuisanceModel> model, const Dataset& data,
                               const std::vector<std::size_t>& eval_rows, double pi);

}  // namespace leebounds
