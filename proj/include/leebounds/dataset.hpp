#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace leebounds {

// Immutable observational table. Outcomes of unselected rows are NaN.
struct Dataset {
  Eigen::VectorXi treatment;
  Eigen::VectorXi selection;
  Eigen::MatrixXd outcome;     // n x d_out
  Eigen::MatrixXd covariates;  // n x p, first column all ones
  Eigen::VectorXd weight;
  std::vector<std::int64_t> cluster;  // empty when absent
  Eigen::VectorXi instrument;         // size 0 when absent
  std::vector<std::string> covariate_names;
  std::vector<std::string> outcome_names;

  std::size_t n() const { return static_cast<std::size_t>(treatment.size()); }
  std::size_t p() const { return static_cast<std::size_t>(covariates.cols()); }
  std::size_t d_out() const { return static_cast<std::size_t>(outcome.cols()); }
  bool has_clusters() const { return !cluster.empty(); }
  bool has_instrument() const { return instrument.size() > 0; }
  double y(std::size_t i) const { return outcome(static_cast<Eigen::Index>(i), 0); }
  int d(std::size_t i) const { return treatment(static_cast<Eigen::Index>(i)); }
  int s(std::size_t i) const { return selection(static_cast<Eigen::Index>(i)); }
  double w(std::size_t i) const { return weight(static_cast<Eigen::Index>(i)); }

  // Index of a covariate column by name, or -1.
  int covariate_index(const std::string& name) const;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t count = 0;
  std::vector<std::size_t> sample_rows;  // first few offending rows
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  bool ok() const;
  std::string summary() const;
};

ValidationReport validate(const Dataset& data);

// Builds a Dataset and enforces the invariants (throws on violation).
// Outcomes of rows with selection = 0 are replaced by NaN. A constant column
// is prepended to the covariates when the first column is not all ones.
Dataset make_dataset(Eigen::VectorXi treatment, Eigen::VectorXi selection, Eigen::MatrixXd outcome,
                     Eigen::MatrixXd covariates, Eigen::VectorXd weight = Eigen::VectorXd(),
                     std::vector<std::int64_t> cluster = {},
                     std::vector<std::string> covariate_names = {},
                     std::vector<std::string> outcome_names = {});

struct CsvSchema {
  std::string treatment = "D";
  std::string selection = "S";
  std::vector<std::string> outcomes = {"Y"};
  std::vector<std::string> covariates;  // empty: every other numeric column
  std::string weight;
  std::string cluster;
  std::string instrument;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
// The weight column is written only when some weight differs from one.
void write_csv(const std::string& path, const Dataset& data);

// Rows of data in the given order (duplicates allowed, used by the bootstrap).
Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows);

struct FoldPartition {
  int K = 2;
  std::vector<int> assignment;
  std::uint64_t seed = 0;

  std::vector<std::size_t> fold_rows(int k) const;
  std::vector<std::size_t> complement_rows(int k) const;
  std::vector<std::size_t> fold_sizes() const;
};

FoldPartition kfold_partition(std::size_t n, int K, std::uint64_t seed);

// Returns (auxiliary, main).
std::pair<Dataset, Dataset> split_auxiliary(const Dataset& data, double fraction, std::uint64_t seed);

// Discrete cell id per row from the distinct value combinations of the given
// covariate columns; ids follow the lexicographic order of the combinations.
std::vector<int> cell_ids(const Dataset& data, const std::vector<int>& columns, int* n_cells = nullptr);

}  // namespace leebounds
