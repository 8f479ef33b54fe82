#include "leebounds/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "leebounds/errors.hpp"
#include "leebounds/numeric.hpp"

namespace leebounds {

namespace {

constexpr std::size_t kSampleRows = 5;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

// Strict numeric parse. Rejects textual NaN/Inf markers and trailing junk.
bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end != begin + s.size()) return false;
  return std::isfinite(out);
}

std::string row_label(std::size_t row) { return "row " + std::to_string(row + 1); }

void add_check(ValidationReport& rep, const std::string& name, const std::vector<std::size_t>& bad) {
  CheckResult c;
  c.name = name;
  c.passed = bad.empty();
  c.count = bad.size();
  for (std::size_t i = 0; i < bad.size() && i < kSampleRows; ++i) c.sample_rows.push_back(bad[i]);
  rep.checks.push_back(std::move(c));
}

}  // namespace

int Dataset::covariate_index(const std::string& name) const {
  for (std::size_t j = 0; j < covariate_names.size(); ++j)
    if (covariate_names[j] == name) return static_cast<int>(j);
  return -1;
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    if (c.passed) continue;
    os << c.name << ": " << c.count << " row(s)";
    if (!c.sample_rows.empty()) {
      os << " (e.g.";
      for (auto r : c.sample_rows) os << ' ' << row_label(r);
      os << ')';
    }
    os << "; ";
  }
  return os.str();
}

ValidationReport validate(const Dataset& data) {
  ValidationReport rep;
  const std::size_t n = data.n();
  std::vector<std::size_t> bad_d, bad_s, bad_y, bad_w, bad_x, bad_c, bad_z;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (data.treatment(ii) != 0 && data.treatment(ii) != 1) bad_d.push_back(i);
    if (data.selection(ii) != 0 && data.selection(ii) != 1) bad_s.push_back(i);
    bool y_ok = true;
    for (Eigen::Index k = 0; k < data.outcome.cols(); ++k) {
      const double v = data.outcome(ii, k);
      if (data.selection(ii) == 1 ? !std::isfinite(v) : !std::isnan(v)) y_ok = false;
    }
    if (!y_ok) bad_y.push_back(i);
    if (!(data.weight(ii) >= 0.0) || !std::isfinite(data.weight(ii))) bad_w.push_back(i);
    if (!data.covariates.row(ii).allFinite()) bad_x.push_back(i);
    if (data.covariates.cols() == 0 || data.covariates(ii, 0) != 1.0) bad_c.push_back(i);
    if (data.has_instrument() && data.instrument(ii) != 0 && data.instrument(ii) != 1) bad_z.push_back(i);
  }
  add_check(rep, "treatment binary", bad_d);
  add_check(rep, "selection binary", bad_s);
  add_check(rep, "outcome present iff selected", bad_y);
  add_check(rep, "weights nonnegative", bad_w);
  std::vector<std::size_t> bad_sum;
  if (!(data.weight.sum() > 0.0)) bad_sum.push_back(0);
  add_check(rep, "weights sum positive", bad_sum);
  add_check(rep, "covariates finite", bad_x);
  add_check(rep, "first covariate column all ones", bad_c);
  std::vector<std::size_t> bad_len;
  if (data.has_clusters() && data.cluster.size() != n) bad_len.push_back(0);
  if (static_cast<std::size_t>(data.selection.size()) != n ||
      static_cast<std::size_t>(data.outcome.rows()) != n ||
      static_cast<std::size_t>(data.covariates.rows()) != n ||
      static_cast<std::size_t>(data.weight.size()) != n)
    bad_len.push_back(0);
  add_check(rep, "column lengths", bad_len);
  add_check(rep, "instrument binary", bad_z);
  return rep;
}

Dataset make_dataset(Eigen::VectorXi treatment, Eigen::VectorXi selection, Eigen::MatrixXd outcome,
                     Eigen::MatrixXd covariates, Eigen::VectorXd weight,
                     std::vector<std::int64_t> cluster, std::vector<std::string> covariate_names,
                     std::vector<std::string> outcome_names) {
  const Eigen::Index n = treatment.size();
  if (selection.size() != n || outcome.rows() != n || covariates.rows() != n)
    fail(ErrorKind::Shape, "dataset columns have different lengths");
  if (weight.size() == 0) weight = Eigen::VectorXd::Ones(n);
  if (weight.size() != n) fail(ErrorKind::Shape, "weight column length mismatch");
  if (!cluster.empty() && static_cast<Eigen::Index>(cluster.size()) != n)
    fail(ErrorKind::Shape, "cluster column length mismatch");
  if (covariate_names.size() != static_cast<std::size_t>(covariates.cols())) {
    covariate_names.clear();
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) covariate_names.push_back("x" + std::to_string(j));
  }
  if (outcome_names.size() != static_cast<std::size_t>(outcome.cols())) {
    outcome_names.clear();
    if (outcome.cols() == 1)
      outcome_names.push_back("Y");
    else
      for (Eigen::Index k = 0; k < outcome.cols(); ++k) outcome_names.push_back("Y" + std::to_string(k + 1));
  }
  const bool has_const = covariates.cols() > 0 && (covariates.col(0).array() == 1.0).all();
  if (!has_const) {
    Eigen::MatrixXd x(n, covariates.cols() + 1);
    x.col(0).setOnes();
    x.rightCols(covariates.cols()) = covariates;
    covariates = std::move(x);
    covariate_names.insert(covariate_names.begin(), "const");
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (selection(i) == 0) outcome.row(i).setConstant(std::nan(""));

  Dataset d;
  d.treatment = std::move(treatment);
  d.selection = std::move(selection);
  d.outcome = std::move(outcome);
  d.covariates = std::move(covariates);
  d.weight = std::move(weight);
  d.cluster = std::move(cluster);
  d.covariate_names = std::move(covariate_names);
  d.outcome_names = std::move(outcome_names);
  const auto rep = validate(d);
  if (!rep.ok()) {
    for (const auto& c : rep.checks) {
      if (c.passed) continue;
      const ErrorKind kind = c.name == "outcome present iff selected" ? ErrorKind::Integrity
                             : c.name == "column lengths"             ? ErrorKind::Shape
                                                                      : ErrorKind::Value;
      fail(kind, rep.summary());
    }
  }
  return d;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Schema, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Schema, "empty file " + path);
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < header.size(); ++j) col[header[j]] = j;
  auto need = [&](const std::string& name, const char* role) {
    auto it = col.find(name);
    if (it == col.end()) fail(ErrorKind::Schema, std::string("missing ") + role + " column '" + name + "'");
    return it->second;
  };
  const std::size_t jd = need(schema.treatment, "treatment");
  const std::size_t js = need(schema.selection, "selection");
  if (schema.outcomes.empty()) fail(ErrorKind::Schema, "no outcome column named");
  std::vector<std::size_t> jy;
  for (const auto& o : schema.outcomes) jy.push_back(need(o, "outcome"));
  const bool has_w = !schema.weight.empty();
  const bool has_c = !schema.cluster.empty();
  const bool has_z = !schema.instrument.empty();
  const std::size_t jw = has_w ? need(schema.weight, "weight") : 0;
  const std::size_t jc = has_c ? need(schema.cluster, "cluster") : 0;
  const std::size_t jz = has_z ? need(schema.instrument, "instrument") : 0;
  std::vector<std::string> xnames = schema.covariates;
  if (xnames.empty()) {
    std::set<std::size_t> used = {jd, js};
    used.insert(jy.begin(), jy.end());
    if (has_w) used.insert(jw);
    if (has_c) used.insert(jc);
    if (has_z) used.insert(jz);
    for (std::size_t j = 0; j < header.size(); ++j)
      if (!used.count(j)) xnames.push_back(header[j]);
  }
  std::vector<std::size_t> jx;
  for (const auto& x : xnames) jx.push_back(need(x, "covariate"));

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      fail(ErrorKind::Value, row_label(rows.size()) + " has " + std::to_string(f.size()) +
                                 " fields, header has " + std::to_string(header.size()));
    rows.push_back(std::move(f));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) fail(ErrorKind::InsufficientData, "no data rows in " + path);
  Eigen::VectorXi D(n), S(n), Z(has_z ? n : 0);
  Eigen::MatrixXd Y(n, static_cast<Eigen::Index>(jy.size()));
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(jx.size()));
  Eigen::VectorXd W = Eigen::VectorXd::Ones(n);
  std::vector<std::string> cluster_labels;
  auto binary = [&](const std::string& s, std::size_t row, const char* role) {
    double v;
    if (!parse_number(s, v) || (v != 0.0 && v != 1.0))
      fail(ErrorKind::Value, row_label(row) + ": " + role + " value '" + s + "' is not 0/1");
    return static_cast<int>(v);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const auto& f = rows[r];
    D(i) = binary(f[jd], r, "treatment");
    S(i) = binary(f[js], r, "selection");
    if (has_z) Z(i) = binary(f[jz], r, "instrument");
    for (std::size_t k = 0; k < jy.size(); ++k) {
      const std::string& s = f[jy[k]];
      double v = std::nan("");
      if (!s.empty() && !parse_number(s, v))
        fail(ErrorKind::Value, row_label(r) + ": outcome value '" + s + "' is not a finite number");
      if (S(i) == 1 && s.empty())
        fail(ErrorKind::Integrity, row_label(r) + ": selected row has missing outcome '" + schema.outcomes[k] + "'");
      Y(i, static_cast<Eigen::Index>(k)) = v;
    }
    for (std::size_t k = 0; k < jx.size(); ++k) {
      double v;
      if (!parse_number(f[jx[k]], v))
        fail(ErrorKind::Value, row_label(r) + ": covariate '" + xnames[k] + "' value '" + f[jx[k]] + "' is not finite");
      X(i, static_cast<Eigen::Index>(k)) = v;
    }
    if (has_w) {
      double v;
      if (!parse_number(f[jw], v) || v < 0)
        fail(ErrorKind::Value, row_label(r) + ": weight '" + f[jw] + "' must be a nonnegative number");
      W(i) = v;
    }
    if (has_c) {
      if (f[jc].empty()) fail(ErrorKind::Value, row_label(r) + ": missing cluster id");
      cluster_labels.push_back(f[jc]);
    }
  }
  std::vector<std::int64_t> cluster;
  if (has_c) {
    std::map<std::string, std::int64_t> ids;
    for (const auto& s : cluster_labels) ids.emplace(s, 0);
    std::int64_t next = 0;
    for (auto& kv : ids) kv.second = next++;
    for (const auto& s : cluster_labels) cluster.push_back(ids[s]);
  }
  // Move an existing all-ones column to the front; otherwise make_dataset prepends one.
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if ((X.col(j).array() == 1.0).all()) {
      if (j != 0) {
        X.col(0).swap(X.col(j));
        std::swap(xnames[0], xnames[static_cast<std::size_t>(j)]);
      }
      break;
    }
  }
  Dataset d = make_dataset(std::move(D), std::move(S), std::move(Y), std::move(X), std::move(W),
                           std::move(cluster), xnames, schema.outcomes);
  d.instrument = std::move(Z);
  return d;
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Parameter, "cannot write " + path);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "D,S";
  for (const auto& o : data.outcome_names) out << ',' << o;
  for (std::size_t j = 1; j < data.p(); ++j) out << ',' << data.covariate_names[j];
  // Unit weights are implied when the column is absent.
  const bool has_w = (data.weight.array() != 1.0).any();
  if (has_w) out << ",weight";
  if (data.has_clusters()) out << ",cluster";
  if (data.has_instrument()) out << ",Z";
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << data.treatment(ii) << ',' << data.selection(ii);
    for (Eigen::Index k = 0; k < data.outcome.cols(); ++k) {
      out << ',';
      if (data.selection(ii) == 1) out << num(data.outcome(ii, k));
    }
    for (Eigen::Index j = 1; j < data.covariates.cols(); ++j) out << ',' << num(data.covariates(ii, j));
    if (has_w) out << ',' << num(data.weight(ii));
    if (data.has_clusters()) out << ',' << data.cluster[i];
    if (data.has_instrument()) out << ',' << data.instrument(ii);
    out << '\n';
  }
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  Dataset d;
  d.treatment.resize(m);
  d.selection.resize(m);
  d.outcome.resize(m, data.outcome.cols());
  d.covariates.resize(m, data.covariates.cols());
  d.weight.resize(m);
  if (data.has_instrument()) d.instrument.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    d.treatment(i) = data.treatment(r);
    d.selection(i) = data.selection(r);
    d.outcome.row(i) = data.outcome.row(r);
    d.covariates.row(i) = data.covariates.row(r);
    d.weight(i) = data.weight(r);
    if (data.has_instrument()) d.instrument(i) = data.instrument(r);
    if (data.has_clusters()) d.cluster.push_back(data.cluster[static_cast<std::size_t>(r)]);
  }
  d.covariate_names = data.covariate_names;
  d.outcome_names = data.outcome_names;
  return d;
}

std::vector<std::size_t> FoldPartition::fold_rows(int k) const {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == k) r.push_back(i);
  return r;
}

std::vector<std::size_t> FoldPartition::complement_rows(int k) const {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != k) r.push_back(i);
  return r;
}

std::vector<std::size_t> FoldPartition::fold_sizes() const {
  std::vector<std::size_t> s(static_cast<std::size_t>(K), 0);
  for (int a : assignment) ++s[static_cast<std::size_t>(a)];
  return s;
}

FoldPartition kfold_partition(std::size_t n, int K, std::uint64_t seed) {
  if (K < 2 || static_cast<std::size_t>(K) > n)
    fail(ErrorKind::Parameter, "fold count K=" + std::to_string(K) + " must satisfy 2 <= K <= n=" + std::to_string(n));
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(mix_seed(seed, 0x6b666f6c64ULL));
  rng.shuffle(perm);
  FoldPartition fp;
  fp.K = K;
  fp.seed = seed;
  fp.assignment.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) fp.assignment[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(K));
  return fp;
}

std::pair<Dataset, Dataset> split_auxiliary(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) fail(ErrorKind::Parameter, "auxiliary fraction must lie in (0,1)");
  Rng rng(mix_seed(seed, 0x6175785f73706c74ULL));
  std::vector<std::size_t> aux, main;
  if (data.has_clusters()) {
    std::vector<std::int64_t> ids(data.cluster.begin(), data.cluster.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    rng.shuffle(ids);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
    std::set<std::int64_t> chosen(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(take, ids.size())));
    for (std::size_t i = 0; i < data.n(); ++i) (chosen.count(data.cluster[i]) ? aux : main).push_back(i);
  } else {
    std::vector<std::size_t> perm(data.n());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.n())));
    std::vector<char> in_aux(data.n(), 0);
    for (std::size_t k = 0; k < take && k < perm.size(); ++k) in_aux[perm[k]] = 1;
    for (std::size_t i = 0; i < data.n(); ++i) (in_aux[i] ? aux : main).push_back(i);
  }
  if (aux.empty() || main.empty())
    fail(ErrorKind::Parameter, "auxiliary split leaves an empty part (fraction " + std::to_string(fraction) + ")");
  return {subset(data, aux), subset(data, main)};
}

std::vector<int> cell_ids(const Dataset& data, const std::vector<int>& columns, int* n_cells) {
  std::map<std::vector<double>, int> keys;
  std::vector<std::vector<double>> per_row(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    std::vector<double> key;
    for (int c : columns) {
      if (c < 0 || static_cast<std::size_t>(c) >= data.p()) fail(ErrorKind::Parameter, "cell column index out of range");
      key.push_back(data.covariates(static_cast<Eigen::Index>(i), c));
    }
    keys.emplace(key, 0);
    per_row[i] = std::move(key);
  }
  int next = 0;
  for (auto& kv : keys) kv.second = next++;
  std::vector<int> ids(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) ids[i] = keys[per_row[i]];
  if (n_cells) *n_cells = next;
  return ids;
}

}  // namespace leebounds
