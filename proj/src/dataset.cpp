#include <door/dataset.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace door {

DoorDataset::DoorDataset(IntVector outcome, IntVector treatment, Matrix covariates,
                         std::vector<std::string> covariate_names, int levels)
    : outcome_(std::move(outcome)),
      treatment_(std::move(treatment)),
      covariates_(std::move(covariates)),
      names_(std::move(covariate_names)),
      levels_(levels) {
  const Index n = outcome_.size();
  if (n == 0) throw ValidationError("dataset: no rows");
  if (levels_ < 2) throw ValidationError("dataset: need at least 2 outcome levels");
  if (treatment_.size() != n || covariates_.rows() != n)
    throw ValidationError("dataset: column lengths disagree");
  if (static_cast<Index>(names_.size()) != covariates_.cols())
    throw ValidationError("dataset: covariate name count does not match columns");
  {
    std::set<std::string> unique(names_.begin(), names_.end());
    if (unique.size() != names_.size())
      throw ValidationError("dataset: duplicate covariate names");
  }
  for (Index i = 0; i < n; ++i) {
    if (outcome_[i] < 1 || outcome_[i] > levels_)
      throw ValidationError("dataset: outcome " + std::to_string(outcome_[i]) + " at row " +
                            std::to_string(i + 1) + " outside 1.." + std::to_string(levels_));
    if (treatment_[i] != 0 && treatment_[i] != 1)
      throw ValidationError("dataset: treatment at row " + std::to_string(i + 1) +
                            " not in {0,1}");
    if (treatment_[i] == 1) ++n_treated_;
  }
  if (n_treated_ == 0 || n_treated_ == n)
    throw ValidationError("dataset: single-arm data (every treatment value is " +
                          std::to_string(treatment_[0]) + ")");
  if (!covariates_.allFinite())
    throw ValidationError("dataset: non-finite covariate value");
}

Index DoorDataset::covariate_index(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    throw ValidationError("dataset: no covariate named '" + name + "'");
  return static_cast<Index>(it - names_.begin());
}

Matrix DoorDataset::covariate_subset(const std::vector<std::string>& selected) const {
  Matrix out(n(), static_cast<Index>(selected.size()));
  for (size_t j = 0; j < selected.size(); ++j)
    out.col(static_cast<Index>(j)) = covariates_.col(covariate_index(selected[j]));
  return out;
}

void ModelSpec::validate(const DoorDataset& ds) const {
  for (const auto& name : propensity_covariates) ds.covariate_index(name);
  for (const auto& name : outcome_covariates) ds.covariate_index(name);
  if (clip < 0.0 || clip >= 0.5)
    throw ValidationError("model spec: clip must lie in [0, 0.5)");
  if (bootstrap_replicates < 0)
    throw ValidationError("model spec: negative bootstrap replicate count");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    size_t start = 0;
    while (start < field.size() && field[start] == ' ') ++start;
    fields.push_back(field.substr(start));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == ".";
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

DoorDataset load_csv(const std::string& path, const CsvSchema& schema, int levels,
                     const LoadOptions& options, Index* dropped_rows) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("load_csv: empty file '" + path + "'");
  const auto header = split_csv_line(line);

  std::unordered_map<std::string, Index> column_of;
  for (size_t j = 0; j < header.size(); ++j) column_of[header[j]] = static_cast<Index>(j);
  auto require_column = [&](const std::string& name) {
    const auto it = column_of.find(name);
    if (it == column_of.end())
      throw ValidationError("load_csv: column '" + name + "' not found in header of '" + path +
                            "'");
    return it->second;
  };

  const Index outcome_col = require_column(schema.outcome_column);
  const Index treatment_col = require_column(schema.treatment_column);
  std::vector<Index> covariate_cols;
  covariate_cols.reserve(schema.covariate_columns.size());
  for (const auto& name : schema.covariate_columns) covariate_cols.push_back(require_column(name));

  std::vector<int> outcome, treatment;
  std::vector<double> covariate_rows;  // row-major staging
  const size_t p = covariate_cols.size();
  Index dropped = 0;
  Index file_line = 1;

  while (std::getline(in, line)) {
    ++file_line;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ValidationError("load_csv: line " + std::to_string(file_line) + " has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));

    bool missing = false;
    auto fetch = [&](Index col, const char* what) -> double {
      const std::string& cell = fields[static_cast<size_t>(col)];
      if (is_missing_token(cell)) {
        missing = true;
        return 0.0;
      }
      double value = 0.0;
      if (!parse_double(cell, value))
        throw ValidationError("load_csv: non-numeric " + std::string(what) + " '" + cell +
                              "' at line " + std::to_string(file_line));
      return value;
    };

    const double y = fetch(outcome_col, "outcome");
    const double z = fetch(treatment_col, "treatment");
    std::vector<double> xs(p);
    for (size_t j = 0; j < p; ++j) xs[j] = fetch(covariate_cols[j], "covariate");

    if (missing) {
      if (options.complete_case) {
        ++dropped;
        continue;
      }
      throw ValidationError("load_csv: missing value at line " + std::to_string(file_line) +
                            " (use complete-case handling to drop such rows)");
    }

    if (y != std::floor(y))
      throw ValidationError("load_csv: outcome must be integer-valued, got '" +
                            fields[static_cast<size_t>(outcome_col)] + "' at line " +
                            std::to_string(file_line));
    if (y < 1 || y > levels)
      throw ValidationError("load_csv: outcome " + std::to_string(static_cast<int>(y)) +
                            " outside declared range 1.." + std::to_string(levels) + " at line " +
                            std::to_string(file_line));
    if (z != 0.0 && z != 1.0)
      throw ValidationError("load_csv: treatment must be 0 or 1, got '" +
                            fields[static_cast<size_t>(treatment_col)] + "' at line " +
                            std::to_string(file_line));

    outcome.push_back(static_cast<int>(y));
    treatment.push_back(static_cast<int>(z));
    covariate_rows.insert(covariate_rows.end(), xs.begin(), xs.end());
  }

  if (dropped_rows) *dropped_rows = dropped;
  const Index n = static_cast<Index>(outcome.size());
  if (n == 0) throw ValidationError("load_csv: no usable data rows in '" + path + "'");

  IntVector y(n), z(n);
  Matrix x(n, static_cast<Index>(p));
  for (Index i = 0; i < n; ++i) {
    y[i] = outcome[static_cast<size_t>(i)];
    z[i] = treatment[static_cast<size_t>(i)];
    for (size_t j = 0; j < p; ++j) x(i, static_cast<Index>(j)) = covariate_rows[i * p + j];
  }
  return DoorDataset(std::move(y), std::move(z), std::move(x), schema.covariate_columns, levels);
}

void write_csv(const DoorDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("write_csv: cannot open '" + path + "' for writing");
  out << "outcome,treatment";
  for (const auto& name : ds.covariate_names()) out << ',' << name;
  out << '\n';
  char buf[64];
  for (Index i = 0; i < ds.n(); ++i) {
    out << ds.outcome()[i] << ',' << ds.treatment()[i];
    for (Index j = 0; j < ds.num_covariates(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.covariates()(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

DatasetSummary summarize(const DoorDataset& ds) {
  DatasetSummary s;
  s.covariate_names = ds.covariate_names();
  s.levels = ds.levels();
  for (int arm = 0; arm < 2; ++arm) {
    auto& a = s.arms[static_cast<size_t>(arm)];
    a.size = ds.arm_size(arm);
    a.level_counts = IntVector::Zero(ds.levels());
    a.covariate_means = Vector::Zero(ds.num_covariates());
  }
  for (Index i = 0; i < ds.n(); ++i) {
    auto& a = s.arms[static_cast<size_t>(ds.treatment()[i])];
    a.level_counts[ds.outcome()[i] - 1] += 1;
    a.covariate_means += ds.covariates().row(i).transpose();
  }
  for (auto& a : s.arms)
    if (a.size > 0) a.covariate_means /= static_cast<double>(a.size);
  return s;
}

DoorDataset resample(const DoorDataset& ds, const std::vector<Index>& rows) {
  const Index m = static_cast<Index>(rows.size());
  IntVector y(m), z(m);
  Matrix x(m, ds.num_covariates());
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<size_t>(i)];
    if (r < 0 || r >= ds.n()) throw ValidationError("resample: row index out of range");
    y[i] = ds.outcome()[r];
    z[i] = ds.treatment()[r];
    x.row(i) = ds.covariates().row(r);
  }
  return DoorDataset(std::move(y), std::move(z), std::move(x), ds.covariate_names(), ds.levels());
}

DoorDataset dichotomize(const DoorDataset& ds, int cut) {
  if (cut < 2 || cut > ds.levels())
    throw ValidationError("dichotomize: cut must lie in 2.." + std::to_string(ds.levels()));
  IntVector y(ds.n());
  for (Index i = 0; i < ds.n(); ++i) y[i] = ds.outcome()[i] >= cut ? 2 : 1;
  if (y.minCoeff() == y.maxCoeff())
    throw ValidationError("dichotomize: collapsed outcome is degenerate at cut " +
                          std::to_string(cut));
  return DoorDataset(std::move(y), ds.treatment(), ds.covariates(), ds.covariate_names(), 2);
}

}  // namespace door
