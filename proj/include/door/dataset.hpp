#pragma once

#include <door/types.hpp>

#include <array>
#include <string>
#include <vector>

namespace door {

/// Two-arm ordinal-outcome dataset. Immutable after construction; all
/// invariants (outcome range, both arms present, finite covariates) are
/// enforced by the constructor, so downstream code can share instances
/// freely across threads.
class DoorDataset {
 public:
  DoorDataset(IntVector outcome, IntVector treatment, Matrix covariates,
              std::vector<std::string> covariate_names, int levels);

  Index n() const { return outcome_.size(); }
  int levels() const { return levels_; }
  Index num_covariates() const { return covariates_.cols(); }

  const IntVector& outcome() const { return outcome_; }
  const IntVector& treatment() const { return treatment_; }
  const Matrix& covariates() const { return covariates_; }
  const std::vector<std::string>& covariate_names() const { return names_; }

  Index arm_size(int z) const { return z ? n_treated_ : n() - n_treated_; }

  /// Column index of a named covariate; throws ValidationError if absent.
  Index covariate_index(const std::string& name) const;

  /// n x selected.size() view of the named covariate columns, in given order.
  Matrix covariate_subset(const std::vector<std::string>& selected) const;

 private:
  IntVector outcome_;
  IntVector treatment_;
  Matrix covariates_;
  std::vector<std::string> names_;
  int levels_ = 0;
  Index n_treated_ = 0;
};

/// Which covariates feed which nuisance model, plus estimation options.
/// Misspecified analyses are expressed by listing a strict subset.
struct ModelSpec {
  std::vector<std::string> propensity_covariates;
  std::vector<std::string> outcome_covariates;
  bool hajek = false;
  double clip = 0.0;              // propensity clipped to [clip, 1-clip]; 0 = off
  int bootstrap_replicates = 0;   // 0 = analytic inference only

  void validate(const DoorDataset& ds) const;
};

struct CsvSchema {
  std::string outcome_column;
  std::string treatment_column;
  std::vector<std::string> covariate_columns;
};

struct LoadOptions {
  bool complete_case = false;  // drop rows with missing cells instead of erroring
};

/// Strict CSV ingestion. Rejects missing/non-numeric cells with the offending
/// line number unless complete_case is set, in which case rows with missing
/// cells are dropped and counted in *dropped_rows.
DoorDataset load_csv(const std::string& path, const CsvSchema& schema, int levels,
                     const LoadOptions& options = {}, Index* dropped_rows = nullptr);

void write_csv(const DoorDataset& ds, const std::string& path);

struct ArmSummary {
  Index size = 0;
  IntVector level_counts;   // K entries, zeros kept for empty levels
  Vector covariate_means;
};

struct DatasetSummary {
  std::array<ArmSummary, 2> arms;  // index by treatment value
  std::vector<std::string> covariate_names;
  int levels = 0;
};

DatasetSummary summarize(const DoorDataset& ds);

/// Row-resampled copy (bootstrap). Throws ValidationError if a resample
/// violates dataset invariants (e.g. loses an arm).
DoorDataset resample(const DoorDataset& ds, const std::vector<Index>& rows);

/// Collapse the outcome to {1,2} with 2 = desirable = (Y >= cut).
DoorDataset dichotomize(const DoorDataset& ds, int cut);

}  // namespace door
