#pragma once

#include <door/dataset.hpp>
#include <door/estimators.hpp>
#include <door/rng.hpp>
#include <door/types.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace door {

enum class Scenario { both_correct, ps_correct, po_correct, both_incorrect };

std::string scenario_name(Scenario s);
Scenario parse_scenario(const std::string& name);

/// Data-generating process and study settings. Default design: four
/// equicorrelated covariates (two dichotomized at zero), logistic treatment
/// assignment, and a proportional-odds outcome with K=4 levels where the
/// treatment effect delta shifts mass toward more desirable outcomes:
///   P(Y >= k+1 | X, Z) = expit(alpha_k + gamma' X + delta Z), alpha decreasing.
struct SimConfig {
  Index n = 500;
  int replicates = 2000;
  double delta = 0.4;
  double beta0 = -0.4;
  Vector beta = (Vector(4) << 0.15, -0.3, 0.2, -0.25).finished();
  Vector alpha = (Vector(3) << 1.0, 0.5, -0.5).finished();  // K-1 entries, strictly decreasing
  Vector gamma = (Vector(4) << 0.8, -0.4, 0.6, -0.3).finished();
  double rho = 0.5;
  Scenario scenario = Scenario::both_correct;
  std::uint64_t seed = 1;
  int threads = 0;                    // 0 = hardware concurrency
  long truth_draws = 1'000'000;       // Monte Carlo draws for D_true

  int levels() const { return static_cast<int>(alpha.size()) + 1; }
  void validate() const;
};

/// n x 4 covariates: equicorrelated standard normals with X3, X4 dichotomized at 0.
Matrix gen_covariates(Index n, double rho, RngStream& rng);

/// Bernoulli treatment with P(Z=1|X) = expit(beta0 + beta' x).
IntVector gen_treatment(const Matrix& x, double beta0, const Vector& beta, RngStream& rng);

/// Ordinal outcome from the decreasing-intercept model above.
IntVector gen_outcome(const Matrix& x, const IntVector& z, const Vector& alpha,
                      const Vector& gamma, double delta, RngStream& rng);

/// Monte Carlo truth: average exact counterfactual cell probabilities over
/// fresh covariate draws with treatment fixed at 1 and 0 (no outcome
/// sampling), then apply the DOOR kernel.
double mc_true_door(const SimConfig& config, long draws);

struct MethodStats {
  Method method = Method::crude;
  double bias = 0.0;
  double emp_se = 0.0;     // NaN when fewer than 2 replicates
  double avg_see = 0.0;
  double coverage = 0.0;   // 95% CI covering D_true
  double rejection = 0.0;  // two-sided Wald test of D = 0.5 at level 0.05
};

struct StudyReport {
  SimConfig config;
  double d_true = 0.5;
  std::vector<MethodStats> rows;  // crude, iptw, gformula, dr
  int replicates_used = 0;
  int failures = 0;
};

/// Replicate the bias / SE / SEE / coverage study for one scenario.
/// Deterministic given (config.seed, config) for any thread count.
StudyReport run_replication_study(const SimConfig& config);

struct PowerCell {
  double delta = 0.0;
  double d_true = 0.5;
  Scenario scenario = Scenario::both_correct;
  Method method = Method::crude;
  double rejection = 0.0;
};

struct PowerReport {
  SimConfig config;  // delta field unused; grid below
  std::vector<double> deltas;
  std::vector<PowerCell> cells;
  int failures = 0;
};

/// Rejection rates over a grid of treatment effects for one scenario.
PowerReport run_power_study(const SimConfig& base, const std::vector<double>& deltas);

/// Replicate-indexed draw of one synthetic dataset (used by studies and by
/// fixtures; covariates are named X1..X4).
DoorDataset gen_dataset(const SimConfig& config, std::uint64_t replicate_index);

/// Covariate lists implied by a scenario: full set or the misspecified {X1, X3}.
ModelSpec scenario_model_spec(Scenario s);

}  // namespace door
