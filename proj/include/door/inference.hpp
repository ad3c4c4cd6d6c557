#pragma once

#include <door/dataset.hpp>
#include <door/estimators.hpp>
#include <door/regression.hpp>
#include <door/types.hpp>

#include <array>
#include <cstdint>
#include <optional>

namespace door {

/// Per-subject influence functions of the 2K-2 free cell probabilities,
/// columns ordered (phi_11..phi_1,K-1, phi_01..phi_0,K-1). Column means are
/// zero up to solver tolerance for every method.
struct InfluenceMatrix {
  Matrix phi;  // n x (2K-2)
  Method method = Method::crude;
};

InfluenceMatrix crude_influence(const DoorDataset& ds, const CellProbEstimate& cells);
InfluenceMatrix iptw_influence(const DoorDataset& ds, const PropensityFit& ps,
                               const CellProbEstimate& cells);
InfluenceMatrix gformula_influence(const DoorDataset& ds, const OutcomeFit& of,
                                   const CellProbEstimate& cells);
InfluenceMatrix dr_influence(const DoorDataset& ds, const PropensityFit& ps,
                             const OutcomeFit& of, const CellProbEstimate& cells);

/// Sigma_n = phi' phi / n, the per-observation covariance of the free cells;
/// Var(psi_hat) is estimated by Sigma_n / n.
Matrix influence_covariance(const InfluenceMatrix& phi);

/// Gradient of D with respect to the free cells (p_11..p_1,K-1, p_01..p_0,K-1)
/// with each arm's K-th cell substituted by one minus the rest.
Vector door_jacobian(const Vector& p1, const Vector& p0);

struct DoorEstimate {
  double d_hat = 0.5;
  Matrix sigma;        // (2K-2)^2 free-cell covariance (per observation)
  Vector jacobian;     // length 2K-2
  double se = 0.0;
  std::array<double, 2> ci95{0.0, 0.0};
  double p_value = 1.0;
  Method method = Method::crude;
};

/// Delta-method inference: D_hat from the plug-in cells, se from J' Sigma J / n,
/// Wald CI and two-sided test of D = 0.5.
DoorEstimate door_inference(const DoorDataset& ds, const CellProbEstimate& cells,
                            const InfluenceMatrix& phi);

struct BootstrapResult {
  double se = 0.0;
  std::array<double, 2> ci95{0.0, 0.0};  // percentile interval
  int replicates = 0;
  int failures = 0;
};

/// Row-resampling bootstrap with full nuisance refits per resample.
/// Deterministic given seed for any thread count.
BootstrapResult bootstrap_se(const DoorDataset& ds, const ModelSpec& spec, Method method,
                             int replicates, std::uint64_t seed, int threads = 1);

/// One method end to end: fit whatever nuisance models the method needs,
/// form cells and influence functions, run the delta method. Pre-fitted
/// nuisance models may be passed to avoid refitting. Hajek-normalized IPTW
/// has no analytic influence path; its MethodFit carries the point estimate
/// only and variance must come from bootstrap_se.
struct MethodFit {
  CellProbEstimate cells;
  InfluenceMatrix influence;
  DoorEstimate estimate;
  std::optional<PropensityFit> propensity;
  std::optional<OutcomeFit> outcome;
};

MethodFit run_method(const DoorDataset& ds, const ModelSpec& spec, Method method,
                     const PropensityFit* reuse_propensity = nullptr,
                     const OutcomeFit* reuse_outcome = nullptr);

/// Collapse the outcome at `cut` (desirable = Y >= cut), refit the outcome
/// model on the binary scale, reuse the propensity model, and return the
/// K=2 analysis.
DoorEstimate sequential_dichotomized(const DoorDataset& ds, const ModelSpec& spec,
                                     Method method, int cut,
                                     const PropensityFit* reuse_propensity = nullptr);

}  // namespace door
