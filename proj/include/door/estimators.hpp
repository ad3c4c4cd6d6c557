#pragma once

#include <door/dataset.hpp>
#include <door/regression.hpp>
#include <door/types.hpp>

#include <string>

namespace door {

enum class Method { crude, iptw, iptw_hajek, gformula, dr };

std::string method_name(Method m);
Method parse_method(const std::string& name);

/// Pairwise comparison matrix: 0.5 on the diagonal, 1 below, 0 above, so that
/// p1' A p0 scores a random treated-vs-control pair as win/tie/loss.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> comparison_matrix(Index levels) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a(levels, levels);
  for (Index k = 0; k < levels; ++k)
    for (Index l = 0; l < levels; ++l)
      a(k, l) = k == l ? Scalar(0.5) : (k > l ? Scalar(1) : Scalar(0));
  return a;
}

/// DOOR probability p1' A p0, accumulated through prefix sums of p0.
/// Inputs need not sum to one (unnormalized IPTW cells are valid inputs).
template <typename D1, typename D2>
double door_from_cells(const Eigen::MatrixBase<D1>& p1, const Eigen::MatrixBase<D2>& p0) {
  if (p1.size() != p0.size())
    throw ValidationError("door_from_cells: cell vectors have different lengths");
  double below = 0.0;  // sum of p0 over categories strictly less desirable
  double d = 0.0;
  for (Index k = 0; k < p1.size(); ++k) {
    d += p1[k] * (below + 0.5 * p0[k]);
    below += p0[k];
  }
  return d;
}

/// Estimated counterfactual cell-probability vectors under one method.
struct CellProbEstimate {
  Method method = Method::crude;
  Vector p1;        // P(Y^1 = k), k = 1..K
  Vector p0;        // P(Y^0 = k)
  Vector weights;   // per-subject own-arm weight (iptw / dr only)
};

/// Within-arm empirical proportions, no covariate adjustment.
CellProbEstimate crude_cells(const DoorDataset& ds);

/// Inverse-probability weighted cells. Unnormalized by default; hajek divides
/// each arm's vector by its own sum. Errors if any propensity touches {0,1}.
CellProbEstimate iptw_cells(const DoorDataset& ds, const PropensityFit& ps, bool hajek = false);

/// G-computation: average the model's counterfactual cell probabilities.
CellProbEstimate gformula_cells(const DoorDataset& ds, const OutcomeFit& of);

/// Augmented IPTW combining both nuisance models; unnormalized weights.
CellProbEstimate dr_cells(const DoorDataset& ds, const PropensityFit& ps, const OutcomeFit& of);

}  // namespace door
