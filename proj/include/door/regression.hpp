#pragma once

#include <door/dataset.hpp>
#include <door/types.hpp>

#include <array>
#include <string>
#include <vector>

namespace door {

// Per-subject scores (rows) and total observed information at a parameter
// point. info == -(Hessian of the log-likelihood), so info/n is the average
// information and U_i = n * info^{-1} * score_i is the parameter influence
// function satisfying sqrt(n)(theta_hat - theta) = n^{-1/2} sum U_i + o_p(1).
struct ScoreInfo {
  Matrix scores;   // n x q
  Matrix info;     // q x q, symmetric
  double loglik = 0.0;
};

/// Fitted logistic propensity model logit P(Z=1|X) = beta' x.
struct PropensityFit {
  Vector beta;                          // intercept first when built from ModelSpec
  Vector eta;                           // per-subject linear predictor
  Vector pi;                            // per-subject propensity, clipped if clip > 0
  Matrix design;                        // n x q rows used in the fit
  Matrix info;                          // total observed information at beta
  Matrix scores;                        // n x q per-subject scores at beta
  Matrix u_params;                      // n x q, U_i = n * info^{-1} * score_i
  std::vector<std::string> term_names;
  double clip = 0.0;
  Index clipped_count = 0;
  bool converged = false;
  int iterations = 0;
};

/// Fitted proportional-odds outcome model in the monotone intercept
/// parameterization: with c_1 = alpha_1, c_k = alpha_1 + sum_{j=2..k} exp(alpha_j),
///   P(Y <= k | x) = expit(c_k - eta),   eta = coef' x,
/// so cumulative intercepts are ordered at every iterate and positive
/// coefficients shift mass toward more desirable (larger) outcomes.
/// theta = (alpha_1..alpha_{K-1}, coefficients); the treatment coefficient is
/// the column marked treatment_column of the design (last when built from
/// ModelSpec).
struct OutcomeFit {
  Vector theta;
  Vector cumulative_intercepts;          // implied c_k, reported alongside theta
  int levels = 0;
  Index treatment_column = -1;           // -1: no treatment term (null models)
  std::array<Matrix, 2> cells;           // cells[a]: n x K counterfactual P(Y=k|x_i, Z=a)
  std::array<std::vector<Matrix>, 2> cell_grads;  // cell_grads[a][k-1]: n x q, d m_iak / d theta
  Matrix info;                           // total observed information at theta
  Matrix scores;                         // n x q
  Matrix u_params;                       // n x q
  std::vector<std::string> term_names;
  bool converged = false;
  int iterations = 0;
};

// --- Model-spec driven fits ---

/// Maximum-likelihood logistic fit of treatment on [1, selected covariates].
PropensityFit fit_logistic(const DoorDataset& ds, const ModelSpec& spec);

/// Maximum-likelihood proportional-odds fit of the outcome on
/// [selected covariates, treatment indicator] (pooled model, treatment last).
OutcomeFit fit_proportional_odds(const DoorDataset& ds, const ModelSpec& spec);

// --- Design-level engines (used by the ModelSpec-driven fits above and by
// callers that need nonstandard designs, e.g. saturated interaction models) ---

PropensityFit fit_logistic_raw(const IntVector& z, const Matrix& design,
                               std::vector<std::string> term_names, double clip = 0.0);

/// Counterfactual prediction designs: same columns as `observed` with every
/// treatment-dependent column set to its Z=0 / Z=1 value.
struct OrdinalDesigns {
  Matrix observed;
  Matrix at_control;
  Matrix at_treated;
  Index treatment_column = -1;
};

OutcomeFit fit_ordinal_raw(const IntVector& y, int levels, const OrdinalDesigns& designs,
                           std::vector<std::string> term_names);

// --- Score / information / prediction at arbitrary parameter points ---

ScoreInfo logistic_score_info(const IntVector& z, const Matrix& design, const Vector& beta);

ScoreInfo ordinal_score_info(const IntVector& y, int levels, const Matrix& design,
                             const Vector& theta);

/// Cumulative intercepts c_k implied by the monotone parameterization.
Vector ordinal_cumulative_intercepts(const Vector& theta, int levels);

/// n x K matrix of cell probabilities at the given design and parameters.
Matrix ordinal_cell_probs(const Matrix& design, int levels, const Vector& theta);

/// K matrices (n x q) of analytic cell-probability gradients d m_ik / d theta.
std::vector<Matrix> ordinal_cell_grads(const Matrix& design, int levels, const Vector& theta);

double ordinal_loglik(const IntVector& y, int levels, const Matrix& design, const Vector& theta);
double logistic_loglik(const IntVector& z, const Matrix& design, const Vector& beta);

}  // namespace door
