#include <door/regression.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace door {

namespace {

constexpr double kScoreTol = 1e-8;
constexpr double kStepTol = 1e-10;
constexpr int kMaxIterations = 100;
constexpr int kMaxHalvings = 40;

// Full-rank check; names the columns that a pivoted QR leaves dependent.
void require_full_rank(const Matrix& design, const std::vector<std::string>& names,
                       const std::string& model) {
  if (design.cols() == 0) return;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  const Index rank = qr.rank();
  if (rank >= design.cols()) return;
  const auto& perm = qr.colsPermutation().indices();
  std::ostringstream msg;
  msg << model << ": design matrix is rank deficient; collinear columns:";
  for (Index j = rank; j < design.cols(); ++j) {
    const Index col = perm[j];
    msg << ' ' << (col < static_cast<Index>(names.size()) ? names[static_cast<size_t>(col)]
                                                          : "col" + std::to_string(col));
  }
  throw FitError(msg.str());
}

Matrix influence_from_score(const Matrix& info, const Matrix& scores, const std::string& model) {
  Eigen::LDLT<Matrix> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw FitError(model + ": singular information matrix");
  const double n = static_cast<double>(scores.rows());
  Matrix u = ldlt.solve(scores.transpose()).transpose() * n;
  if (!u.allFinite()) throw FitError(model + ": non-finite influence values");
  return u;
}

}  // namespace

// --- logistic engine ---

double logistic_loglik(const IntVector& z, const Matrix& design, const Vector& beta) {
  const Vector eta = design * beta;
  double ll = 0.0;
  for (Index i = 0; i < z.size(); ++i)
    ll += (z[i] ? eta[i] : 0.0) - log1pexp(eta[i]);
  return ll;
}

ScoreInfo logistic_score_info(const IntVector& z, const Matrix& design, const Vector& beta) {
  const Index n = design.rows();
  const Vector eta = design * beta;
  ScoreInfo out;
  out.scores.resize(n, design.cols());
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    const double pi = expit(eta[i]);
    out.scores.row(i) = design.row(i) * (static_cast<double>(z[i]) - pi);
    w[i] = pi * (1.0 - pi);
    out.loglik += (z[i] ? eta[i] : 0.0) - log1pexp(eta[i]);
  }
  out.info = design.transpose() * w.asDiagonal() * design;
  return out;
}

PropensityFit fit_logistic_raw(const IntVector& z, const Matrix& design,
                               std::vector<std::string> term_names, double clip) {
  require_full_rank(design, term_names, "logistic");

  const Index q = design.cols();
  Vector beta = Vector::Zero(q);
  double loglik = logistic_loglik(z, design, beta);
  bool converged = false;
  int iter = 0;

  for (; iter < kMaxIterations; ++iter) {
    const ScoreInfo si = logistic_score_info(z, design, beta);
    const Vector total = si.scores.colwise().sum();
    if (total.lpNorm<Eigen::Infinity>() <= kScoreTol) {
      converged = true;
      break;
    }
    Eigen::LDLT<Matrix> ldlt(si.info);
    if (ldlt.info() != Eigen::Success)
      throw FitError("logistic: information matrix not positive definite");
    const Vector step = ldlt.solve(total);
    if (!step.allFinite()) throw FitError("logistic: non-finite Newton step");

    double t = 1.0;
    Vector candidate = beta + step;
    double cand_ll = logistic_loglik(z, design, candidate);
    int halvings = 0;
    while ((!std::isfinite(cand_ll) || cand_ll < loglik) && halvings < kMaxHalvings) {
      t *= 0.5;
      candidate = beta + t * step;
      cand_ll = logistic_loglik(z, design, candidate);
      ++halvings;
    }
    const double delta = (candidate - beta).lpNorm<Eigen::Infinity>();
    beta = candidate;
    loglik = cand_ll;
    if (delta <= kStepTol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw FitError(
        "logistic: no convergence after " + std::to_string(iter) +
        " iterations (perfect separation or near-degenerate design are the usual causes)");

  // under separation the score also vanishes, but along a diverging beta with
  // saturated fitted probabilities; there is no finite MLE in that case
  if ((design * beta).cwiseAbs().maxCoeff() > 30.0)
    throw FitError(
        "logistic: fitted probabilities numerically reach 0 or 1 (separated data, "
        "no finite maximum likelihood estimate)");

  PropensityFit fit;
  fit.beta = beta;
  fit.design = design;
  fit.term_names = std::move(term_names);
  fit.eta = design * beta;
  fit.pi.resize(fit.eta.size());
  fit.clip = clip;
  for (Index i = 0; i < fit.eta.size(); ++i) {
    double pi = expit(fit.eta[i]);
    if (clip > 0.0) {
      const double clipped = std::clamp(pi, clip, 1.0 - clip);
      if (clipped != pi) ++fit.clipped_count;
      pi = clipped;
    }
    fit.pi[i] = pi;
  }
  const ScoreInfo si = logistic_score_info(z, design, beta);
  fit.scores = si.scores;
  fit.info = si.info;
  fit.u_params = influence_from_score(fit.info, fit.scores, "logistic");
  fit.converged = true;
  fit.iterations = iter;
  return fit;
}

PropensityFit fit_logistic(const DoorDataset& ds, const ModelSpec& spec) {
  spec.validate(ds);
  const Matrix x = ds.covariate_subset(spec.propensity_covariates);
  Matrix design(ds.n(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  std::vector<std::string> names{"(Intercept)"};
  names.insert(names.end(), spec.propensity_covariates.begin(),
               spec.propensity_covariates.end());
  return fit_logistic_raw(ds.treatment(), design, std::move(names), spec.clip);
}

// --- proportional-odds engine, monotone intercept parameterization ---
//
// theta = (alpha_1..alpha_{K-1}, coefficients); cumulative intercepts
// c_1 = alpha_1, c_k = c_{k-1} + exp(alpha_k); P(Y <= k | x) = expit(c_k - eta).

Vector ordinal_cumulative_intercepts(const Vector& theta, int levels) {
  Vector c(levels - 1);
  c[0] = theta[0];
  for (int k = 1; k < levels - 1; ++k) c[k] = c[k - 1] + std::exp(theta[k]);
  return c;
}

namespace {

struct ThresholdEval {
  double cum = 0.0;   // F(c_k - eta); 0 at k=0, 1 at k=K
  double dens = 0.0;  // F(1-F), zero at the boundaries
};

ThresholdEval eval_threshold(const Vector& c, double eta, int k, int levels) {
  ThresholdEval t;
  if (k <= 0) {
    t.cum = 0.0;
  } else if (k >= levels) {
    t.cum = 1.0;
  } else {
    t.cum = expit(c[k - 1] - eta);
    t.dens = t.cum * (1.0 - t.cum);
  }
  return t;
}

// d a_k / d theta for an interior threshold k (1..K-1) into `out`.
void threshold_gradient(const Vector& theta, int levels, int k,
                        const Eigen::Ref<const Eigen::RowVectorXd>& xrow, Vector& out) {
  out.setZero();
  out[0] = 1.0;
  for (int j = 1; j < levels - 1; ++j)
    if (k >= j + 1) out[j] = std::exp(theta[j]);
  const Index q_alpha = levels - 1;
  for (Index m = 0; m < xrow.size(); ++m) out[q_alpha + m] = -xrow[m];
}

}  // namespace

double ordinal_loglik(const IntVector& y, int levels, const Matrix& design,
                      const Vector& theta) {
  const Vector c = ordinal_cumulative_intercepts(theta, levels);
  const Vector eta = design.cols() > 0
                         ? Vector(design * theta.tail(design.cols()))
                         : Vector(Vector::Zero(y.size()));
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const int yi = y[i];
    const double hi = eval_threshold(c, eta[i], yi, levels).cum;
    const double lo = eval_threshold(c, eta[i], yi - 1, levels).cum;
    ll += std::log(std::max(hi - lo, 1e-300));
  }
  return ll;
}

ScoreInfo ordinal_score_info(const IntVector& y, int levels, const Matrix& design,
                             const Vector& theta) {
  const Index n = y.size();
  const Index q = theta.size();
  const Vector c = ordinal_cumulative_intercepts(theta, levels);
  const Vector eta = design.cols() > 0 ? Vector(design * theta.tail(design.cols()))
                                       : Vector(Vector::Zero(n));

  ScoreInfo out;
  out.scores = Matrix::Zero(n, q);
  Matrix hessian = Matrix::Zero(q, q);
  Vector d_hi(q), d_lo(q), v(q);

  for (Index i = 0; i < n; ++i) {
    const int yi = y[i];
    const auto hi = eval_threshold(c, eta[i], yi, levels);
    const auto lo = eval_threshold(c, eta[i], yi - 1, levels);
    const double p = std::max(hi.cum - lo.cum, 1e-300);

    d_hi.setZero();
    d_lo.setZero();
    if (yi <= levels - 1) threshold_gradient(theta, levels, yi, design.row(i), d_hi);
    if (yi - 1 >= 1) threshold_gradient(theta, levels, yi - 1, design.row(i), d_lo);

    v = hi.dens * d_hi - lo.dens * d_lo;  // d p / d theta
    out.scores.row(i) = v.transpose() / p;
    out.loglik += std::log(p);

    // observed Hessian: quotient rule through p(theta)
    const double hi_dd = hi.dens * (1.0 - 2.0 * hi.cum);  // d dens / d a at upper threshold
    const double lo_dd = lo.dens * (1.0 - 2.0 * lo.cum);
    hessian.noalias() += (hi_dd / p) * (d_hi * d_hi.transpose());
    hessian.noalias() -= (lo_dd / p) * (d_lo * d_lo.transpose());
    hessian.noalias() -= (1.0 / (p * p)) * (v * v.transpose());
    // curvature of a_k in the intercept increments (second derivative of c_k)
    for (int j = 1; j < levels - 1; ++j) {
      const double e = std::exp(theta[j]);
      double diag = 0.0;
      if (yi <= levels - 1 && yi >= j + 1) diag += hi.dens * e;
      if (yi - 1 >= j + 1) diag -= lo.dens * e;
      hessian(j, j) += diag / p;
    }
  }
  out.info = -hessian;
  return out;
}

Matrix ordinal_cell_probs(const Matrix& design, int levels, const Vector& theta) {
  const Index n = design.rows();
  const Vector c = ordinal_cumulative_intercepts(theta, levels);
  const Vector eta = design.cols() > 0 ? Vector(design * theta.tail(design.cols()))
                                       : Vector(Vector::Zero(n));
  Matrix cells(n, levels);
  for (Index i = 0; i < n; ++i) {
    double prev = 0.0;
    for (int k = 1; k <= levels; ++k) {
      const double cum = eval_threshold(c, eta[i], k, levels).cum;
      cells(i, k - 1) = cum - prev;
      prev = cum;
    }
  }
  return cells;
}

std::vector<Matrix> ordinal_cell_grads(const Matrix& design, int levels, const Vector& theta) {
  const Index n = design.rows();
  const Index q = theta.size();
  const Vector c = ordinal_cumulative_intercepts(theta, levels);
  const Vector eta = design.cols() > 0 ? Vector(design * theta.tail(design.cols()))
                                       : Vector(Vector::Zero(n));
  std::vector<Matrix> grads(static_cast<size_t>(levels), Matrix::Zero(n, q));
  Vector d_hi(q), d_lo(q);
  for (Index i = 0; i < n; ++i) {
    for (int k = 1; k <= levels; ++k) {
      const auto hi = eval_threshold(c, eta[i], k, levels);
      const auto lo = eval_threshold(c, eta[i], k - 1, levels);
      d_hi.setZero();
      d_lo.setZero();
      if (k <= levels - 1) threshold_gradient(theta, levels, k, design.row(i), d_hi);
      if (k - 1 >= 1) threshold_gradient(theta, levels, k - 1, design.row(i), d_lo);
      grads[static_cast<size_t>(k - 1)].row(i) =
          (hi.dens * d_hi - lo.dens * d_lo).transpose();
    }
  }
  return grads;
}

namespace {

Vector ordinal_start(const IntVector& y, int levels, Index q_coef) {
  const double n = static_cast<double>(y.size());
  Vector counts = Vector::Zero(levels);
  for (Index i = 0; i < y.size(); ++i) counts[y[i] - 1] += 1.0;
  Vector theta = Vector::Zero(levels - 1 + q_coef);
  double cum = 0.0, prev_logit = 0.0;
  for (int k = 0; k < levels - 1; ++k) {
    cum += counts[k];
    const double lk = logit(cum / n);
    theta[k] = k == 0 ? lk : std::log(lk - prev_logit);
    prev_logit = lk;
  }
  return theta;
}

}  // namespace

OutcomeFit fit_ordinal_raw(const IntVector& y, int levels, const OrdinalDesigns& designs,
                           std::vector<std::string> term_names) {
  if (levels < 2) throw ValidationError("ordinal: need at least 2 levels");
  Vector counts = Vector::Zero(levels);
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] < 1 || y[i] > levels) throw ValidationError("ordinal: outcome outside 1..K");
    counts[y[i] - 1] += 1.0;
  }
  for (int k = 0; k < levels; ++k)
    if (counts[k] == 0.0)
      throw FitError("ordinal: level " + std::to_string(k + 1) +
                     " unobserved; collapse levels before fitting");
  {
    // intercepts absorb any constant, so check [1 | design] jointly
    Matrix with_ones(designs.observed.rows(), designs.observed.cols() + 1);
    with_ones.col(0).setOnes();
    with_ones.rightCols(designs.observed.cols()) = designs.observed;
    std::vector<std::string> aug{"(Intercepts)"};
    aug.insert(aug.end(), term_names.begin(), term_names.end());
    require_full_rank(with_ones, aug, "ordinal");
  }

  const Matrix& design = designs.observed;
  Vector theta = ordinal_start(y, levels, design.cols());
  double loglik = ordinal_loglik(y, levels, design, theta);
  bool converged = false;
  int iter = 0;

  for (; iter < kMaxIterations; ++iter) {
    const ScoreInfo si = ordinal_score_info(y, levels, design, theta);
    const Vector total = si.scores.colwise().sum();
    if (total.lpNorm<Eigen::Infinity>() <= kScoreTol) {
      converged = true;
      break;
    }

    Vector step;
    Eigen::LDLT<Matrix> ldlt(si.info);
    bool usable = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (usable) {
      step = ldlt.solve(total);
      usable = step.allFinite() && step.dot(total) > 0.0;
    }
    if (!usable) {
      // fall back to expected (Fisher) information, always PSD
      const auto grads = ordinal_cell_grads(design, levels, theta);
      const Matrix probs = ordinal_cell_probs(design, levels, theta);
      Matrix fisher = Matrix::Zero(theta.size(), theta.size());
      for (int k = 0; k < levels; ++k) {
        const Matrix& g = grads[static_cast<size_t>(k)];
        for (Index i = 0; i < y.size(); ++i)
          fisher.noalias() +=
              (g.row(i).transpose() * g.row(i)) / std::max(probs(i, k), 1e-12);
      }
      Eigen::LDLT<Matrix> fl(fisher);
      if (fl.info() != Eigen::Success)
        throw FitError("ordinal: information matrix not positive definite");
      step = fl.solve(total);
      if (!step.allFinite()) throw FitError("ordinal: non-finite Newton step");
    }

    double t = 1.0;
    Vector candidate = theta + step;
    double cand_ll = ordinal_loglik(y, levels, design, candidate);
    int halvings = 0;
    while ((!std::isfinite(cand_ll) || cand_ll < loglik) && halvings < kMaxHalvings) {
      t *= 0.5;
      candidate = theta + t * step;
      cand_ll = ordinal_loglik(y, levels, design, candidate);
      ++halvings;
    }
    if (halvings == kMaxHalvings && cand_ll < loglik)
      throw FitError("ordinal: line search failed to improve the log-likelihood");
    const double delta = (candidate - theta).lpNorm<Eigen::Infinity>();
    theta = candidate;
    loglik = cand_ll;
    if (delta <= kStepTol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw FitError("ordinal: no convergence after " + std::to_string(iter) + " iterations");

  OutcomeFit fit;
  fit.theta = theta;
  fit.levels = levels;
  fit.treatment_column = designs.treatment_column;
  fit.cumulative_intercepts = ordinal_cumulative_intercepts(theta, levels);
  fit.term_names = std::move(term_names);
  fit.cells[0] = ordinal_cell_probs(designs.at_control, levels, theta);
  fit.cells[1] = ordinal_cell_probs(designs.at_treated, levels, theta);
  fit.cell_grads[0] = ordinal_cell_grads(designs.at_control, levels, theta);
  fit.cell_grads[1] = ordinal_cell_grads(designs.at_treated, levels, theta);
  const ScoreInfo si = ordinal_score_info(y, levels, design, theta);
  fit.scores = si.scores;
  fit.info = si.info;
  fit.u_params = influence_from_score(fit.info, fit.scores, "ordinal");
  fit.converged = true;
  fit.iterations = iter;
  return fit;
}

OutcomeFit fit_proportional_odds(const DoorDataset& ds, const ModelSpec& spec) {
  spec.validate(ds);
  const Matrix x = ds.covariate_subset(spec.outcome_covariates);
  OrdinalDesigns designs;
  designs.observed.resize(ds.n(), x.cols() + 1);
  designs.observed.leftCols(x.cols()) = x;
  designs.observed.col(x.cols()) = ds.treatment().cast<double>();
  designs.at_control = designs.observed;
  designs.at_control.col(x.cols()).setZero();
  designs.at_treated = designs.observed;
  designs.at_treated.col(x.cols()).setOnes();
  designs.treatment_column = x.cols();

  std::vector<std::string> names(spec.outcome_covariates);
  names.emplace_back("treatment");
  return fit_ordinal_raw(ds.outcome(), ds.levels(), designs, std::move(names));
}

}  // namespace door
