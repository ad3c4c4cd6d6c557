#include <door/inference.hpp>

#include <door/parallel.hpp>
#include <door/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace door {

namespace {

void require_method(const CellProbEstimate& cells, Method expected, const char* routine) {
  if (cells.method != expected)
    throw ValidationError(std::string(routine) + ": cells were computed by '" +
                          method_name(cells.method) + "', expected '" + method_name(expected) +
                          "'");
}

}  // namespace

InfluenceMatrix crude_influence(const DoorDataset& ds, const CellProbEstimate& cells) {
  require_method(cells, Method::crude, "crude_influence");
  const Index n = ds.n();
  const int K = ds.levels();
  const double share1 = static_cast<double>(ds.arm_size(1)) / static_cast<double>(n);
  const double share0 = static_cast<double>(ds.arm_size(0)) / static_cast<double>(n);
  if (share1 == 0.0 || share0 == 0.0) throw ValidationError("crude_influence: empty arm");

  InfluenceMatrix out;
  out.method = Method::crude;
  out.phi = Matrix::Zero(n, 2 * (K - 1));
  for (Index i = 0; i < n; ++i) {
    const int z = ds.treatment()[i];
    const int y = ds.outcome()[i] - 1;
    for (int k = 0; k < K - 1; ++k) {
      const double ind = k == y ? 1.0 : 0.0;
      out.phi(i, k) = z * (ind - cells.p1[k]) / share1;
      out.phi(i, K - 1 + k) = (1 - z) * (ind - cells.p0[k]) / share0;
    }
  }
  return out;
}

InfluenceMatrix iptw_influence(const DoorDataset& ds, const PropensityFit& ps,
                               const CellProbEstimate& cells) {
  require_method(cells, Method::iptw, "iptw_influence");
  const Index n = ds.n();
  const int K = ds.levels();
  const Index q = ps.design.cols();

  // q_ak = n^-1 sum_i w'_i (arm indicator) I(Y_i = k); w' = -x exp(-eta) for
  // the treated branch and +x exp(eta) for the control branch. Clipped
  // subjects sit on the flat part of the clip map, so their w' is zero.
  Matrix q1 = Matrix::Zero(q, K - 1), q0 = Matrix::Zero(q, K - 1);
  for (Index i = 0; i < n; ++i) {
    const int y = ds.outcome()[i] - 1;
    if (y >= K - 1) continue;
    const double raw_pi = expit(ps.eta[i]);
    const bool clipped = ps.clip > 0.0 && (raw_pi < ps.clip || raw_pi > 1.0 - ps.clip);
    if (clipped) continue;
    if (ds.treatment()[i]) {
      q1.col(y) -= ps.design.row(i).transpose() * std::exp(-ps.eta[i]);
    } else {
      q0.col(y) += ps.design.row(i).transpose() * std::exp(ps.eta[i]);
    }
  }
  q1 /= static_cast<double>(n);
  q0 /= static_cast<double>(n);

  InfluenceMatrix out;
  out.method = Method::iptw;
  out.phi = Matrix::Zero(n, 2 * (K - 1));
  for (Index i = 0; i < n; ++i) {
    const int z = ds.treatment()[i];
    const int y = ds.outcome()[i] - 1;
    const double w1 = 1.0 / ps.pi[i];
    const double w0 = 1.0 / (1.0 - ps.pi[i]);
    for (int k = 0; k < K - 1; ++k) {
      const double ind = k == y ? 1.0 : 0.0;
      out.phi(i, k) = z * w1 * ind + q1.col(k).dot(ps.u_params.row(i)) - cells.p1[k];
      out.phi(i, K - 1 + k) =
          (1 - z) * w0 * ind + q0.col(k).dot(ps.u_params.row(i)) - cells.p0[k];
    }
  }
  return out;
}

InfluenceMatrix gformula_influence(const DoorDataset& ds, const OutcomeFit& of,
                                   const CellProbEstimate& cells) {
  require_method(cells, Method::gformula, "gformula_influence");
  const Index n = ds.n();
  const int K = ds.levels();

  InfluenceMatrix out;
  out.method = Method::gformula;
  out.phi = Matrix::Zero(n, 2 * (K - 1));
  for (int k = 0; k < K - 1; ++k) {
    const Vector l1 = of.cell_grads[1][static_cast<size_t>(k)].colwise().mean();
    const Vector l0 = of.cell_grads[0][static_cast<size_t>(k)].colwise().mean();
    out.phi.col(k) = of.cells[1].col(k).array() - cells.p1[k] +
                     (of.u_params * l1).array();
    out.phi.col(K - 1 + k) = of.cells[0].col(k).array() - cells.p0[k] +
                             (of.u_params * l0).array();
  }
  return out;
}

InfluenceMatrix dr_influence(const DoorDataset& ds, const PropensityFit& ps,
                             const OutcomeFit& of, const CellProbEstimate& cells) {
  require_method(cells, Method::dr, "dr_influence");
  const Index n = ds.n();
  const int K = ds.levels();
  const Index qp = ps.design.cols();
  const Index qo = of.theta.size();

  // propensity contribution: n^-1 sum w'_i (arm) [I(Y=k) - m_iak]
  // outcome contribution:    n^-1 sum m'_iak [w_i (arm) - 1]
  Matrix a1 = Matrix::Zero(qp, K - 1), a0 = Matrix::Zero(qp, K - 1);
  Matrix b1 = Matrix::Zero(qo, K - 1), b0 = Matrix::Zero(qo, K - 1);
  for (Index i = 0; i < n; ++i) {
    const int z = ds.treatment()[i];
    const int y = ds.outcome()[i] - 1;
    const double raw_pi = expit(ps.eta[i]);
    const bool clipped = ps.clip > 0.0 && (raw_pi < ps.clip || raw_pi > 1.0 - ps.clip);
    const double w1 = 1.0 / ps.pi[i];
    const double w0 = 1.0 / (1.0 - ps.pi[i]);
    for (int k = 0; k < K - 1; ++k) {
      const double ind = k == y ? 1.0 : 0.0;
      if (!clipped && z)
        a1.col(k) -=
            ps.design.row(i).transpose() * std::exp(-ps.eta[i]) * (ind - of.cells[1](i, k));
      if (!clipped && !z)
        a0.col(k) +=
            ps.design.row(i).transpose() * std::exp(ps.eta[i]) * (ind - of.cells[0](i, k));
      b1.col(k) += of.cell_grads[1][static_cast<size_t>(k)].row(i).transpose() * (z * w1 - 1.0);
      b0.col(k) +=
          of.cell_grads[0][static_cast<size_t>(k)].row(i).transpose() * ((1 - z) * w0 - 1.0);
    }
  }
  a1 /= static_cast<double>(n);
  a0 /= static_cast<double>(n);
  b1 /= static_cast<double>(n);
  b0 /= static_cast<double>(n);

  InfluenceMatrix out;
  out.method = Method::dr;
  out.phi = Matrix::Zero(n, 2 * (K - 1));
  for (Index i = 0; i < n; ++i) {
    const int z = ds.treatment()[i];
    const int y = ds.outcome()[i] - 1;
    const double w1 = 1.0 / ps.pi[i];
    const double w0 = 1.0 / (1.0 - ps.pi[i]);
    for (int k = 0; k < K - 1; ++k) {
      const double ind = k == y ? 1.0 : 0.0;
      const double term1_1 =
          z * w1 * ind - (z * w1 - 1.0) * of.cells[1](i, k) - cells.p1[k];
      const double term1_0 =
          (1 - z) * w0 * ind - ((1 - z) * w0 - 1.0) * of.cells[0](i, k) - cells.p0[k];
      out.phi(i, k) = term1_1 + a1.col(k).dot(ps.u_params.row(i)) -
                      b1.col(k).dot(of.u_params.row(i));
      out.phi(i, K - 1 + k) = term1_0 + a0.col(k).dot(ps.u_params.row(i)) -
                              b0.col(k).dot(of.u_params.row(i));
    }
  }
  return out;
}

Matrix influence_covariance(const InfluenceMatrix& phi) {
  const double n = static_cast<double>(phi.phi.rows());
  return phi.phi.transpose() * phi.phi / n;
}

Vector door_jacobian(const Vector& p1, const Vector& p0) {
  if (p1.size() != p0.size())
    throw ValidationError("door_jacobian: cell vectors have different lengths");
  const Index K = p1.size();
  // substitute each arm's K-th cell by one minus the free cells, then
  // differentiate D = p1' A p0 with respect to the free cells
  Vector s1 = p1, s0 = p0;
  s1[K - 1] = 1.0 - p1.head(K - 1).sum();
  s0[K - 1] = 1.0 - p0.head(K - 1).sum();

  Vector row(K), col(K);  // row_k = (A s0)_k, col_l = (A' s1)_l
  double below = 0.0;
  for (Index k = 0; k < K; ++k) {
    row[k] = below + 0.5 * s0[k];
    below += s0[k];
  }
  double above = 0.0;
  for (Index l = K - 1; l >= 0; --l) {
    col[l] = above + 0.5 * s1[l];
    above += s1[l];
  }

  Vector j(2 * (K - 1));
  for (Index k = 0; k < K - 1; ++k) {
    j[k] = row[k] - row[K - 1];
    j[K - 1 + k] = col[k] - col[K - 1];
  }
  return j;
}

DoorEstimate door_inference(const DoorDataset& ds, const CellProbEstimate& cells,
                            const InfluenceMatrix& phi) {
  if (cells.method != phi.method)
    throw ValidationError("door_inference: cells and influence matrix disagree on method");
  if (cells.method == Method::iptw_hajek)
    throw ValidationError(
        "door_inference: no analytic influence function for hajek-normalized IPTW; "
        "use bootstrap_se");

  DoorEstimate est;
  est.method = cells.method;
  est.d_hat = door_from_cells(cells.p1, cells.p0);
  est.sigma = influence_covariance(phi);
  est.jacobian = door_jacobian(cells.p1, cells.p0);
  const double n = static_cast<double>(ds.n());
  const double var = est.jacobian.dot(est.sigma * est.jacobian) / n;
  est.se = std::sqrt(std::max(var, 0.0));
  est.ci95 = {est.d_hat - 1.96 * est.se, est.d_hat + 1.96 * est.se};
  if (est.se == 0.0) {
    if (est.d_hat != 0.5)
      throw FitError("door_inference: degenerate variance with D != 0.5");
    est.p_value = 1.0;
  } else {
    est.p_value = normal_two_sided_p((est.d_hat - 0.5) / est.se);
  }
  return est;
}

MethodFit run_method(const DoorDataset& ds, const ModelSpec& spec, Method method,
                     const PropensityFit* reuse_propensity, const OutcomeFit* reuse_outcome) {
  MethodFit out;
  const bool needs_ps =
      method == Method::iptw || method == Method::iptw_hajek || method == Method::dr;
  const bool needs_po = method == Method::gformula || method == Method::dr;

  if (needs_ps) {
    if (reuse_propensity && reuse_propensity->pi.size() == ds.n())
      out.propensity = *reuse_propensity;
    else
      out.propensity = fit_logistic(ds, spec);
  }
  if (needs_po) {
    if (reuse_outcome && reuse_outcome->cells[0].rows() == ds.n() &&
        reuse_outcome->levels == ds.levels())
      out.outcome = *reuse_outcome;
    else
      out.outcome = fit_proportional_odds(ds, spec);
  }

  switch (method) {
    case Method::crude:
      out.cells = crude_cells(ds);
      out.influence = crude_influence(ds, out.cells);
      break;
    case Method::iptw:
      out.cells = iptw_cells(ds, *out.propensity, false);
      out.influence = iptw_influence(ds, *out.propensity, out.cells);
      break;
    case Method::iptw_hajek:
      out.cells = iptw_cells(ds, *out.propensity, true);
      // d_hat is well defined; variance must come from the bootstrap
      out.influence.method = Method::iptw_hajek;
      out.estimate.method = Method::iptw_hajek;
      out.estimate.d_hat = door_from_cells(out.cells.p1, out.cells.p0);
      return out;
    case Method::gformula:
      out.cells = gformula_cells(ds, *out.outcome);
      out.influence = gformula_influence(ds, *out.outcome, out.cells);
      break;
    case Method::dr:
      out.cells = dr_cells(ds, *out.propensity, *out.outcome);
      out.influence = dr_influence(ds, *out.propensity, *out.outcome, out.cells);
      break;
  }
  out.estimate = door_inference(ds, out.cells, out.influence);
  return out;
}

BootstrapResult bootstrap_se(const DoorDataset& ds, const ModelSpec& spec, Method method,
                             int replicates, std::uint64_t seed, int threads) {
  if (replicates < 100)
    throw ValidationError("bootstrap_se: need at least 100 replicates, got " +
                          std::to_string(replicates));
  const Index n = ds.n();
  std::vector<double> draws(static_cast<size_t>(replicates),
                            std::numeric_limits<double>::quiet_NaN());

  parallel_for(replicates, threads, [&](long b) {
    RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(b));
    std::vector<Index> rows(static_cast<size_t>(n));
    for (auto& r : rows) r = static_cast<Index>(rng.uniform() * static_cast<double>(n));
    try {
      const DoorDataset boot = resample(ds, rows);
      CellProbEstimate cells;
      switch (method) {
        case Method::crude:
          cells = crude_cells(boot);
          break;
        case Method::iptw:
        case Method::iptw_hajek:
          cells = iptw_cells(boot, fit_logistic(boot, spec), method == Method::iptw_hajek);
          break;
        case Method::gformula:
          cells = gformula_cells(boot, fit_proportional_odds(boot, spec));
          break;
        case Method::dr:
          cells =
              dr_cells(boot, fit_logistic(boot, spec), fit_proportional_odds(boot, spec));
          break;
      }
      draws[static_cast<size_t>(b)] = door_from_cells(cells.p1, cells.p0);
    } catch (const ValidationError&) {
      // degenerate resample; counted below
    } catch (const FitError&) {
    }
  });

  std::vector<double> ok;
  ok.reserve(draws.size());
  for (double d : draws)
    if (std::isfinite(d)) ok.push_back(d);
  BootstrapResult out;
  out.replicates = replicates;
  out.failures = replicates - static_cast<int>(ok.size());
  if (out.failures > replicates / 20)
    throw FitError("bootstrap_se: " + std::to_string(out.failures) + " of " +
                   std::to_string(replicates) + " resamples failed to fit");

  const double m = static_cast<double>(ok.size());
  double mean = 0.0;
  for (double d : ok) mean += d;
  mean /= m;
  double ss = 0.0;
  for (double d : ok) ss += (d - mean) * (d - mean);
  out.se = std::sqrt(ss / (m - 1.0));

  std::sort(ok.begin(), ok.end());
  auto quantile = [&](double q) {
    const double h = q * (m - 1.0);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, ok.size() - 1);
    const double g = h - std::floor(h);
    return (1.0 - g) * ok[lo] + g * ok[hi];
  };
  out.ci95 = {quantile(0.025), quantile(0.975)};
  return out;
}

DoorEstimate sequential_dichotomized(const DoorDataset& ds, const ModelSpec& spec,
                                     Method method, int cut,
                                     const PropensityFit* reuse_propensity) {
  const DoorDataset collapsed = dichotomize(ds, cut);
  // covariates and treatment are untouched by the collapse, so the original
  // propensity fit remains valid
  return run_method(collapsed, spec, method, reuse_propensity).estimate;
}

}  // namespace door
