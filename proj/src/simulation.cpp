#include <door/simulation.hpp>

#include <door/inference.hpp>
#include <door/parallel.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace door {

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::both_correct: return "both-correct";
    case Scenario::ps_correct: return "ps-correct";
    case Scenario::po_correct: return "po-correct";
    case Scenario::both_incorrect: return "both-incorrect";
  }
  return "?";
}

Scenario parse_scenario(const std::string& name) {
  if (name == "both-correct") return Scenario::both_correct;
  if (name == "ps-correct") return Scenario::ps_correct;
  if (name == "po-correct") return Scenario::po_correct;
  if (name == "both-incorrect") return Scenario::both_incorrect;
  throw ValidationError("unknown scenario '" + name +
                        "' (expected both-correct, ps-correct, po-correct, both-incorrect)");
}

void SimConfig::validate() const {
  if (n < 50) throw ValidationError("sim config: n must be at least 50");
  if (replicates < 1) throw ValidationError("sim config: replicates must be at least 1");
  if (!(rho > -1.0 && rho < 1.0)) throw ValidationError("sim config: rho must lie in (-1, 1)");
  if (beta.size() != 4 || gamma.size() != 4)
    throw ValidationError("sim config: beta and gamma must have 4 entries (X1..X4)");
  if (alpha.size() < 1) throw ValidationError("sim config: alpha needs at least one entry");
  for (Index k = 1; k < alpha.size(); ++k)
    if (!(alpha[k] < alpha[k - 1]))
      throw ValidationError(
          "sim config: alpha must be strictly decreasing (they are P(Y>=k+1) intercepts)");
}

Matrix gen_covariates(Index n, double rho, RngStream& rng) {
  Matrix sigma = Matrix::Constant(4, 4, rho);
  sigma.diagonal().setOnes();
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw ValidationError("gen_covariates: equicorrelation with rho " + std::to_string(rho) +
                          " is not positive definite");
  const Matrix l = llt.matrixL();

  Matrix x(n, 4);
  Vector g(4);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) g[j] = rng.normal();
    x.row(i) = (l * g).transpose();
  }
  // X3, X4 dichotomized at zero
  for (Index i = 0; i < n; ++i) {
    x(i, 2) = x(i, 2) > 0.0 ? 1.0 : 0.0;
    x(i, 3) = x(i, 3) > 0.0 ? 1.0 : 0.0;
  }
  return x;
}

IntVector gen_treatment(const Matrix& x, double beta0, const Vector& beta, RngStream& rng) {
  IntVector z(x.rows());
  for (Index i = 0; i < x.rows(); ++i)
    z[i] = rng.bernoulli(expit(beta0 + x.row(i).dot(beta)));
  return z;
}

namespace {

// Cell probabilities of the DGP at one linear predictor value:
// P(Y >= k+1) = expit(alpha_k + eta), alpha strictly decreasing.
void dgp_cells(const Vector& alpha, double eta, Vector& cells) {
  const Index levels = alpha.size() + 1;
  double upper_prev = 1.0;  // P(Y >= 1)
  for (Index k = 0; k < levels - 1; ++k) {
    const double upper = expit(alpha[k] + eta);
    cells[k] = upper_prev - upper;
    upper_prev = upper;
  }
  cells[levels - 1] = upper_prev;
  if (cells.minCoeff() < 0.0)
    throw std::logic_error("gen_outcome: negative cell probability; alpha not decreasing?");
}

}  // namespace

IntVector gen_outcome(const Matrix& x, const IntVector& z, const Vector& alpha,
                      const Vector& gamma, double delta, RngStream& rng) {
  IntVector y(x.rows());
  Vector cells(alpha.size() + 1);
  for (Index i = 0; i < x.rows(); ++i) {
    dgp_cells(alpha, x.row(i).dot(gamma) + delta * z[i], cells);
    y[i] = 1 + static_cast<int>(rng.categorical(cells));
  }
  return y;
}

double mc_true_door(const SimConfig& config, long draws) {
  config.validate();
  if (draws < 100'000)
    throw ValidationError("mc_true_door: need at least 1e5 draws, got " + std::to_string(draws));

  const int K = config.levels();
  constexpr long kChunk = 1 << 16;
  const long chunks = (draws + kChunk - 1) / kChunk;
  std::vector<Vector> sum1(static_cast<size_t>(chunks)), sum0(static_cast<size_t>(chunks));

  // averaging exact per-draw cell probabilities (no outcome sampling); chunked
  // substreams keep the result bitwise identical for any thread count
  parallel_for(chunks, config.threads, [&](long c) {
    RngStream rng = RngStream::substream(config.seed, 0x100000000ULL + static_cast<std::uint64_t>(c));
    Vector s1 = Vector::Zero(K), s0 = Vector::Zero(K), cells(K), xrow(4);
    const long lo = c * kChunk;
    const long hi = std::min(draws, lo + kChunk);
    Matrix sigma = Matrix::Constant(4, 4, config.rho);
    sigma.diagonal().setOnes();
    const Matrix l = Eigen::LLT<Matrix>(sigma).matrixL();
    Vector g(4);
    for (long d = lo; d < hi; ++d) {
      for (int j = 0; j < 4; ++j) g[j] = rng.normal();
      xrow = l * g;
      xrow[2] = xrow[2] > 0.0 ? 1.0 : 0.0;
      xrow[3] = xrow[3] > 0.0 ? 1.0 : 0.0;
      const double eta = xrow.dot(config.gamma);
      dgp_cells(config.alpha, eta + config.delta, cells);
      s1 += cells;
      dgp_cells(config.alpha, eta, cells);
      s0 += cells;
    }
    sum1[static_cast<size_t>(c)] = s1;
    sum0[static_cast<size_t>(c)] = s0;
  });

  Vector p1 = Vector::Zero(K), p0 = Vector::Zero(K);
  for (long c = 0; c < chunks; ++c) {
    p1 += sum1[static_cast<size_t>(c)];
    p0 += sum0[static_cast<size_t>(c)];
  }
  p1 /= static_cast<double>(draws);
  p0 /= static_cast<double>(draws);
  return door_from_cells(p1, p0);
}

DoorDataset gen_dataset(const SimConfig& config, std::uint64_t replicate_index) {
  RngStream rng = RngStream::substream(config.seed, replicate_index);
  Matrix x = gen_covariates(config.n, config.rho, rng);
  IntVector z = gen_treatment(x, config.beta0, config.beta, rng);
  IntVector y = gen_outcome(x, z, config.alpha, config.gamma, config.delta, rng);
  return DoorDataset(std::move(y), std::move(z), std::move(x), {"X1", "X2", "X3", "X4"},
                     config.levels());
}

ModelSpec scenario_model_spec(Scenario s) {
  const std::vector<std::string> full{"X1", "X2", "X3", "X4"};
  const std::vector<std::string> misspecified{"X1", "X3"};
  ModelSpec spec;
  switch (s) {
    case Scenario::both_correct:
      spec.propensity_covariates = full;
      spec.outcome_covariates = full;
      break;
    case Scenario::ps_correct:
      spec.propensity_covariates = full;
      spec.outcome_covariates = misspecified;
      break;
    case Scenario::po_correct:
      spec.propensity_covariates = misspecified;
      spec.outcome_covariates = full;
      break;
    case Scenario::both_incorrect:
      spec.propensity_covariates = misspecified;
      spec.outcome_covariates = misspecified;
      break;
  }
  return spec;
}

namespace {

constexpr std::array<Method, 4> kStudyMethods{Method::crude, Method::iptw, Method::gformula,
                                              Method::dr};

struct ReplicateResult {
  bool ok = false;
  std::array<double, 4> d{};
  std::array<double, 4> se{};
  std::array<double, 4> p{};
};

ReplicateResult run_one_replicate(const SimConfig& config, const ModelSpec& spec, long rep) {
  ReplicateResult out;
  const DoorDataset ds = gen_dataset(config, static_cast<std::uint64_t>(rep));
  const PropensityFit ps = fit_logistic(ds, spec);
  const OutcomeFit of = fit_proportional_odds(ds, spec);

  auto record = [&](int slot, const CellProbEstimate& cells, const InfluenceMatrix& phi) {
    const DoorEstimate est = door_inference(ds, cells, phi);
    out.d[static_cast<size_t>(slot)] = est.d_hat;
    out.se[static_cast<size_t>(slot)] = est.se;
    out.p[static_cast<size_t>(slot)] = est.p_value;
  };
  {
    const CellProbEstimate cells = crude_cells(ds);
    record(0, cells, crude_influence(ds, cells));
  }
  {
    const CellProbEstimate cells = iptw_cells(ds, ps, false);
    record(1, cells, iptw_influence(ds, ps, cells));
  }
  {
    const CellProbEstimate cells = gformula_cells(ds, of);
    record(2, cells, gformula_influence(ds, of, cells));
  }
  {
    const CellProbEstimate cells = dr_cells(ds, ps, of);
    record(3, cells, dr_influence(ds, ps, of, cells));
  }
  out.ok = true;
  return out;
}

}  // namespace

StudyReport run_replication_study(const SimConfig& config) {
  config.validate();
  StudyReport report;
  report.config = config;
  report.d_true = mc_true_door(config, config.truth_draws);

  const ModelSpec spec = scenario_model_spec(config.scenario);
  std::vector<ReplicateResult> results(static_cast<size_t>(config.replicates));
  parallel_for(config.replicates, config.threads, [&](long rep) {
    try {
      results[static_cast<size_t>(rep)] = run_one_replicate(config, spec, rep);
    } catch (const FitError&) {
    } catch (const ValidationError&) {
    }
  });

  int used = 0;
  for (const auto& r : results) used += r.ok ? 1 : 0;
  report.failures = config.replicates - used;
  report.replicates_used = used;
  if (report.failures > 0.01 * config.replicates)
    throw FitError("run_replication_study: " + std::to_string(report.failures) + " of " +
                   std::to_string(config.replicates) + " replicates failed to fit");

  for (size_t m = 0; m < kStudyMethods.size(); ++m) {
    MethodStats stats;
    stats.method = kStudyMethods[m];
    double mean_d = 0.0, mean_se = 0.0, cover = 0.0, reject = 0.0;
    for (const auto& r : results) {
      if (!r.ok) continue;
      mean_d += r.d[m];
      mean_se += r.se[m];
      cover += std::abs(r.d[m] - report.d_true) <= 1.96 * r.se[m] ? 1.0 : 0.0;
      reject += r.p[m] < 0.05 ? 1.0 : 0.0;
    }
    const double nu = static_cast<double>(used);
    mean_d /= nu;
    stats.bias = mean_d - report.d_true;
    stats.avg_see = mean_se / nu;
    stats.coverage = cover / nu;
    stats.rejection = reject / nu;
    if (used >= 2) {
      double ss = 0.0;
      for (const auto& r : results)
        if (r.ok) ss += (r.d[m] - mean_d) * (r.d[m] - mean_d);
      stats.emp_se = std::sqrt(ss / (nu - 1.0));
    } else {
      stats.emp_se = std::numeric_limits<double>::quiet_NaN();
    }
    report.rows.push_back(stats);
  }
  return report;
}

PowerReport run_power_study(const SimConfig& base, const std::vector<double>& deltas) {
  if (deltas.empty()) throw ValidationError("run_power_study: empty delta grid");
  PowerReport report;
  report.config = base;
  report.deltas = deltas;
  for (double delta : deltas) {
    SimConfig config = base;
    config.delta = delta;
    const StudyReport study = run_replication_study(config);
    report.failures += study.failures;
    for (const auto& row : study.rows) {
      PowerCell cell;
      cell.delta = delta;
      cell.d_true = study.d_true;
      cell.scenario = config.scenario;
      cell.method = row.method;
      cell.rejection = row.rejection;
      report.cells.push_back(cell);
    }
  }
  return report;
}

}  // namespace door
