#include <door/report.hpp>
#include <door/simulation.hpp>

#include <doctest.h>

#include "oracles.hpp"

using namespace door;

TEST_SUITE("simulation") {

TEST_CASE("covariates have the configured moments") {
  SimConfig config;
  RngStream rng(1);
  const Index n = 100000;
  const Matrix x = gen_covariates(n, 0.5, rng);
  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(x.col(0).mean()) <= bound);
  CHECK(std::abs(x.col(1).mean()) <= bound);
  CHECK(std::abs(x.col(2).mean() - 0.5) <= 2.0 * bound);
  CHECK(std::abs(x.col(3).mean() - 0.5) <= 2.0 * bound);

  auto corr = [&](Index a, Index b) {
    const Vector ca = x.col(a).array() - x.col(a).mean();
    const Vector cb = x.col(b).array() - x.col(b).mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  };
  CHECK(std::abs(corr(0, 1) - 0.5) <= 0.05);

  RngStream rng2(1);
  const Matrix x0 = gen_covariates(50000, 0.0, rng2);
  const Vector c0 = x0.col(0).array() - x0.col(0).mean();
  const Vector c1 = x0.col(1).array() - x0.col(1).mean();
  CHECK(std::abs(c0.dot(c1) / std::sqrt(c0.squaredNorm() * c1.squaredNorm())) <= 0.05);
}

TEST_CASE("treatment prevalence tracks the propensity truth") {
  SimConfig config;
  RngStream rng(2);
  const Index n = 200000;
  const Matrix x = gen_covariates(n, config.rho, rng);

  const IntVector z0 = gen_treatment(x, -0.4, Vector::Zero(4), rng);
  CHECK(std::abs(z0.cast<double>().mean() - expit(-0.4)) <= 0.005);

  const IntVector z = gen_treatment(x, config.beta0, config.beta, rng);
  CHECK(std::abs(z.cast<double>().mean() - 0.40) <= 0.01);

  const IntVector znone = gen_treatment(x, -20.0, Vector::Zero(4), rng);
  CHECK(znone.cast<double>().mean() <= 1e-4);
}

TEST_CASE("outcome generator matches its own cell probabilities when gamma = 0") {
  SimConfig config;
  config.gamma = Vector::Zero(4);
  RngStream rng(3);
  const Index n = 200000;
  const Matrix x = gen_covariates(n, config.rho, rng);
  const IntVector z = IntVector::Zero(n);
  const IntVector y = gen_outcome(x, z, config.alpha, config.gamma, 0.0, rng);

  // P(Y>=2)=expit(1), P(Y>=3)=expit(0.5), P(Y>=4)=expit(-0.5)
  Vector expected(4);
  expected << 1.0 - expit(1.0), expit(1.0) - expit(0.5), expit(0.5) - expit(-0.5), expit(-0.5);
  Vector freq = Vector::Zero(4);
  for (Index i = 0; i < n; ++i) freq[y[i] - 1] += 1.0;
  freq /= static_cast<double>(n);
  for (int k = 0; k < 4; ++k) {
    const double se = std::sqrt(expected[k] * (1.0 - expected[k]) / static_cast<double>(n));
    CHECK(std::abs(freq[k] - expected[k]) <= 4.0 * se);
  }
}

TEST_CASE("alpha must be strictly decreasing") {
  SimConfig config;
  config.alpha = (Vector(3) << 1.0, 1.2, -0.5).finished();
  CHECK_THROWS_AS(config.validate(), ValidationError);
}

TEST_CASE("Monte Carlo truth at the null is exactly one half") {
  SimConfig config;
  config.delta = 0.0;
  config.threads = 2;
  CHECK(std::abs(mc_true_door(config, 100000) - 0.5) <= 1e-12);
  CHECK_THROWS_AS(mc_true_door(config, 1000), ValidationError);
}

TEST_CASE("Monte Carlo truth reproduces the reference values at modest draw counts") {
  SimConfig config;
  config.delta = 0.2;
  CHECK(mc_true_door(config, 200000) == doctest::Approx(0.527).epsilon(0.012));
  config.delta = 0.4;
  CHECK(mc_true_door(config, 200000) == doctest::Approx(0.552).epsilon(0.012));
}

TEST_CASE("scenario specs select the misspecified covariate subset") {
  const ModelSpec full = scenario_model_spec(Scenario::both_correct);
  CHECK(full.propensity_covariates == std::vector<std::string>{"X1", "X2", "X3", "X4"});
  const ModelSpec ps_only = scenario_model_spec(Scenario::ps_correct);
  CHECK(ps_only.outcome_covariates == std::vector<std::string>{"X1", "X3"});
  CHECK(ps_only.propensity_covariates.size() == 4);
  const ModelSpec none = scenario_model_spec(Scenario::both_incorrect);
  CHECK(none.propensity_covariates == std::vector<std::string>{"X1", "X3"});
}

TEST_CASE("studies are bitwise reproducible for any thread count") {
  SimConfig config;
  config.n = 300;
  config.replicates = 40;
  config.truth_draws = 100000;
  config.seed = 123;
  config.threads = 1;
  const StudyReport a = run_replication_study(config);
  config.threads = 4;
  const StudyReport b = run_replication_study(config);
  CHECK(render_csv(a) == render_csv(b));
  CHECK(to_json(a).dump() == to_json(b).dump());
  config.threads = 1;
  const StudyReport c = run_replication_study(config);
  CHECK(render_csv(a) == render_csv(c));
}

TEST_CASE("single-replicate study flags the undefined empirical SE") {
  SimConfig config;
  config.n = 200;
  config.replicates = 1;
  config.truth_draws = 100000;
  const StudyReport report = run_replication_study(config);
  CHECK(report.rows.size() == 4);
  CHECK(std::isnan(report.rows[0].emp_se));
  const std::string table = render_table(report);
  CHECK(table.find("undefined") != std::string::npos);
}

TEST_CASE("empirical SE shrinks like one over root n") {
  SimConfig base;
  base.replicates = 400;
  base.truth_draws = 100000;
  base.seed = 9;
  base.n = 250;
  const StudyReport small = run_replication_study(base);
  base.n = 500;
  const StudyReport large = run_replication_study(base);
  for (size_t m = 0; m < 4; ++m) {
    const double ratio = small.rows[m].emp_se / large.rows[m].emp_se;
    CHECK(ratio > 1.2);
    CHECK(ratio < 1.65);
  }
}

TEST_CASE("power study covers the delta grid and rises with the effect") {
  SimConfig config;
  config.n = 300;
  config.replicates = 150;
  config.truth_draws = 100000;
  config.seed = 11;
  const PowerReport report = run_power_study(config, {0.0, 0.4});
  CHECK(report.cells.size() == 8);  // 2 deltas x 4 methods
  double reject_null = -1.0, reject_effect = -1.0;
  for (const auto& cell : report.cells) {
    if (cell.method != Method::dr) continue;
    (cell.delta == 0.0 ? reject_null : reject_effect) = cell.rejection;
  }
  CHECK(reject_null >= 0.0);
  CHECK(reject_null <= 0.12);
  CHECK(reject_effect > reject_null);
}

}  // TEST_SUITE
