#include <door/inference.hpp>
#include <door/report.hpp>
#include <door/simulation.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace door;

void write_output(const std::string& format, const std::string& table, const std::string& csv,
                  const nlohmann::json& j, const std::string& out_path) {
  if (format == "table")
    std::cout << table;
  else if (format == "csv")
    std::cout << csv;
  else
    std::cout << j.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw ValidationError("cannot open output file '" + out_path + "'");
    if (format == "csv")
      f << csv;
    else
      f << j.dump(2) << "\n";
  }
}

FittedModelReport summarize_fit(const PropensityFit& fit) {
  FittedModelReport m;
  m.term_names = fit.term_names;
  m.estimates.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  m.converged = fit.converged;
  m.iterations = fit.iterations;
  return m;
}

FittedModelReport summarize_fit(const OutcomeFit& fit) {
  FittedModelReport m;
  for (int k = 0; k < fit.levels - 1; ++k)
    m.term_names.push_back("alpha" + std::to_string(k + 1));
  m.term_names.insert(m.term_names.end(), fit.term_names.begin(), fit.term_names.end());
  m.estimates.assign(fit.theta.data(), fit.theta.data() + fit.theta.size());
  m.cumulative_intercepts.assign(
      fit.cumulative_intercepts.data(),
      fit.cumulative_intercepts.data() + fit.cumulative_intercepts.size());
  m.converged = fit.converged;
  m.iterations = fit.iterations;
  return m;
}

struct AnalyzeArgs {
  std::string data, outcome, treatment;
  int levels = 0;
  std::vector<std::string> ps_covars, po_covars, methods{"dr"};
  bool hajek = false;
  double clip = 0.0;
  int bootstrap = 0;
  std::uint64_t seed = 1;
  bool dichotomize_flag = false;
  bool complete_case = false;
  int threads = 0;
  std::string format = "table", out;
};

int cmd_analyze(const AnalyzeArgs& args) {
  CsvSchema schema;
  schema.outcome_column = args.outcome;
  schema.treatment_column = args.treatment;
  for (const auto& name : args.ps_covars) schema.covariate_columns.push_back(name);
  for (const auto& name : args.po_covars)
    if (std::find(schema.covariate_columns.begin(), schema.covariate_columns.end(), name) ==
        schema.covariate_columns.end())
      schema.covariate_columns.push_back(name);

  LoadOptions load_options;
  load_options.complete_case = args.complete_case;
  Index dropped = 0;
  const DoorDataset ds = load_csv(args.data, schema, args.levels, load_options, &dropped);

  ModelSpec spec;
  spec.propensity_covariates = args.ps_covars;
  spec.outcome_covariates = args.po_covars;
  spec.hajek = args.hajek;
  spec.clip = args.clip;
  spec.bootstrap_replicates = args.bootstrap;
  spec.validate(ds);

  std::vector<Method> methods;
  for (const auto& name : args.methods) {
    Method m = parse_method(name);
    if (m == Method::iptw && args.hajek) m = Method::iptw_hajek;
    methods.push_back(m);
  }
  for (Method m : methods)
    if (m == Method::iptw_hajek && args.bootstrap == 0)
      throw ValidationError(
          "hajek-normalized IPTW has bootstrap-only inference; pass --bootstrap B");

  AnalysisReport report;
  report.n = ds.n();
  report.levels = ds.levels();
  report.arm_sizes = {ds.arm_size(0), ds.arm_size(1)};
  report.spec = spec;
  if (dropped > 0)
    report.warnings.push_back("complete-case handling dropped " + std::to_string(dropped) +
                              " rows with missing values");

  const bool any_ps = std::any_of(methods.begin(), methods.end(), [](Method m) {
    return m == Method::iptw || m == Method::iptw_hajek || m == Method::dr;
  });
  const bool any_po = std::any_of(methods.begin(), methods.end(), [](Method m) {
    return m == Method::gformula || m == Method::dr;
  });
  std::optional<PropensityFit> ps;
  std::optional<OutcomeFit> po;
  if (any_ps) {
    ps = fit_logistic(ds, spec);
    report.propensity_model = summarize_fit(*ps);
    if (ps->clipped_count > 0)
      report.warnings.push_back("propensity clipped to [" + std::to_string(spec.clip) + ", " +
                                std::to_string(1.0 - spec.clip) + "] for " +
                                std::to_string(ps->clipped_count) + " subjects");
  }
  if (any_po) {
    po = fit_proportional_odds(ds, spec);
    report.outcome_model = summarize_fit(*po);
  }

  for (Method m : methods) {
    const MethodFit fit =
        run_method(ds, spec, m, ps ? &*ps : nullptr, po ? &*po : nullptr);
    MethodReportRow row;
    row.method = m;
    row.estimate = fit.estimate.d_hat;
    if (m == Method::iptw_hajek) {
      const BootstrapResult boot =
          bootstrap_se(ds, spec, m, args.bootstrap, args.seed, args.threads);
      row.se = boot.se;
      row.ci95 = boot.ci95;
      row.p_value = boot.se > 0.0
                        ? normal_two_sided_p((row.estimate - 0.5) / boot.se)
                        : 1.0;
      row.se_source = "bootstrap";
      row.bootstrap = boot;
      if (boot.failures > 0)
        report.warnings.push_back(method_name(m) + " bootstrap: " +
                                  std::to_string(boot.failures) + " resamples failed");
    } else {
      row.se = fit.estimate.se;
      row.ci95 = fit.estimate.ci95;
      row.p_value = fit.estimate.p_value;
      if (args.bootstrap > 0) {
        const BootstrapResult boot =
            bootstrap_se(ds, spec, m, args.bootstrap, args.seed, args.threads);
        row.bootstrap = boot;
        if (boot.failures > 0)
          report.warnings.push_back(method_name(m) + " bootstrap: " +
                                    std::to_string(boot.failures) + " resamples failed");
      }
    }
    report.rows.push_back(row);
  }

  if (args.dichotomize_flag) {
    for (Method m : methods) {
      for (int cut = 2; cut <= ds.levels(); ++cut) {
        DichotomyRow row;
        row.method = m;
        row.cut = cut;
        if (m == Method::iptw_hajek) {
          const DoorDataset collapsed = dichotomize(ds, cut);
          const MethodFit fit = run_method(collapsed, spec, m, ps ? &*ps : nullptr);
          const BootstrapResult boot =
              bootstrap_se(collapsed, spec, m, args.bootstrap, args.seed, args.threads);
          row.estimate = fit.estimate.d_hat;
          row.se = boot.se;
          row.ci95 = boot.ci95;
          row.p_value =
              boot.se > 0.0 ? normal_two_sided_p((row.estimate - 0.5) / boot.se) : 1.0;
        } else {
          const DoorEstimate est =
              sequential_dichotomized(ds, spec, m, cut, ps ? &*ps : nullptr);
          row.estimate = est.d_hat;
          row.se = est.se;
          row.ci95 = est.ci95;
          row.p_value = est.p_value;
        }
        report.dichotomies.push_back(row);
      }
    }
  }

  write_output(args.format, render_table(report), render_csv(report), to_json(report), args.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-adjusted DOOR probability estimation"};
  app.require_subcommand(1);

  AnalyzeArgs a;
  auto* analyze = app.add_subcommand("analyze", "Analyze a CSV dataset");
  analyze->add_option("--data", a.data, "CSV file with header row")->required();
  analyze->add_option("--outcome", a.outcome, "outcome column (integer 1..K)")->required();
  analyze->add_option("--treatment", a.treatment, "treatment column (0/1)")->required();
  analyze->add_option("--levels", a.levels, "number of ordinal levels K")->required();
  analyze->add_option("--ps-covars", a.ps_covars, "propensity model covariates")
      ->delimiter(',');
  analyze->add_option("--po-covars", a.po_covars, "outcome model covariates")->delimiter(',');
  analyze->add_option("--methods", a.methods, "crude,iptw,gformula,dr (default dr)")
      ->delimiter(',');
  analyze->add_flag("--hajek", a.hajek, "normalize IPTW weights (bootstrap inference only)");
  analyze->add_option("--clip", a.clip, "clip propensities to [eps, 1-eps]");
  analyze->add_option("--bootstrap", a.bootstrap, "bootstrap replicates");
  analyze->add_option("--seed", a.seed, "bootstrap seed");
  analyze->add_flag("--dichotomize", a.dichotomize_flag,
                    "add sequential dichotomization rows (cuts 2..K)");
  analyze->add_flag("--complete-case", a.complete_case, "drop rows with missing values");
  analyze->add_option("--threads", a.threads, "worker threads (0 = all cores)");
  analyze->add_option("--format", a.format, "table|json|csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));
  analyze->add_option("--out", a.out, "write machine-readable report to file");

  SimConfig sim;
  std::string sim_scenario = "both-correct";
  std::string sim_format = "table", sim_out;
  auto* simulate = app.add_subcommand("simulate", "Replication study (bias/SE/SEE/coverage)");
  simulate->add_option("--n", sim.n, "sample size per replicate");
  simulate->add_option("--reps", sim.replicates, "number of replicates");
  simulate->add_option("--delta", sim.delta, "treatment effect");
  simulate->add_option("--scenario", sim_scenario,
                       "both-correct|ps-correct|po-correct|both-incorrect");
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--threads", sim.threads, "worker threads (0 = all cores)");
  simulate->add_option("--draws", sim.truth_draws, "Monte Carlo draws for D_true");
  simulate->add_option("--format", sim_format, "table|json|csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));
  simulate->add_option("--out", sim_out, "write machine-readable report to file");

  SimConfig pow;
  std::string pow_scenario = "both-correct";
  std::string pow_format = "table", pow_out;
  std::vector<double> pow_deltas;
  auto* power = app.add_subcommand("power", "Rejection rates over a delta grid");
  power->add_option("--n", pow.n, "sample size per replicate");
  power->add_option("--reps", pow.replicates, "number of replicates");
  power->add_option("--deltas", pow_deltas, "delta grid (default 0,0.05,...,0.4)")
      ->delimiter(',');
  power->add_option("--scenario", pow_scenario,
                    "both-correct|ps-correct|po-correct|both-incorrect");
  power->add_option("--seed", pow.seed, "master seed");
  power->add_option("--threads", pow.threads, "worker threads (0 = all cores)");
  power->add_option("--draws", pow.truth_draws, "Monte Carlo draws for D_true");
  power->add_option("--format", pow_format, "table|json|csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));
  power->add_option("--out", pow_out, "write machine-readable report to file");

  SimConfig truth;
  long truth_draws = 1'000'000;
  std::string truth_format = "table", truth_out;
  auto* truth_cmd = app.add_subcommand("truth", "Monte Carlo true DOOR probability");
  truth_cmd->add_option("--delta", truth.delta, "treatment effect");
  truth_cmd->add_option("--draws", truth_draws, "Monte Carlo draws");
  truth_cmd->add_option("--seed", truth.seed, "master seed");
  truth_cmd->add_option("--threads", truth.threads, "worker threads (0 = all cores)");
  truth_cmd->add_option("--format", truth_format, "table|json")
      ->check(CLI::IsMember({"table", "json"}));
  truth_cmd->add_option("--out", truth_out, "write machine-readable report to file");

  try {
    app.parse(argc, argv);

    if (*analyze) return cmd_analyze(a);

    if (*simulate) {
      sim.scenario = parse_scenario(sim_scenario);
      const StudyReport report = run_replication_study(sim);
      write_output(sim_format, render_table(report), render_csv(report), to_json(report),
                   sim_out);
      return 0;
    }

    if (*power) {
      pow.scenario = parse_scenario(pow_scenario);
      if (pow_deltas.empty())
        for (int i = 0; i <= 8; ++i) pow_deltas.push_back(0.05 * i);
      const PowerReport report = run_power_study(pow, pow_deltas);
      write_output(pow_format, render_table(report), render_csv(report), to_json(report),
                   pow_out);
      return 0;
    }

    if (*truth_cmd) {
      const double d = mc_true_door(truth, truth_draws);
      nlohmann::json j{{"schema_version", kReportSchemaVersion},
                       {"delta", truth.delta},
                       {"draws", truth_draws},
                       {"seed", truth.seed},
                       {"d_true", d}};
      char line[96];
      std::snprintf(line, sizeof line, "D_true(delta=%.3f) = %.4f\n", truth.delta, d);
      write_output(truth_format, line, line, j, truth_out);
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
