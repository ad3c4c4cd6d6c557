#include <door/report.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace door {

namespace {

using nlohmann::json;

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// machine CSV fields: enough digits to round-trip, NA for undefined
std::string csv_num(double v) {
  if (std::isnan(v)) return "NA";
  return fmt(v, "%.10g");
}

json spec_to_json(const ModelSpec& spec) {
  return json{{"propensity_covariates", spec.propensity_covariates},
              {"outcome_covariates", spec.outcome_covariates},
              {"hajek", spec.hajek},
              {"clip", spec.clip},
              {"bootstrap_replicates", spec.bootstrap_replicates}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.propensity_covariates = j.at("propensity_covariates").get<std::vector<std::string>>();
  spec.outcome_covariates = j.at("outcome_covariates").get<std::vector<std::string>>();
  spec.hajek = j.at("hajek").get<bool>();
  spec.clip = j.at("clip").get<double>();
  spec.bootstrap_replicates = j.at("bootstrap_replicates").get<int>();
  return spec;
}

json model_to_json(const FittedModelReport& m) {
  return json{{"terms", m.term_names},
              {"estimates", m.estimates},
              {"cumulative_intercepts", m.cumulative_intercepts},
              {"converged", m.converged},
              {"iterations", m.iterations}};
}

FittedModelReport model_from_json(const json& j) {
  FittedModelReport m;
  m.term_names = j.at("terms").get<std::vector<std::string>>();
  m.estimates = j.at("estimates").get<std::vector<double>>();
  m.cumulative_intercepts = j.at("cumulative_intercepts").get<std::vector<double>>();
  m.converged = j.at("converged").get<bool>();
  m.iterations = j.at("iterations").get<int>();
  return m;
}

json row_to_json(const MethodReportRow& row) {
  json j{{"method", method_name(row.method)}, {"estimate", row.estimate},
         {"se", row.se},                      {"ci_lower", row.ci95[0]},
         {"ci_upper", row.ci95[1]},           {"p_value", row.p_value},
         {"se_source", row.se_source}};
  if (row.bootstrap) {
    j["bootstrap"] = json{{"se", row.bootstrap->se},
                          {"ci_lower", row.bootstrap->ci95[0]},
                          {"ci_upper", row.bootstrap->ci95[1]},
                          {"replicates", row.bootstrap->replicates},
                          {"failures", row.bootstrap->failures}};
  }
  return j;
}

const char* kOrientationNote = "positive delta shifts mass toward more desirable levels";

}  // namespace

json to_json(const AnalysisReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) rows.push_back(row_to_json(row));
  json dich = json::array();
  for (const auto& d : report.dichotomies)
    dich.push_back(json{{"method", method_name(d.method)},
                        {"cut", d.cut},
                        {"estimate", d.estimate},
                        {"se", d.se},
                        {"ci_lower", d.ci95[0]},
                        {"ci_upper", d.ci95[1]},
                        {"p_value", d.p_value}});
  json j{{"schema_version", report.schema_version},
         {"n", report.n},
         {"levels", report.levels},
         {"arm_sizes", {report.arm_sizes[0], report.arm_sizes[1]}},
         {"model_spec", spec_to_json(report.spec)},
         {"methods", rows},
         {"dichotomies", dich},
         {"warnings", report.warnings}};
  if (report.propensity_model) j["propensity_model"] = model_to_json(*report.propensity_model);
  if (report.outcome_model) j["outcome_model"] = model_to_json(*report.outcome_model);
  return j;
}

AnalysisReport analysis_report_from_json(const json& j) {
  AnalysisReport report;
  report.schema_version = j.at("schema_version").get<int>();
  report.n = j.at("n").get<Index>();
  report.levels = j.at("levels").get<int>();
  report.arm_sizes[0] = j.at("arm_sizes").at(0).get<Index>();
  report.arm_sizes[1] = j.at("arm_sizes").at(1).get<Index>();
  report.spec = spec_from_json(j.at("model_spec"));
  for (const auto& r : j.at("methods")) {
    MethodReportRow row;
    row.method = parse_method(r.at("method").get<std::string>());
    row.estimate = r.at("estimate").get<double>();
    row.se = r.at("se").get<double>();
    row.ci95 = {r.at("ci_lower").get<double>(), r.at("ci_upper").get<double>()};
    row.p_value = r.at("p_value").get<double>();
    row.se_source = r.at("se_source").get<std::string>();
    if (r.contains("bootstrap")) {
      BootstrapResult b;
      b.se = r.at("bootstrap").at("se").get<double>();
      b.ci95 = {r.at("bootstrap").at("ci_lower").get<double>(),
                r.at("bootstrap").at("ci_upper").get<double>()};
      b.replicates = r.at("bootstrap").at("replicates").get<int>();
      b.failures = r.at("bootstrap").at("failures").get<int>();
      row.bootstrap = b;
    }
    report.rows.push_back(row);
  }
  for (const auto& d : j.at("dichotomies")) {
    DichotomyRow row;
    row.method = parse_method(d.at("method").get<std::string>());
    row.cut = d.at("cut").get<int>();
    row.estimate = d.at("estimate").get<double>();
    row.se = d.at("se").get<double>();
    row.ci95 = {d.at("ci_lower").get<double>(), d.at("ci_upper").get<double>()};
    row.p_value = d.at("p_value").get<double>();
    report.dichotomies.push_back(row);
  }
  report.warnings = j.at("warnings").get<std::vector<std::string>>();
  if (j.contains("propensity_model"))
    report.propensity_model = model_from_json(j.at("propensity_model"));
  if (j.contains("outcome_model")) report.outcome_model = model_from_json(j.at("outcome_model"));
  return report;
}

std::string render_table(const AnalysisReport& report) {
  std::ostringstream out;
  out << "DOOR probability analysis: n=" << report.n << ", K=" << report.levels
      << ", arm sizes control/treated = " << report.arm_sizes[0] << "/" << report.arm_sizes[1]
      << "\n\n";
  out << "method       estimate      se         95% CI         p-value   se source\n";
  for (const auto& row : report.rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-11s  %8.4f  %8.4f  (%7.4f, %7.4f)  %8.4f   %s\n",
                  method_name(row.method).c_str(), row.estimate, row.se, row.ci95[0],
                  row.ci95[1], row.p_value, row.se_source.c_str());
    out << line;
  }
  if (!report.dichotomies.empty()) {
    out << "\nsequential dichotomization (desirable = Y >= cut)\n";
    out << "method       cut  estimate      se         95% CI         p-value\n";
    for (const auto& d : report.dichotomies) {
      char line[160];
      std::snprintf(line, sizeof line, "%-11s  %3d  %8.4f  %8.4f  (%7.4f, %7.4f)  %8.4f\n",
                    method_name(d.method).c_str(), d.cut, d.estimate, d.se, d.ci95[0], d.ci95[1],
                    d.p_value);
      out << line;
    }
  }
  for (const auto& w : report.warnings) out << "\nwarning: " << w;
  if (!report.warnings.empty()) out << "\n";
  return out.str();
}

std::string render_csv(const AnalysisReport& report) {
  std::ostringstream out;
  out << "schema_version,kind,method,cut,estimate,se,ci_lower,ci_upper,p_value,se_source\n";
  for (const auto& row : report.rows)
    out << report.schema_version << ",main," << method_name(row.method) << ",," << csv_num(row.estimate)
        << ',' << csv_num(row.se) << ',' << csv_num(row.ci95[0]) << ',' << csv_num(row.ci95[1])
        << ',' << csv_num(row.p_value) << ',' << row.se_source << '\n';
  for (const auto& d : report.dichotomies)
    out << report.schema_version << ",dichotomy," << method_name(d.method) << ',' << d.cut << ','
        << csv_num(d.estimate) << ',' << csv_num(d.se) << ',' << csv_num(d.ci95[0]) << ','
        << csv_num(d.ci95[1]) << ',' << csv_num(d.p_value) << ",influence\n";
  return out.str();
}

namespace {

json config_to_json(const SimConfig& config) {
  return json{{"n", config.n},
              {"replicates", config.replicates},
              {"delta", config.delta},
              {"beta0", config.beta0},
              {"beta", std::vector<double>(config.beta.data(), config.beta.data() + config.beta.size())},
              {"alpha", std::vector<double>(config.alpha.data(), config.alpha.data() + config.alpha.size())},
              {"gamma", std::vector<double>(config.gamma.data(), config.gamma.data() + config.gamma.size())},
              {"rho", config.rho},
              {"scenario", scenario_name(config.scenario)},
              {"seed", config.seed},
              {"truth_draws", config.truth_draws},
              {"treatment_effect_orientation", kOrientationNote}};
}

}  // namespace

json to_json(const StudyReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back(json{{"method", method_name(r.method)},
                        {"bias", r.bias},
                        {"emp_se", r.emp_se},
                        {"avg_see", r.avg_see},
                        {"coverage", r.coverage},
                        {"rejection", r.rejection}});
  return json{{"schema_version", kReportSchemaVersion},
              {"config", config_to_json(report.config)},
              {"d_true", report.d_true},
              {"rows", rows},
              {"replicates_used", report.replicates_used},
              {"failures", report.failures}};
}

std::string render_table(const StudyReport& report) {
  std::ostringstream out;
  out << "replication study: scenario=" << scenario_name(report.config.scenario)
      << " n=" << report.config.n << " replicates=" << report.config.replicates
      << " delta=" << fmt(report.config.delta, "%.2f") << " seed=" << report.config.seed << "\n";
  out << "D_true = " << fmt(report.d_true) << "\n\n";
  out << "method        bias      SE     SEE  coverage  rejection\n";
  for (const auto& r : report.rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s  %7.4f  %6.4f  %6.4f  %8.3f  %9.3f\n",
                  method_name(r.method).c_str(), r.bias, r.emp_se, r.avg_see, r.coverage,
                  r.rejection);
    out << line;
  }
  if (report.replicates_used < 2)
    out << "note: empirical SE undefined with fewer than 2 replicates\n";
  if (report.failures > 0) out << "failures: " << report.failures << "\n";
  return out.str();
}

std::string render_csv(const StudyReport& report) {
  std::ostringstream out;
  out << "schema_version,scenario,delta,d_true,n,replicates,failures,seed,method,bias,emp_se,"
         "avg_see,coverage,rejection\n";
  for (const auto& r : report.rows)
    out << kReportSchemaVersion << ',' << scenario_name(report.config.scenario) << ','
        << csv_num(report.config.delta) << ',' << csv_num(report.d_true) << ','
        << report.config.n << ',' << report.config.replicates << ',' << report.failures << ','
        << report.config.seed << ',' << method_name(r.method) << ',' << csv_num(r.bias) << ','
        << csv_num(r.emp_se) << ',' << csv_num(r.avg_see) << ',' << csv_num(r.coverage) << ','
        << csv_num(r.rejection) << '\n';
  return out.str();
}

json to_json(const PowerReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells)
    cells.push_back(json{{"delta", c.delta},
                         {"d_true", c.d_true},
                         {"scenario", scenario_name(c.scenario)},
                         {"method", method_name(c.method)},
                         {"rejection", c.rejection}});
  return json{{"schema_version", kReportSchemaVersion},
              {"config", config_to_json(report.config)},
              {"deltas", report.deltas},
              {"cells", cells},
              {"failures", report.failures}};
}

std::string render_table(const PowerReport& report) {
  std::ostringstream out;
  out << "power study: scenario=" << scenario_name(report.config.scenario)
      << " n=" << report.config.n << " replicates=" << report.config.replicates
      << " seed=" << report.config.seed << "\n\n";
  out << "D_true   ";
  for (double delta : report.deltas) {
    for (const auto& c : report.cells)
      if (c.delta == delta && c.method == Method::crude) {
        out << fmt(c.d_true, " %6.3f");
        break;
      }
  }
  out << "\n";
  for (Method m : {Method::crude, Method::iptw, Method::gformula, Method::dr}) {
    char head[32];
    std::snprintf(head, sizeof head, "%-9s", method_name(m).c_str());
    out << head;
    for (double delta : report.deltas)
      for (const auto& c : report.cells)
        if (c.delta == delta && c.method == m) {
          out << fmt(c.rejection, " %6.3f");
          break;
        }
    out << "\n";
  }
  if (report.failures > 0) out << "failures: " << report.failures << "\n";
  return out.str();
}

std::string render_csv(const PowerReport& report) {
  std::ostringstream out;
  out << "schema_version,scenario,delta,d_true,n,replicates,seed,method,rejection\n";
  for (const auto& c : report.cells)
    out << kReportSchemaVersion << ',' << scenario_name(c.scenario) << ',' << csv_num(c.delta)
        << ',' << csv_num(c.d_true) << ',' << report.config.n << ','
        << report.config.replicates << ',' << report.config.seed << ','
        << method_name(c.method) << ',' << csv_num(c.rejection) << '\n';
  return out.str();
}

}  // namespace door
