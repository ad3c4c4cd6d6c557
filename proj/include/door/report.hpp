#pragma once

#include <door/inference.hpp>
#include <door/simulation.hpp>

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace door {

inline constexpr int kReportSchemaVersion = 1;

struct FittedModelReport {
  std::vector<std::string> term_names;
  std::vector<double> estimates;
  std::vector<double> cumulative_intercepts;  // ordinal models only
  bool converged = false;
  int iterations = 0;
};

struct MethodReportRow {
  Method method = Method::crude;
  double estimate = 0.5;
  double se = 0.0;
  std::array<double, 2> ci95{0.0, 0.0};
  double p_value = 1.0;
  std::string se_source = "influence";  // or "bootstrap"
  std::optional<BootstrapResult> bootstrap;
};

struct DichotomyRow {
  Method method = Method::crude;
  int cut = 2;  // desirable = Y >= cut
  double estimate = 0.5;
  double se = 0.0;
  std::array<double, 2> ci95{0.0, 0.0};
  double p_value = 1.0;
};

struct AnalysisReport {
  int schema_version = kReportSchemaVersion;
  Index n = 0;
  int levels = 0;
  std::array<Index, 2> arm_sizes{0, 0};
  ModelSpec spec;
  std::vector<MethodReportRow> rows;
  std::vector<DichotomyRow> dichotomies;
  std::optional<FittedModelReport> propensity_model;
  std::optional<FittedModelReport> outcome_model;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const AnalysisReport& report);
AnalysisReport analysis_report_from_json(const nlohmann::json& j);

std::string render_table(const AnalysisReport& report);
std::string render_csv(const AnalysisReport& report);

nlohmann::json to_json(const StudyReport& report);
std::string render_table(const StudyReport& report);
std::string render_csv(const StudyReport& report);

nlohmann::json to_json(const PowerReport& report);
std::string render_table(const PowerReport& report);
std::string render_csv(const PowerReport& report);

}  // namespace door
