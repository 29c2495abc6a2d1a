#pragma once

#include "crossfit/inference.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace crossfit::app {

inline constexpr int kSchemaVersion = 1;

struct Convergence {
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
  double last_step = 0.0;
  double loglik = 0.0;
  double reml_criterion = 0.0;
};

struct FitReport {
  int schema_version = kSchemaVersion;
  std::string method;
  int g = 0, h = 0, m = 0;
  long long n = 0;
  double level = 0.95;
  std::vector<CiRow> parameters;
  Convergence convergence;
  MomentEstimates moments;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const FitReport& report);
FitReport fit_report_from_json(const nlohmann::json& j);

// Aligned plain-text table of the parameter rows.
std::string format_table(const FitReport& report);

// CSV with a header row. Required columns i, j, k, y; every other column is numeric.
// Throws DataError naming the offending line.
RawTable read_csv(std::istream& in);
RawTable read_csv_file(const std::string& path);

}  // namespace crossfit::app
