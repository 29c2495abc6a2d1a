#pragma once

#include "report.hpp"

#include "crossfit/sim.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace crossfit::app {

// Process exit codes.
enum Exit : int {
  kOk = 0,
  kCheckFailed = 1,
  kDataError = 2,
  kNoConvergence = 3,
  kConfigError = 4,
  kStudyAborted = 5,
};

struct ColumnSpec {
  std::vector<std::string> row, col, inter, within;
  std::vector<std::string> decompose;  // split into four orthogonal parts
};

// Builds the balanced grid and the covariate blocks. Decomposed parts that vanish
// identically are dropped with a warning.
ModelData build_model_data(const RawTable& table, const ColumnSpec& spec,
                           std::vector<std::string>& warnings);

// Fit, plug-in covariance and intervals. Boundary fits and degenerate intervals
// produce warnings rather than errors. Throws NoConvergence.
FitReport fit_report(const ModelData& data, Method method, double level,
                     std::vector<std::string> warnings = {});

struct FitArgs {
  std::string data;
  std::string method = "reml";
  ColumnSpec columns;
  double level = 0.95;
  std::string out;  // JSON path; stdout when empty
  bool table = false;
};

struct SimulateArgs {
  std::string config;
  std::string preset;
  std::optional<int> g, h, m, reps, threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::string out_json;
  std::string out_csv;  // stdout when empty
};

struct ValidateArgs {
  std::uint64_t seed = 1;
  int instances = 20;
};

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err);

// Configurations named by a simulate invocation: one cell, or the eight table cells.
std::vector<SimConfig> simulate_configs(const SimulateArgs& args);

}  // namespace crossfit::app
