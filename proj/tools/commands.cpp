#include "commands.hpp"

#include "crossfit/errors.hpp"
#include "crossfit/oracle.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

namespace crossfit::app {

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("write failed for '" + path + "'");
}

double max_abs(const Grid& x) { return x.values.size() ? x.values.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

ModelData build_model_data(const RawTable& table, const ColumnSpec& spec,
                           std::vector<std::string>& warnings) {
  const Design design = validate_design(table);
  const auto order = grid_order(table, design);
  ModelData data;
  data.design = design;
  data.y = to_grid(table.y, order, design);

  std::set<std::string> used;
  std::vector<DeclaredCovariate> decl;
  auto declare = [&](const std::vector<std::string>& names, Level level) {
    for (const auto& name : names) {
      if (!used.insert(name).second) throw DataError("column '" + name + "' declared twice");
      decl.push_back({name, level, to_grid(table.column(name), order, design)});
    }
  };
  declare(spec.row, Level::row);
  declare(spec.col, Level::col);
  declare(spec.inter, Level::inter);
  declare(spec.within, Level::within);
  for (const auto& name : spec.decompose) {
    if (!used.insert(name).second) throw DataError("column '" + name + "' declared twice");
    const Grid x = to_grid(table.column(name), order, design);
    const double tol = constancy_tolerance(x);
    for (auto& part : decomposed_declarations(name, x)) {
      if (max_abs(part.values) <= tol) {
        warnings.push_back("dropped " + part.name + ": the " + to_string(part.level) +
                           " part of '" + name + "' is identically zero");
        continue;
      }
      decl.push_back(std::move(part));
    }
  }
  data.covariates = classify_covariates(design, decl);
  return data;
}

FitReport fit_report(const ModelData& data, Method method, double level,
                     std::vector<std::string> warnings) {
  const SuffStats st = compress(data);
  FitOptions opt;
  opt.method = method;
  const FitResult res = fit(st, opt);
  const MomentEstimates mo = residual_moments(residuals(data, res.params.xi));
  static const char* theta_names[4] = {"sigma_alpha2", "sigma_beta2", "sigma_gamma2", "sigma_e2"};
  for (int t = 0; t < 4; ++t) {
    if (res.boundary[t]) {
      warnings.push_back(std::string(theta_names[t]) +
                         " is at the variance floor; its interval is undefined");
    }
  }
  const CovarianceEstimate cov = fhat(res, mo, st, res.at_boundary());
  const CiTable ci = confidence_intervals(res, cov, omega_names(data.covariates), 1.0 - level);

  FitReport r;
  r.method = to_string(method);
  r.g = data.design.g;
  r.h = data.design.h;
  r.m = data.design.m;
  r.n = data.design.n;
  r.level = ci.level;
  r.parameters = ci.rows;
  for (const auto& row : r.parameters) {
    if (!row.defined && row.variance) {
      const int t = row.name == "sigma_alpha2" ? 0 : row.name == "sigma_beta2" ? 1
                  : row.name == "sigma_gamma2" ? 2 : 3;
      if (!res.boundary[t]) {
        warnings.push_back("interval for " + row.name +
                           " is undefined: the fourth-moment estimate does not exceed sigma^4");
      }
    }
  }
  r.convergence = {res.converged, res.iterations, res.score_norm, res.last_step, res.loglik,
                   res.reml_criterion};
  r.moments = mo;
  r.warnings = std::move(warnings);
  return r;
}

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  Method method;
  try {
    method = parse_method(a.method);
    if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    std::vector<std::string> warnings;
    const RawTable table = read_csv_file(a.data);
    const ModelData data = build_model_data(table, a.columns, warnings);
    const FitReport r = fit_report(data, method, a.level, warnings);
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    const std::string json = to_json(r).dump(2) + "\n";
    if (!a.out.empty()) write_file(a.out, json);
    if (a.table) out << format_table(r);
    else if (a.out.empty()) out << json;
    return kOk;
  } catch (const NoConvergence& e) {
    err << "error: " << e.what() << " (best score norm " << e.best.score_norm << " after "
        << e.best.iterations << " iterations)\n";
    return kNoConvergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

std::vector<SimConfig> simulate_configs(const SimulateArgs& a) {
  if (a.config.empty() == a.preset.empty()) {
    throw ConfigError("give exactly one of --config and --preset");
  }
  std::vector<SimConfig> configs;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw ConfigError("cannot open '" + a.config + "'");
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed JSON in '" + a.config + "': " + e.what());
    }
    configs.push_back(sim_config_from_json(j));
  } else if (a.preset == "table1" || a.preset == "table2") {
    if (a.g || a.h || a.m) throw ConfigError("--g/--h/--m apply to the single-cell presets only");
    for (const Design& d : table_grid()) configs.push_back(preset_cell(a.preset, d.g, d.h, d.m));
  } else {
    configs.push_back(preset_cell(a.preset, a.g.value_or(10), a.h.value_or(10), a.m.value_or(10)));
  }
  for (auto& c : configs) {
    if (a.reps) c.replicates = *a.reps;
    if (a.seed) c.seed = *a.seed;
    if (a.threads) c.threads = *a.threads;
    if (a.method) c.method = parse_method(*a.method);
    if (!a.config.empty()) {
      if (a.g) c.g = *a.g;
      if (a.h) c.h = *a.h;
      if (a.m) c.m = *a.m;
    }
    c.validate();
  }
  return configs;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<SimConfig> configs;
  try {
    configs = simulate_configs(a);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  nlohmann::json reports = nlohmann::json::array();
  std::string csv = csv_header() + "\n";
  int code = kOk;
  for (const SimConfig& c : configs) {
    try {
      const SimReport r = run_study(c);
      reports.push_back(r);
      csv += csv_rows(r);
      if (r.boundary > 0) {
        err << "note: " << r.boundary << " of " << r.replicates << " fits at g=" << c.g
            << " h=" << c.h << " m=" << c.m << " had a variance at the floor\n";
      }
    } catch (const StudyAborted& e) {
      err << "error: " << e.what() << '\n';
      nlohmann::json j = e.report;
      j["aborted"] = true;
      reports.push_back(std::move(j));
      code = kStudyAborted;
      break;
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return kConfigError;
    }
  }
  try {
    if (!a.out_json.empty()) {
      write_file(a.out_json, (configs.size() == 1 && reports.size() == 1 ? reports[0] : reports)
                                     .dump(2) + "\n");
    }
    if (code == kOk) {
      if (a.out_csv.empty()) out << csv;
      else write_file(a.out_csv, csv);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return code;
}

int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream&) {
  oracle::ValidationOptions opt;
  opt.seed = a.seed;
  opt.instances = a.instances;
  const auto results = oracle::run_validation(opt);
  bool ok = true;
  char buf[160];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-20s max_error=%.3e tol=%.1e %s\n", r.name.c_str(),
                  r.max_error, r.tolerance, r.passed ? "PASS" : "FAIL");
    out << buf;
    ok = ok && r.passed;
  }
  out << (ok ? "all checks passed\n" : "validation FAILED\n");
  return ok ? kOk : kCheckFailed;
}

}  // namespace crossfit::app
