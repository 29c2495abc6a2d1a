#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace app = crossfit::app;

int main(int argc, char** argv) {
  CLI::App cli{"Crossed random-effects regression: fitting, simulation and validation"};
  cli.require_subcommand(1);

  app::FitArgs fa;
  auto* fit = cli.add_subcommand("fit", "Fit a model to a balanced i,j,k,y CSV");
  fit->add_option("--data", fa.data, "input CSV with columns i, j, k, y and covariates")
      ->required();
  fit->add_option("--method", fa.method, "ml or reml")->capture_default_str();
  fit->add_option("--row-cols", fa.columns.row, "row-level covariates")->delimiter(',');
  fit->add_option("--col-cols", fa.columns.col, "column-level covariates")->delimiter(',');
  fit->add_option("--inter-cols", fa.columns.inter, "cell-level covariates")->delimiter(',');
  fit->add_option("--within-cols", fa.columns.within, "observation-level covariates")
      ->delimiter(',');
  fit->add_option("--decompose", fa.columns.decompose,
                  "split a covariate into row, column, cell and within parts")
      ->delimiter(',');
  fit->add_option("--level", fa.level, "confidence level")->capture_default_str();
  fit->add_option("--out", fa.out, "write the JSON report here");
  fit->add_flag("--table", fa.table, "print an aligned text table");

  app::SimulateArgs sa;
  auto* sim = cli.add_subcommand("simulate", "Run a coverage simulation study");
  sim->set_help_flag("--help", "Print this help message and exit");  // -h clashes with --h
  sim->add_option("--config", sa.config, "JSON configuration file");
  sim->add_option("--preset", sa.preset, "table1-cell, table2-cell, table1 or table2");
  sim->add_option("--g", sa.g);
  sim->add_option("--h", sa.h);
  sim->add_option("--m", sa.m);
  sim->add_option("--reps", sa.reps, "replicates per cell");
  sim->add_option("--seed", sa.seed);
  sim->add_option("--method", sa.method, "ml or reml");
  sim->add_option("--threads", sa.threads, "worker threads (default: CROSSFIT_THREADS or all cores)");
  sim->add_option("--out-json", sa.out_json, "write the JSON report here");
  sim->add_option("--out-csv", sa.out_csv, "write the coverage CSV here instead of stdout");

  app::ValidateArgs va;
  auto* val = cli.add_subcommand("validate", "Compare structured formulas with dense algebra");
  val->add_option("--seed", va.seed)->capture_default_str();
  val->add_option("--instances", va.instances, "random instances per design")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    if (code == 0) return 0;
    return sim->parsed() ? app::kConfigError : app::kDataError;
  }

  if (fit->parsed()) return app::cmd_fit(fa, std::cout, std::cerr);
  if (sim->parsed()) return app::cmd_simulate(sa, std::cout, std::cerr);
  return app::cmd_validate(va, std::cout, std::cerr);
}
