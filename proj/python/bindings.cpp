#include "commands.hpp"

#include "crossfit/errors.hpp"
#include "crossfit/kron_cov.hpp"
#include "crossfit/oracle.hpp"
#include "crossfit/sim.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace crossfit;

namespace {

app::ColumnSpec column_spec(const std::vector<std::string>& row, const std::vector<std::string>& col,
                            const std::vector<std::string>& inter,
                            const std::vector<std::string>& within,
                            const std::vector<std::string>& decompose) {
  app::ColumnSpec s;
  s.row = row;
  s.col = col;
  s.inter = inter;
  s.within = within;
  s.decompose = decompose;
  return s;
}

std::string fit_table(const RawTable& table, const app::ColumnSpec& spec, const std::string& method,
                      double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie strictly in (0, 1)");
  const Method m = parse_method(method);
  std::vector<std::string> warnings;
  const ModelData data = app::build_model_data(table, spec, warnings);
  py::gil_scoped_release release;
  return app::to_json(app::fit_report(data, m, level, warnings)).dump();
}

}  // namespace

PYBIND11_MODULE(_crossfit, mod) {
  mod.doc() = "Balanced two-way crossed mixed models: fitting, intervals and simulation";

  static py::exception<Error> base(mod, "CrossfitError");
  static py::exception<DataError> data_error(mod, "DataError", base.ptr());
  static py::exception<ConfigError> config_error(mod, "ConfigError", base.ptr());
  static py::exception<NoConvergence> no_convergence(mod, "NoConvergence", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const NoConvergence& e) {
      py::set_error(no_convergence, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  mod.def(
      "fit_arrays",
      [](std::vector<int> i, std::vector<int> j, std::vector<int> k, std::vector<double> y,
         std::map<std::string, std::vector<double>> columns, std::vector<std::string> row,
         std::vector<std::string> col, std::vector<std::string> inter, std::vector<std::string> within,
         std::vector<std::string> decompose, const std::string& method, double level) {
        RawTable t;
        t.i = std::move(i);
        t.j = std::move(j);
        t.k = std::move(k);
        t.y = std::move(y);
        if (t.i.size() != t.y.size() || t.j.size() != t.y.size() || t.k.size() != t.y.size())
          throw DataError("i, j, k and y must have the same length");
        for (auto& [name, values] : columns) {
          if (values.size() != t.y.size()) throw DataError("column '" + name + "' has the wrong length");
          t.names.push_back(name);
          t.columns.push_back(std::move(values));
        }
        return fit_table(t, column_spec(row, col, inter, within, decompose), method, level);
      },
      py::arg("i"), py::arg("j"), py::arg("k"), py::arg("y"), py::arg("columns"), py::arg("row"),
      py::arg("col"), py::arg("inter"), py::arg("within"), py::arg("decompose"), py::arg("method"),
      py::arg("level"));

  mod.def(
      "fit_csv",
      [](const std::string& path, std::vector<std::string> row, std::vector<std::string> col,
         std::vector<std::string> inter, std::vector<std::string> within,
         std::vector<std::string> decompose, const std::string& method, double level) {
        return fit_table(app::read_csv_file(path), column_spec(row, col, inter, within, decompose),
                         method, level);
      },
      py::arg("path"), py::arg("row"), py::arg("col"), py::arg("inter"), py::arg("within"),
      py::arg("decompose"), py::arg("method"), py::arg("level"));

  mod.def(
      "simulate_json",
      [](const std::string& config) {
        const SimConfig c = sim_config_from_json(nlohmann::json::parse(config));
        py::gil_scoped_release release;
        return nlohmann::json(run_study(c)).dump();
      },
      py::arg("config"));

  mod.def(
      "preset_json",
      [](const std::string& name, int g, int h, int m) {
        return nlohmann::json(preset_cell(name, g, h, m)).dump();
      },
      py::arg("name"), py::arg("g"), py::arg("h"), py::arg("m"));

  mod.def(
      "validate",
      [](std::uint64_t seed, int instances) {
        oracle::ValidationOptions opt;
        opt.seed = seed;
        opt.instances = instances;
        std::vector<py::dict> out;
        for (const auto& r : oracle::run_validation(opt)) {
          py::dict d;
          d["name"] = r.name;
          d["max_error"] = r.max_error;
          d["tolerance"] = r.tolerance;
          d["passed"] = r.passed;
          out.push_back(d);
        }
        return out;
      },
      py::arg("seed") = 1, py::arg("instances") = 20);

  mod.def(
      "lambdas",
      [](double sa, double sb, double sg, double se, int g, int h, int m) {
        const Lambdas l = lambdas_from({sa, sb, sg, se}, Design(g, h, m));
        return py::make_tuple(std::vector<double>(l.value.begin(), l.value.end()),
                              std::vector<double>(l.mult.begin(), l.mult.end()));
      },
      py::arg("sigma_alpha2"), py::arg("sigma_beta2"), py::arg("sigma_gamma2"), py::arg("sigma_e2"),
      py::arg("g"), py::arg("h"), py::arg("m"));
}
