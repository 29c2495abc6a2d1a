#include "report.hpp"

#include "crossfit/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace crossfit::app {

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_from(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw DataError("line " + std::to_string(line) + ": column '" + column +
                    "' is not a finite number: '" + s + "'");
  }
  return v;
}

int parse_index(const std::string& s, std::size_t line, const std::string& column) {
  const double v = parse_double(s, line, column);
  if (v != std::floor(v) || v < 1 || v > std::numeric_limits<int>::max()) {
    throw DataError("line " + std::to_string(line) + ": index '" + column +
                    "' must be a positive integer, got '" + s + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

nlohmann::json to_json(const FitReport& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["method"] = r.method;
  j["design"] = {{"g", r.g}, {"h", r.h}, {"m", r.m}, {"n", r.n}};
  j["level"] = r.level;
  auto& rows = j["parameters"];
  rows = nlohmann::json::array();
  for (const CiRow& p : r.parameters) {
    nlohmann::json row{{"name", p.name},       {"estimate", number(p.estimate)},
                       {"se", number(p.se)},   {"lower", number(p.lower)},
                       {"upper", number(p.upper)}, {"rate", p.rate},
                       {"variance", p.variance}, {"defined", p.defined}};
    if (p.variance) {
      row["sigma_lower"] = number(p.sigma_lower);
      row["sigma_upper"] = number(p.sigma_upper);
    }
    rows.push_back(std::move(row));
  }
  const Convergence& c = r.convergence;
  j["convergence"] = {{"converged", c.converged},   {"iterations", c.iterations},
                      {"score_norm", number(c.score_norm)}, {"last_step", number(c.last_step)},
                      {"loglik", number(c.loglik)}, {"reml_criterion", number(c.reml_criterion)}};
  const MomentEstimates& mo = r.moments;
  j["moments"] = {{"mu3_alpha", mo.mu3_alpha}, {"mu4_alpha", mo.mu4_alpha},
                  {"mu3_beta", mo.mu3_beta},   {"mu4_beta", mo.mu4_beta},
                  {"mu4_gamma", mo.mu4_gamma}, {"mu4_e", mo.mu4_e}};
  j["warnings"] = r.warnings;
  return j;
}

FitReport fit_report_from_json(const nlohmann::json& j) {
  FitReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != kSchemaVersion) {
    throw DataError("unsupported report schema_version " + std::to_string(r.schema_version));
  }
  r.method = j.at("method").get<std::string>();
  const auto& d = j.at("design");
  r.g = d.at("g").get<int>();
  r.h = d.at("h").get<int>();
  r.m = d.at("m").get<int>();
  r.n = d.at("n").get<long long>();
  r.level = j.at("level").get<double>();
  for (const auto& row : j.at("parameters")) {
    CiRow p;
    p.name = row.at("name").get<std::string>();
    p.estimate = number_from(row, "estimate");
    p.se = number_from(row, "se");
    p.lower = number_from(row, "lower");
    p.upper = number_from(row, "upper");
    p.rate = row.at("rate").get<std::string>();
    p.variance = row.at("variance").get<bool>();
    p.defined = row.at("defined").get<bool>();
    if (p.variance) {
      p.sigma_lower = number_from(row, "sigma_lower");
      p.sigma_upper = number_from(row, "sigma_upper");
    }
    r.parameters.push_back(std::move(p));
  }
  const auto& c = j.at("convergence");
  r.convergence.converged = c.at("converged").get<bool>();
  r.convergence.iterations = c.at("iterations").get<int>();
  r.convergence.score_norm = number_from(c, "score_norm");
  r.convergence.last_step = number_from(c, "last_step");
  r.convergence.loglik = number_from(c, "loglik");
  r.convergence.reml_criterion = number_from(c, "reml_criterion");
  const auto& mo = j.at("moments");
  r.moments.mu3_alpha = mo.at("mu3_alpha").get<double>();
  r.moments.mu4_alpha = mo.at("mu4_alpha").get<double>();
  r.moments.mu3_beta = mo.at("mu3_beta").get<double>();
  r.moments.mu4_beta = mo.at("mu4_beta").get<double>();
  r.moments.mu4_gamma = mo.at("mu4_gamma").get<double>();
  r.moments.mu4_e = mo.at("mu4_e").get<double>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

std::string format_table(const FitReport& r) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s fit, g=%d h=%d m=%d n=%lld, %.1f%% intervals\n",
                r.method == "ml" ? "ML" : "REML", r.g, r.h, r.m, r.n, 100.0 * r.level);
  out << buf;
  std::snprintf(buf, sizeof buf, "%-22s %12s %12s %12s %12s %5s\n", "parameter", "estimate", "se",
                "lower", "upper", "rate");
  out << buf;
  for (const CiRow& p : r.parameters) {
    if (p.defined) {
      std::snprintf(buf, sizeof buf, "%-22s %12.5g %12.5g %12.5g %12.5g %5s\n", p.name.c_str(),
                    p.estimate, p.se, p.lower, p.upper, p.rate.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%-22s %12.5g %12s %12s %12s %5s\n", p.name.c_str(),
                    p.estimate, "-", "undefined", "undefined", p.rate.c_str());
    }
    out << buf;
  }
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
  return out.str();
}

RawTable read_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      header = split(line);
      break;
    }
  }
  if (header.empty()) throw EmptyData();
  int ci = -1, cj = -1, ck = -1, cy = -1;
  RawTable t;
  std::vector<int> covcol;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    const int at = static_cast<int>(c);
    if (h == "i") ci = at;
    else if (h == "j") cj = at;
    else if (h == "k") ck = at;
    else if (h == "y") cy = at;
    else {
      if (h.empty()) throw DataError("line " + std::to_string(lineno) + ": empty column name");
      for (const auto& seen : t.names) {
        if (seen == h) throw DataError("duplicate column '" + h + "'");
      }
      t.names.push_back(h);
      covcol.push_back(at);
    }
  }
  if (ci < 0 || cj < 0 || ck < 0 || cy < 0) {
    throw DataError("header must contain the columns i, j, k and y");
  }
  t.columns.resize(t.names.size());
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw DataError("line " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    t.i.push_back(parse_index(cells[ci], lineno, "i"));
    t.j.push_back(parse_index(cells[cj], lineno, "j"));
    t.k.push_back(parse_index(cells[ck], lineno, "k"));
    t.y.push_back(parse_double(cells[cy], lineno, "y"));
    for (std::size_t c = 0; c < covcol.size(); ++c) {
      t.columns[c].push_back(parse_double(cells[covcol[c]], lineno, t.names[c]));
    }
  }
  if (t.rows() == 0) throw EmptyData();
  return t;
}

RawTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace crossfit::app
