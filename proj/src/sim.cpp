#include "crossfit/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace crossfit {

namespace {

const char* kTableNames[9] = {"xi0", "xi1", "sigma_alpha2", "xi2", "sigma_beta2",
                              "xi3", "sigma_gamma2", "xi4", "sigma_e2"};
const char* kVarianceKeys[4] = {"sigma_alpha2", "sigma_beta2", "sigma_gamma2", "sigma_e2"};
const char* kLawKeys[4] = {"alpha", "beta", "gamma", "e"};

EffectLaw parse_law(const std::string& s) {
  if (s == "normal") return EffectLaw::normal;
  if (s == "mixture") return EffectLaw::mixture;
  throw ConfigError("unknown distribution '" + s + "' (expected normal or mixture)");
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

const char* to_string(EffectLaw law) { return law == EffectLaw::normal ? "normal" : "mixture"; }

void SimConfig::validate() const {
  if (g < 2 || h < 2 || m < 2) throw ConfigError("simulation needs g >= 2, h >= 2 and m >= 2");
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  for (int c = 0; c < 4; ++c) {
    if (!(theta[c] > 0.0)) throw ConfigError(std::string(kVarianceKeys[c]) + " must be positive");
    if (law[c] == EffectLaw::mixture && !(theta[c] - 0.375 - 0.7 * mixture_mu() * mixture_mu() > 0.0))
      throw ConfigError(std::string(kVarianceKeys[c]) + " is too small for the mixture law");
  }
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie strictly in (0, 1)");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json{{"g", c.g},
                     {"h", c.h},
                     {"m", c.m},
                     {"replicates", c.replicates},
                     {"seed", c.seed},
                     {"xi", c.xi},
                     {"method", to_string(c.method)},
                     {"level", c.level}};
  for (int t = 0; t < 4; ++t) {
    j["variances"][kVarianceKeys[t]] = c.theta[t];
    j["laws"][kLawKeys[t]] = to_string(c.law[t]);
  }
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
  reject_unknown(j, {"g", "h", "m", "replicates", "seed", "xi", "variances", "laws", "method",
                     "level", "threads"},
                 "config");
  SimConfig c;
  if (j.contains("g")) c.g = get_as<int>(j, "g");
  if (j.contains("h")) c.h = get_as<int>(j, "h");
  if (j.contains("m")) c.m = get_as<int>(j, "m");
  if (j.contains("replicates")) c.replicates = get_as<int>(j, "replicates");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("xi")) {
    const auto xi = get_as<std::vector<double>>(j, "xi");
    if (xi.size() != 5) throw ConfigError("xi must have 5 entries");
    std::copy(xi.begin(), xi.end(), c.xi.begin());
  }
  if (j.contains("variances")) {
    const auto& v = j.at("variances");
    if (!v.is_object()) throw ConfigError("variances must be an object");
    reject_unknown(v, {kVarianceKeys[0], kVarianceKeys[1], kVarianceKeys[2], kVarianceKeys[3]},
                   "variances");
    for (int t = 0; t < 4; ++t) {
      if (v.contains(kVarianceKeys[t])) c.theta[t] = get_as<double>(v, kVarianceKeys[t]);
    }
  }
  if (j.contains("laws")) {
    const auto& v = j.at("laws");
    if (!v.is_object()) throw ConfigError("laws must be an object");
    reject_unknown(v, {kLawKeys[0], kLawKeys[1], kLawKeys[2], kLawKeys[3]}, "laws");
    for (int t = 0; t < 4; ++t) {
      if (v.contains(kLawKeys[t])) c.law[t] = parse_law(get_as<std::string>(v, kLawKeys[t]));
    }
  }
  if (j.contains("method")) c.method = parse_method(get_as<std::string>(j, "method"));
  if (j.contains("level")) c.level = get_as<double>(j, "level");
  if (j.contains("threads")) c.threads = get_as<int>(j, "threads");
  c.validate();
  return c;
}

SimConfig preset_cell(const std::string& name, int g, int h, int m) {
  SimConfig c;
  c.g = g;
  c.h = h;
  c.m = m;
  if (name == "table1-cell" || name == "table1") return c;
  if (name == "table2-cell" || name == "table2") {
    c.law[1] = EffectLaw::mixture;
    c.law[3] = EffectLaw::mixture;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<Design> table_grid() {
  std::vector<Design> out;
  for (int m : {10, 30})
    for (int h : {10, 50})
      for (int g : {10, 50}) out.emplace_back(g, h, m);
  return out;
}

std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t r) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(r >> 32)};
  return std::mt19937_64(seq);
}

CovariateDraw gen_covariate(const Design& d, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd t(d.g), u(d.h), v(static_cast<Eigen::Index>(d.g) * d.h), w(d.n);
  for (auto& x : t) x = z(rng);
  for (auto& x : u) x = z(rng);
  for (auto& x : v) x = z(rng);
  for (auto& x : w) x = z(rng);
  Grid x(d);
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.h; ++j)
      for (int k = 0; k < d.m; ++k) {
        x(i, j, k) = 4.0 + t[i] + 1.5 * u[j] + 2.0 * v[d.cell(i, j)] + 3.0 * w[d.index(i, j, k)];
      }
  return {x, decompose_covariate(x)};
}

double mixture_mu() { return -0.3 * 0.5 / 0.7; }

double mixture_second_variance(double variance) {
  const double mu = mixture_mu();
  const double rest = variance - 0.375 - 0.7 * mu * mu;
  if (!(rest > 0.0)) throw InvalidMixture(variance);
  return rest / 0.7;
}

Eigen::VectorXd draw_effects(EffectLaw law, double variance, Eigen::Index count,
                             std::mt19937_64& rng) {
  Eigen::VectorXd out(count);
  if (law == EffectLaw::normal) {
    std::normal_distribution<double> z(0.0, std::sqrt(variance));
    for (auto& x : out) x = z(rng);
    return out;
  }
  std::bernoulli_distribution first(0.3);
  std::normal_distribution<double> a(0.5, 1.0);
  std::normal_distribution<double> b(mixture_mu(), std::sqrt(mixture_second_variance(variance)));
  for (auto& x : out) x = first(rng) ? a(rng) : b(rng);
  return out;
}

Effects gen_effects(const SimConfig& c, std::mt19937_64& rng) {
  const Design d = c.design();
  Effects e;
  e.alpha = draw_effects(c.law[0], c.theta[0], d.g, rng);
  e.beta = draw_effects(c.law[1], c.theta[1], d.h, rng);
  e.gamma = draw_effects(c.law[2], c.theta[2], static_cast<Eigen::Index>(d.g) * d.h, rng);
  e.e = draw_effects(c.law[3], c.theta[3], d.n, rng);
  return e;
}

SimDataset simulate_dataset(const SimConfig& c, std::uint64_t r) {
  const Design d = c.design();
  std::mt19937_64 rng = replicate_stream(c.seed, r);
  const CovariateDraw draw = gen_covariate(d, rng);
  const Effects eff = gen_effects(c, rng);
  const Decomposition& x = draw.parts;

  CovariateSet cov(d);
  cov.row = x.row;
  cov.col = x.col;
  cov.inter = x.inter;
  cov.within = x.within;
  cov.row_names = {"x_row"};
  cov.col_names = {"x_col"};
  cov.inter_names = {"x_inter"};
  cov.within_names = {"x_within"};

  Grid y(d);
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.h; ++j)
      for (int k = 0; k < d.m; ++k) {
        const Eigen::Index ij = d.cell(i, j), at = d.index(i, j, k);
        y(i, j, k) = x.mean * c.xi[0] + x.row[i] * c.xi[1] + x.col[j] * c.xi[2] +
                     x.inter[ij] * c.xi[3] + x.within[at] * c.xi[4] + eff.alpha[i] +
                     eff.beta[j] + eff.gamma[ij] + eff.e[at];
      }

  Eigen::VectorXd xi(5);
  xi << x.mean * c.xi[0], c.xi[1], c.xi[2], c.xi[3], c.xi[4];
  return {ModelData{d, cov, y}, ParamVector(cov.dims(), xi, c.theta), eff};
}

ReplicateOutcome analyze(const SimDataset& ds, const SimConfig& c) {
  ReplicateOutcome out;
  try {
    const SuffStats st = compress(ds.data);
    FitOptions opt;
    opt.method = c.method;
    const FitResult fit = crossfit::fit(st, opt);
    const MomentEstimates mo = residual_moments(residuals(ds.data, fit.params.xi));
    out.covariance = fhat(fit, mo, st, true);
    const CiTable ci = confidence_intervals(fit, out.covariance, omega_names(ds.data.covariates),
                                            1.0 - c.level);
    const Eigen::VectorXd truth = ds.truth.omega();
    for (std::size_t r = 0; r < ci.rows.size(); ++r) {
      const CiRow& row = ci.rows[r];
      out.covered.push_back(row.covers(truth[static_cast<Eigen::Index>(r)]));
      out.defined.push_back(row.defined);
      out.length.push_back(row.table_length());
    }
    out.estimate = fit.params;
    out.boundary = fit.at_boundary();
    out.ok = true;
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

void to_json(nlohmann::json& j, const SimReport& r) {
  j = nlohmann::json{{"config", r.config},
                     {"replicates", r.replicates},
                     {"failures", r.failures},
                     {"failure_rate", r.failure_rate()},
                     {"boundary_fits", r.boundary},
                     {"wall_seconds", r.wall_seconds},
                     {"failure_messages", r.failure_messages}};
  auto& params = j["params"];
  params = nlohmann::json::array();
  for (const auto& p : r.params) {
    params.push_back({{"name", p.name},
                      {"truth", p.truth},
                      {"coverage", p.coverage},
                      {"mean_length", std::isfinite(p.mean_length) ? nlohmann::json(p.mean_length)
                                                                   : nlohmann::json(nullptr)},
                      {"median_length", std::isfinite(p.median_length) ? nlohmann::json(p.median_length)
                                                                       : nlohmann::json(nullptr)},
                      {"mc_se", p.mc_se},
                      {"used", p.used},
                      {"undefined", p.undefined}});
  }
}

StudyAborted::StudyAborted(SimReport partial)
    : Error("simulation aborted: " + std::to_string(partial.failures) + " of " +
            std::to_string(partial.replicates) + " replicates failed"),
      report(std::move(partial)) {}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CROSSFIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int r = 0; r < count; ++r) task(r);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex guard;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int r = next++; r < count; r = next++) {
        try {
          task(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(guard);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

SimReport run_study(const SimConfig& c) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(c.replicates));
  std::vector<Eigen::VectorXd> truths(outcomes.size());
  parallel_for(c.replicates, resolve_threads(c.threads), [&](int r) {
    const SimDataset ds = simulate_dataset(c, static_cast<std::uint64_t>(r));
    truths[static_cast<std::size_t>(r)] = ds.truth.omega();
    outcomes[static_cast<std::size_t>(r)] = analyze(ds, c);
  });

  SimReport rep;
  rep.config = c;
  rep.replicates = c.replicates;
  std::vector<int> covered(9, 0), defined(9, 0);
  std::vector<double> length(9, 0.0), truth(9, 0.0);
  std::vector<std::vector<double>> lengths(9);
  int ok = 0;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    const ReplicateOutcome& o = outcomes[r];
    if (!o.ok) {
      ++rep.failures;
      if (rep.failure_messages.size() < 10) {
        rep.failure_messages.push_back("replicate " + std::to_string(r) + ": " + o.error);
      }
      continue;
    }
    ++ok;
    if (o.boundary) ++rep.boundary;
    for (int p = 0; p < 9; ++p) {
      covered[p] += o.covered[p] ? 1 : 0;
      if (o.defined[p]) {
        ++defined[p];
        length[p] += o.length[p];
        lengths[p].push_back(o.length[p]);
      }
    }
    if (ok == 1) {
      for (int p = 0; p < 9; ++p) truth[p] = truths[r][p];
    }
  }
  for (int p = 0; p < 9; ++p) {
    ParamSummary s;
    s.name = kTableNames[p];
    s.truth = truth[p];
    s.used = ok;
    s.undefined = ok - defined[p];
    s.coverage = ok ? static_cast<double>(covered[p]) / ok : std::nan("");
    s.mean_length = defined[p] ? length[p] / defined[p] : std::nan("");
    if (!lengths[p].empty()) {
      auto& v = lengths[p];
      const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
      std::nth_element(v.begin(), mid, v.end());
      s.median_length = *mid;
      if (v.size() % 2 == 0) s.median_length = 0.5 * (s.median_length + *std::max_element(v.begin(), mid));
    }
    s.mc_se = ok ? std::sqrt(s.coverage * (1.0 - s.coverage) / ok) : std::nan("");
    rep.params.push_back(s);
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (rep.failures > 0.05 * rep.replicates) throw StudyAborted(rep);
  return rep;
}

std::string csv_header() { return "Estimate,g,h,m,Cvge,Len"; }

std::string csv_rows(const SimReport& r) {
  std::ostringstream out;
  char buf[64];
  for (const auto& p : r.params) {
    out << p.name << ',' << r.config.g << ',' << r.config.h << ',' << r.config.m << ',';
    std::snprintf(buf, sizeof buf, "%.3f", p.coverage);
    out << buf << ',';
    if (std::isfinite(p.mean_length)) {
      std::snprintf(buf, sizeof buf, "%.4f", p.mean_length);
      out << buf;
    } else {
      out << "NA";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace crossfit
