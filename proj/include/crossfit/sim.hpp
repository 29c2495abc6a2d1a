#pragma once

#include "crossfit/errors.hpp"
#include "crossfit/fit.hpp"
#include "crossfit/inference.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace crossfit {

enum class EffectLaw { normal, mixture };

const char* to_string(EffectLaw law);

struct SimConfig {
  int g = 10, h = 10, m = 10;
  int replicates = 1000;
  std::uint64_t seed = 1;
  std::array<double, 5> xi{0.0, 5.0, 7.0, 3.0, 4.0};
  VarianceComponents theta{9.0, 49.0, 36.0, 81.0};
  std::array<EffectLaw, 4> law{EffectLaw::normal, EffectLaw::normal, EffectLaw::normal,
                               EffectLaw::normal};  // alpha, beta, gamma, e
  Method method = Method::reml;
  double level = 0.95;
  int threads = 0;  // 0: CROSSFIT_THREADS or the hardware concurrency

  Design design() const { return {g, h, m}; }
  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const SimConfig& c);
// Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
SimConfig sim_config_from_json(const nlohmann::json& j);

// Named presets: "table1-cell" (normal effects), "table2-cell" (mixture beta and e).
SimConfig preset_cell(const std::string& name, int g, int h, int m);
// The eight (g, h, m) cells of the coverage tables.
std::vector<Design> table_grid();

// Independent stream for replicate r.
std::mt19937_64 replicate_stream(std::uint64_t seed, std::uint64_t r);

struct CovariateDraw {
  Grid x;                  // 4 + t_i + 1.5 u_j + 2 v_ij + 3 w_ijk
  Decomposition parts;
};

CovariateDraw gen_covariate(const Design& design, std::mt19937_64& rng);

struct Effects {
  Eigen::VectorXd alpha, beta, gamma, e;
};

// 0.3 N(0.5, 1) + 0.7 N(mu, (variance - 0.375 - 0.7 mu^2) / 0.7), mu = -0.3 * 0.5 / 0.7.
double mixture_mu();
double mixture_second_variance(double variance);  // throws InvalidMixture when <= 0
Eigen::VectorXd draw_effects(EffectLaw law, double variance, Eigen::Index count,
                             std::mt19937_64& rng);
Effects gen_effects(const SimConfig& config, std::mt19937_64& rng);

struct SimDataset {
  ModelData data;
  ParamVector truth;
  Effects effects;
};

// Covariate, effects and response for replicate r.
SimDataset simulate_dataset(const SimConfig& config, std::uint64_t r);

struct ReplicateOutcome {
  bool ok = false;
  bool boundary = false;
  std::string error;
  ParamVector estimate;
  CovarianceEstimate covariance;
  std::vector<bool> covered;     // omega order
  std::vector<bool> defined;
  std::vector<double> length;    // sigma scale for variances
};

ReplicateOutcome analyze(const SimDataset& dataset, const SimConfig& config);

struct ParamSummary {
  std::string name;
  double truth = 0.0;
  double coverage = 0.0;
  double mean_length = 0.0;    // heavy-tailed for variances near zero
  double median_length = std::numeric_limits<double>::quiet_NaN();
  double mc_se = 0.0;
  int used = 0;
  int undefined = 0;
};

struct SimReport {
  SimConfig config;
  std::vector<ParamSummary> params;
  int replicates = 0;
  int failures = 0;
  int boundary = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> failure_messages;

  double failure_rate() const { return replicates ? static_cast<double>(failures) / replicates : 0.0; }
};

void to_json(nlohmann::json& j, const SimReport& r);

class StudyAborted : public Error {
 public:
  explicit StudyAborted(SimReport partial);
  SimReport report;
};

// Worker count: config.threads, else CROSSFIT_THREADS, else hardware concurrency.
int resolve_threads(int requested);

// Runs `task(r)` for r in [0, count) on up to `threads` workers.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

// Throws StudyAborted when more than 5% of the replicates fail.
SimReport run_study(const SimConfig& config);

// Estimate,g,h,m,Cvge,Len
std::string csv_header();
std::string csv_rows(const SimReport& report);

}  // namespace crossfit
