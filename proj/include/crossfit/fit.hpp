#pragma once

#include "crossfit/errors.hpp"
#include "crossfit/model.hpp"

#include <array>
#include <string>
#include <vector>

namespace crossfit {

enum class Method { ml, reml };

const char* to_string(Method method);
Method parse_method(const std::string& text);  // "ml" or "reml", throws ConfigError

struct FitOptions {
  Method method = Method::reml;
  int max_iter = 100;
  double score_tol = 1e-8;   // on max |K^{-1/2} psi|
  double step_tol = 1e-10;   // relative change of theta
  double floor_rel = 1e-10;  // variance floor as a fraction of var(y)
  double fd_rel = 1e-6;      // finite-difference step for the theta Jacobian
  int max_halvings = 30;
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;  // loglik for ML, l_R for REML
  double score_norm = 0.0;
  double step = 0.0;       // relative theta change
  int halvings = 0;
};

struct FitResult {
  Method method = Method::reml;
  Design design;
  ParamVector params;
  ScoreVector score;  // psi for ML, psi_A for REML
  double loglik = 0.0;
  double reml_criterion = 0.0;
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
  double last_step = 0.0;
  double floor = 0.0;
  std::array<bool, 4> boundary{};  // alpha, beta, gamma, e at the floor
  std::vector<IterationRecord> trace;

  bool at_boundary() const { return boundary[0] || boundary[1] || boundary[2] || boundary[3]; }
};

class NoConvergence : public Error {
 public:
  explicit NoConvergence(FitResult best_iterate);
  FitResult best;
};

// Method-of-moments start from the stratum quadratics at the OLS fit, clamped to `floor`.
VarianceComponents anova_start(const SuffStats& stats, double floor);

FitResult fit(const SuffStats& stats, const FitOptions& options = {});
FitResult fit_ml(const SuffStats& stats, FitOptions options = {});
FitResult fit_reml(const SuffStats& stats, FitOptions options = {});

}  // namespace crossfit
