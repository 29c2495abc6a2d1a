#pragma once

#include "crossfit/model.hpp"

namespace crossfit {

// t_s = 1/2 trace{(X^T V^-1 X)^-1 X^T V^-1 Z_s Z_s^T V^-1 X} for the alpha, beta,
// gamma and error components.
struct AdjustmentTraces {
  double t_alpha = 0.0;
  double t_beta = 0.0;
  double t_gamma = 0.0;
  double t_e = 0.0;

  Eigen::Vector4d vector() const { return {t_alpha, t_beta, t_gamma, t_e}; }
};

AdjustmentTraces adjustment_traces(const VarianceComponents& theta, const SuffStats& stats);
AdjustmentTraces adjustment_traces(const Lambdas& lambdas, const NormalEquations& ne,
                                   const SuffStats& stats);

// Gradient of l_A = l - 1/2 log|X^T V^-1 X|. The xi block equals the ML score and each
// variance entry is the ML entry plus its trace.
ScoreVector reml_score(const ParamVector& params, const SuffStats& stats);

// l(xi_hat(theta), theta) - 1/2 log|X^T V^-1 X|
double reml_criterion(const VarianceComponents& theta, const SuffStats& stats);

double log_det_normal(const NormalEquations& ne);

}  // namespace crossfit
