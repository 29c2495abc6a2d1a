#include "crossfit/reml.hpp"

#include <cmath>

namespace crossfit {

AdjustmentTraces adjustment_traces(const Lambdas& lambdas, const NormalEquations& ne,
                                   const SuffStats& st) {
  const auto size = stratum_sizes(st.design);
  const auto J = lambda_jacobian(st.design);
  Eigen::Vector4d t = Eigen::Vector4d::Zero();
  for (int s = 0; s < kStrata; ++s) {
    const Eigen::MatrixXd xx = st.stratum_xx(static_cast<Stratum>(s));
    // trace(M^-1 xx_s), shared by every component that moves lambda_s
    const double tr = ne.ldlt.solve(xx).trace();
    const double w = size[s] / (lambdas.value[s] * lambdas.value[s]);
    for (int c = 0; c < 4; ++c) t[c] += 0.5 * J(s, c) * w * tr;
  }
  return {t[0], t[1], t[2], t[3]};
}

AdjustmentTraces adjustment_traces(const VarianceComponents& theta, const SuffStats& stats) {
  const Lambdas lam = lambdas_from(theta, stats.design);
  return adjustment_traces(lam, normal_equations(lam, stats), stats);
}

ScoreVector reml_score(const ParamVector& params, const SuffStats& stats) {
  ScoreVector out = score(params, stats);
  const Eigen::Vector4d t = adjustment_traces(params.theta, stats).vector();
  const OmegaLayout lay(stats.dims);
  for (int c = 0; c < 4; ++c) out.values[lay.theta[c]] += t[c];
  return out;
}

double log_det_normal(const NormalEquations& ne) {
  return ne.ldlt.vectorD().array().log().sum();
}

double reml_criterion(const VarianceComponents& theta, const SuffStats& stats) {
  const Lambdas lam = lambdas_from(theta, stats.design);
  const NormalEquations ne = normal_equations(lam, stats);
  const Eigen::VectorXd xi = ne.ldlt.solve(ne.b);
  return loglik(stratum_moments(stats, xi), lam, stats.design) - 0.5 * log_det_normal(ne);
}

}  // namespace crossfit
