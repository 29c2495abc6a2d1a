#pragma once

#include "crossfit/fit.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace crossfit {

// Plug-in moments of the residual contrasts.
struct MomentEstimates {
  double mu3_alpha = 0.0, mu4_alpha = 0.0;  // row contrasts rbar_i. - rbar
  double mu3_beta = 0.0, mu4_beta = 0.0;    // column contrasts rbar_.j - rbar
  double mu4_gamma = 0.0;                   // rbar_ij - rbar_i. - rbar_.j + rbar
  double mu4_e = 0.0;                       // r_ijk - rbar_ij
};

MomentEstimates residual_moments(const Grid& residuals);

struct CovarianceEstimate {
  Eigen::MatrixXd F;   // omega order
  Eigen::VectorXd K;   // diagonal of the rate normalizer
  Eigen::VectorXd se;  // sqrt(F_rr / K_rr), NaN where F_rr < 0
  double tau = 0.0;    // sigma_alpha2 + eta sigma_beta2
  double f1 = 0.0;
};

// Throws BoundaryInference when the fit has a variance at the floor, unless
// allow_boundary is set (the simulation harness uses that to keep going).
CovarianceEstimate fhat(const FitResult& fit, const MomentEstimates& moments,
                        const SuffStats& stats, bool allow_boundary = false);

// Inverse normal CDF at 1 - b/2.
double normal_critical(double b);

struct CiRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::string rate;          // g, h, gh or n
  bool variance = false;
  bool defined = true;       // false when mu4 - sigma^4 <= 0 or the variance sits at the floor
  double sigma_lower = 0.0;  // variance rows: interval for sigma itself
  double sigma_upper = 0.0;

  // Interval length on the scale used in coverage tables (sigma for variances).
  double table_length() const;
  bool covers(double truth) const;
};

struct CiTable {
  double level = 0.95;  // 1 - b
  std::vector<CiRow> rows;
};

CiTable confidence_intervals(const FitResult& fit, const CovarianceEstimate& cov,
                             const std::vector<std::string>& names, double b = 0.05);

// Inputs of the influence function: estimates, D blocks and covariate means.
struct InfluenceInputs {
  CovariateDims dims;
  VarianceComponents theta;
  Eigen::MatrixXd D1, D2, D3, D4;
  Eigen::VectorXd xbar_a, xbar_b;
  double eta = 1.0;
};

InfluenceInputs influence_inputs(const FitResult& fit, const SuffStats& stats);

// One observation unit: random effects and covariates. The row and column covariates
// are raw values; the interaction and within covariates are their centred contrasts.
struct InfluencePoint {
  double alpha = 0.0, beta = 0.0, gamma = 0.0, e = 0.0;
  Eigen::VectorXd xa, xb, xab_c, xw_c;
};

// Influence function in omega order for 0 <= eta < infinity.
Eigen::VectorXd influence(const InfluenceInputs& in, const InfluencePoint& point);
// The simplified eta = 0 form.
Eigen::VectorXd influence_eta0(const InfluenceInputs& in, const InfluencePoint& point);

}  // namespace crossfit
