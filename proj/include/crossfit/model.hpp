#pragma once

#include "crossfit/covariates.hpp"
#include "crossfit/kron_cov.hpp"
#include "crossfit/suffstats.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <vector>

namespace crossfit {

// Where each xi entry and each variance lands inside
// omega = [xi0, xi1, s_alpha2, xi2, s_beta2, xi3, s_gamma2, xi4, s_e2].
struct OmegaLayout {
  std::vector<int> xi;        // size p + 1, indexed like the augmented covariate vector
  std::array<int, 4> theta{};  // alpha, beta, gamma, e
  int size = 0;

  explicit OmegaLayout(const CovariateDims& dims);
};

struct ParamVector {
  CovariateDims dims;
  Eigen::VectorXd xi;  // [xi0, xi1, xi2, xi3, xi4], length p + 1
  VarianceComponents theta;

  ParamVector() = default;
  ParamVector(const CovariateDims& dims, Eigen::VectorXd xi, const VarianceComponents& theta);

  int size() const { return dims.p() + 5; }
  Eigen::VectorXd omega() const;
  static ParamVector from_omega(const CovariateDims& dims, const Eigen::VectorXd& omega);

  double xi0() const { return xi[0]; }
  Eigen::VectorXd slopes(Level level) const;
};

// Parameter labels in omega order, e.g. "xi0", "xi1[x_row]", "sigma_alpha2".
std::vector<std::string> omega_names(const CovariateSet& covariates);
std::vector<std::string> omega_names(const CovariateDims& dims);

// Diagonal of K = diag(g I_{pa+2}, h I_{pb+1}, gh I_{pab+1}, n I_{pw+1}).
Eigen::VectorXd k_diagonal(const Design& design, const CovariateDims& dims);

// Rate label for every omega entry: "g", "h", "gh" or "n".
std::vector<std::string> omega_rates(const CovariateDims& dims);

struct ScoreVector {
  CovariateDims dims;
  Eigen::VectorXd values;  // omega order

  Eigen::VectorXd xi_block() const;
  Eigen::Vector4d theta_block() const;
  // psi^(a) = [l_xi0, l_xi1, l_alpha], psi^(b) = [l_xi2, l_beta], psi^(ab), psi^(w).
  Eigen::VectorXd part(Level level) const;
  // max |K^{-1/2} psi|
  double normalized_max(const Design& design) const;
};

// Residual contrasts at a given xi, computed from the sufficient statistics only.
struct ResidualContrasts {
  double grand = 0.0;         // rbar
  Eigen::VectorXd row;        // g:  rbar_i. - rbar
  Eigen::VectorXd col;        // h:  rbar_.j - rbar
  Eigen::VectorXd inter;      // gh: rbar_ij - rbar_i. - rbar_.j + rbar
  double within_ss = 0.0;     // sum (r_ijk - rbar_ij)^2
};

ResidualContrasts residual_contrasts(const SuffStats& stats, const Eigen::VectorXd& xi);

// Per-stratum ingredients of the likelihood at xi: the covariate blocks xx_s,
// cross_s = xy_s - xx_s xi, and the residual quadratics q_s (unweighted sums of
// squared residual contrasts).
struct StratumMoments {
  std::array<Eigen::MatrixXd, kStrata> xx;
  std::array<Eigen::VectorXd, kStrata> cross;
  std::array<double, kStrata> q{};
};

StratumMoments stratum_moments(const SuffStats& stats, const Eigen::VectorXd& xi);

// Moments replaced by their expectations when the data follow `truth`.
StratumMoments expected_moments(const SuffStats& stats, const Eigen::VectorXd& xi,
                                const ParamVector& truth);

double loglik(const ParamVector& params, const SuffStats& stats);
double loglik(const StratumMoments& mom, const Lambdas& lambdas, const Design& design);

ScoreVector score(const ParamVector& params, const SuffStats& stats);
ScoreVector score(const StratumMoments& mom, const Lambdas& lambdas, const Design& design,
                  const CovariateDims& dims);

// Weighted normal equations M xi = b with M = X^T V^-1 X.
struct NormalEquations {
  Eigen::MatrixXd M;
  Eigen::VectorXd b;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  double condition = 0.0;  // of the diagonally scaled M
};

// Throws SingularDesign when the scaled condition number exceeds 1e12.
NormalEquations normal_equations(const Lambdas& lambdas, const SuffStats& stats);

Eigen::VectorXd gls_solve(const VarianceComponents& theta, const SuffStats& stats);

// Residual grid r = y - X xi from raw data.
Grid residuals(const ModelData& data, const Eigen::VectorXd& xi);

struct InformationMatrices {
  Eigen::MatrixXd Bn;  // -K^{-1/2} E grad psi K^{-1/2}, finite differences of the expected score
  Eigen::MatrixXd B;   // limit matrix built from the D blocks, eta and tau
};

InformationMatrices expected_info_Bn(const ParamVector& truth, const SuffStats& stats);
Eigen::MatrixXd limit_B(const ParamVector& truth, const SuffStats& stats);

}  // namespace crossfit
