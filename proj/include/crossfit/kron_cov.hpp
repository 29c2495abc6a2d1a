#pragma once

#include "crossfit/design.hpp"
#include "crossfit/suffstats.hpp"

#include <Eigen/Dense>

#include <array>

namespace crossfit {

struct VarianceComponents {
  double sigma_alpha2 = 0.0;  // rows
  double sigma_beta2 = 0.0;   // columns
  double sigma_gamma2 = 0.0;  // interaction
  double sigma_e2 = 1.0;      // within cell

  double operator[](int t) const;
  double& operator[](int t);
  Eigen::Vector4d vector() const { return {sigma_alpha2, sigma_beta2, sigma_gamma2, sigma_e2}; }
  static VarianceComponents from(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
};

// The five distinct eigenvalues of V and their multiplicities
// gh(m-1), (g-1)(h-1), g-1, h-1, 1.
struct Lambdas {
  std::array<double, kStrata> value{};
  std::array<double, kStrata> mult{};
};

std::array<double, kStrata> lambda_multiplicities(const Design& design);

// d lambda_s / d theta_t, theta ordered (alpha, beta, gamma, e).
Eigen::Matrix<double, kStrata, 4> lambda_jacobian(const Design& design);

// Throws NonPositiveLambda when any lambda is <= 0.
Lambdas lambdas_from(const VarianceComponents& theta, const Design& design);

double logdet_v(const Lambdas& lambdas);

// Unweighted sums of squares of the five stratum contrasts of r:
//   [sum (r - rbar_ij)^2, sum_ij (rbar_ij - rbar_i. - rbar_.j + rbar)^2,
//    sum_i (rbar_i. - rbar)^2, sum_j (rbar_.j - rbar)^2, rbar^2].
std::array<double, kStrata> stratum_sums(const Grid& r);

// r^T V^-1 r from the stratum sums.
double quad_form(const Lambdas& lambdas, const Grid& r);
double quad_form(const Lambdas& lambdas, const Design& design, const std::array<double, kStrata>& sums);

// V^-1 v in O(n) through the projector decomposition.
Grid vinv_apply(const Lambdas& lambdas, const Grid& v);
Eigen::VectorXd vinv_apply(const Lambdas& lambdas, const Design& design, const Eigen::VectorXd& v);

// Explicit V for tests and the validate command. Throws TooLargeForDenseOracle for n > 4096.
Eigen::MatrixXd dense_v(const VarianceComponents& theta, const Design& design);

}  // namespace crossfit
