#pragma once

#include "crossfit/covariates.hpp"
#include "crossfit/design.hpp"

#include <Eigen/Dense>

#include <array>

namespace crossfit {

// Response plus classified covariates on a validated design.
struct ModelData {
  Design design;
  CovariateSet covariates;
  Grid y;
};

// The five orthogonal strata of the grid. The numbering matches lambda_0..lambda_4:
// within-cell, interaction (double-centred cell means), row, column, grand mean.
enum class Stratum : int { within = 0, cell = 1, row = 2, col = 3, grand = 4 };

inline constexpr int kStrata = 5;

// Number of observations behind one contrast of each stratum: (1, m, hm, gm, n).
std::array<double, kStrata> stratum_sizes(const Design& design);

// Lossless compression of (y, X) for likelihood work.
//
// Everything is stored over the augmented vector z = [1, x^(a), x^(b), x^(ab), x^(w), y]
// (length p + 2). For the four contrast strata, `ss[s]` holds the unweighted sum of
// outer products of the stratum contrasts of z, i.e. for the row stratum
//   ss[row] = sum_i (zbar_i. - zbar)(zbar_i. - zbar)^T,
// which contains SA^x_(a), SA^x_(a),(ab), SA^xy_(a), ... and sum_i ybar_i(c)^2 as
// sub-blocks. The intercept row/column of every contrast block is zero.
struct SuffStats {
  Design design;
  CovariateDims dims;
  Eigen::VectorXd mean;                 // zbar, mean[0] == 1
  std::array<Eigen::MatrixXd, 4> ss;    // within, cell, row, col
  Eigen::MatrixXd cell_means;           // gh x (p + 1): [xbar_ij, ybar_ij]
  Eigen::MatrixXd row_means;            // g  x (p + 1)
  Eigen::MatrixXd col_means;            // h  x (p + 1)

  int augmented_size() const { return dims.p() + 2; }
  int xi_size() const { return dims.p() + 1; }
  int y_index() const { return dims.p() + 1; }

  // ss[s] for the contrast strata, zbar zbar^T for the grand stratum, so that
  // X^T P_s X = stratum_sizes()[s] * stratum(s) restricted to the [1, x] block.
  Eigen::MatrixXd stratum(Stratum s) const;
  Eigen::MatrixXd stratum_xx(Stratum s) const;  // (p+1) x (p+1)
  Eigen::VectorXd stratum_xy(Stratum s) const;  // p+1
  double stratum_yy(Stratum s) const;

  // Appendix-style named blocks, e.g. block(Stratum::row, Level::row, Level::inter) is
  // SA^x_(a),(ab) and xy(Stratum::col, Level::within) is SB^xy_(w).
  Eigen::MatrixXd block(Stratum s, Level r, Level c) const;
  Eigen::VectorXd xy(Stratum s, Level r) const;

  Eigen::VectorXd xbar(Level level) const;

  // Normalised level blocks D1..D4 (g^-1 SA_(a), h^-1 SB_(b), (gh)^-1 SAB_(ab), n^-1 SW_(w)).
  Eigen::MatrixXd D(int which) const;

  // Unbiased sample variance of y.
  double y_variance() const;
};

SuffStats compress(const ModelData& data);

}  // namespace crossfit
