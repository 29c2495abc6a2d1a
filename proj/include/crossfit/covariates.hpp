#pragma once

#include "crossfit/design.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace crossfit {

// The four levels a covariate can live at.
enum class Level { row, col, inter, within };

const char* to_string(Level level);

struct CovariateDims {
  int pa = 0;   // row
  int pb = 0;   // column
  int pab = 0;  // interaction
  int pw = 0;   // within cell

  int p() const { return pa + pb + pab + pw; }
  int size(Level level) const;
  // Offset of a level's block inside the stacked covariate vector [a, b, ab, w].
  int offset(Level level) const;

  friend bool operator==(const CovariateDims&, const CovariateDims&) = default;
};

struct CovariateSet {
  Design design;
  Eigen::MatrixXd row;     // g x pa, x_i^(a)
  Eigen::MatrixXd col;     // h x pb, x_j^(b)
  Eigen::MatrixXd inter;   // gh x pab, x_ij^(ab)
  Eigen::MatrixXd within;  // n x pw, x_ijk^(w)
  std::vector<std::string> row_names, col_names, inter_names, within_names;

  CovariateSet() = default;
  explicit CovariateSet(const Design& d);  // no covariates

  CovariateDims dims() const;
  std::vector<std::string> names() const;  // stacked order
  // Stacked covariate vector of observation (i, j, k), 0-based.
  Eigen::VectorXd at(int i, int j, int k) const;
};

struct DeclaredCovariate {
  std::string name;
  Level level;
  Grid values;
};

// Splits declared columns into the four blocks, checking that each column is
// constant below its declared level. Throws LevelViolation.
CovariateSet classify_covariates(const Design& design,
                                 const std::vector<DeclaredCovariate>& covariates);

// Worst deviation of x from its own `level` means.
double level_deviation(const Grid& x, Level level);

// Constancy tolerance used by classify_covariates.
double constancy_tolerance(const Grid& x);

// Orthogonal split x = mean + row + col + inter + within.
struct Decomposition {
  double mean = 0.0;
  Eigen::VectorXd row;     // g:   xbar_i. - xbar
  Eigen::VectorXd col;     // h:   xbar_.j - xbar
  Eigen::VectorXd inter;   // gh:  xbar_ij - xbar_i. - xbar_.j + xbar
  Eigen::VectorXd within;  // n:   x_ijk - xbar_ij
};

Decomposition decompose_covariate(const Grid& x);

// Broadcast a level-wise vector back onto the grid.
Grid expand(const Eigen::VectorXd& values, Level level, const Design& design);

// The four parts as declarations named <name>_row, <name>_col, <name>_inter, <name>_within.
std::vector<DeclaredCovariate> decomposed_declarations(const std::string& name, const Grid& x);

}  // namespace crossfit
