#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace crossfit {

// Balanced g x h x m layout. Internal storage orders k fastest, then j, then i.
struct Design {
  int g = 0;
  int h = 0;
  int m = 0;
  Eigen::Index n = 0;

  Design() = default;
  Design(int g, int h, int m);

  // 0-based (i, j, k) -> flat offset.
  Eigen::Index index(int i, int j, int k) const {
    return (static_cast<Eigen::Index>(i) * h + j) * m + k;
  }
  Eigen::Index cell(int i, int j) const { return static_cast<Eigen::Index>(i) * h + j; }
  double eta() const { return static_cast<double>(g) / h; }

  friend bool operator==(const Design&, const Design&) = default;
};

// A response or covariate laid out on the full grid.
struct Grid {
  Design design;
  Eigen::VectorXd values;

  Grid() = default;
  explicit Grid(const Design& d) : design(d), values(Eigen::VectorXd::Zero(d.n)) {}
  Grid(const Design& d, Eigen::VectorXd v);

  double operator()(int i, int j, int k) const { return values[design.index(i, j, k)]; }
  double& operator()(int i, int j, int k) { return values[design.index(i, j, k)]; }
};

// Level-wise means of a grid variable.
struct GridAverages {
  Eigen::VectorXd cell;  // gh, index i*h + j
  Eigen::VectorXd row;   // g
  Eigen::VectorXd col;   // h
  double grand = 0.0;
};

GridAverages averages(const Grid& x);

// Indexed observations as read from a file. Indices are 1-based.
struct RawTable {
  std::vector<int> i, j, k;
  std::vector<double> y;
  std::vector<std::string> names;             // covariate column names
  std::vector<std::vector<double>> columns;   // one entry per name, same length as y

  std::size_t rows() const { return y.size(); }
  const std::vector<double>& column(const std::string& name) const;
};

// Checks balance and returns the implied design.
// Throws EmptyData, MissingCell, DuplicateCell, or DataError.
Design validate_design(const RawTable& table);

// order[flat grid offset] = row of `table` holding that observation.
std::vector<std::size_t> grid_order(const RawTable& table, const Design& design);

Grid to_grid(const std::vector<double>& column, const std::vector<std::size_t>& order,
             const Design& design);

}  // namespace crossfit
