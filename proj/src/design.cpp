#include "crossfit/design.hpp"

#include "crossfit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crossfit {

Design::Design(int g_, int h_, int m_) : g(g_), h(h_), m(m_) {
  if (g < 2 || h < 2 || m < 1) {
    throw DataError("design needs g >= 2, h >= 2 and m >= 1 (got g=" + std::to_string(g) +
                    ", h=" + std::to_string(h) + ", m=" + std::to_string(m) + ")");
  }
  n = static_cast<Eigen::Index>(g) * h * m;
}

Grid::Grid(const Design& d, Eigen::VectorXd v) : design(d), values(std::move(v)) {
  if (values.size() != design.n) {
    throw DimensionMismatch("grid values", static_cast<std::size_t>(design.n),
                            static_cast<std::size_t>(values.size()));
  }
}

GridAverages averages(const Grid& x) {
  const Design& d = x.design;
  GridAverages a;
  a.cell = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.g) * d.h);
  a.row = Eigen::VectorXd::Zero(d.g);
  a.col = Eigen::VectorXd::Zero(d.h);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      a.cell[d.cell(i, j)] = x.values.segment(d.index(i, j, 0), d.m).mean();
    }
  }
  for (int i = 0; i < d.g; ++i) {
    a.row[i] = a.cell.segment(static_cast<Eigen::Index>(i) * d.h, d.h).mean();
  }
  for (int j = 0; j < d.h; ++j) {
    double s = 0.0;
    for (int i = 0; i < d.g; ++i) s += a.cell[d.cell(i, j)];
    a.col[j] = s / d.g;
  }
  a.grand = a.row.mean();
  return a;
}

const std::vector<double>& RawTable::column(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("no column named '" + name + "'");
  return columns[static_cast<std::size_t>(it - names.begin())];
}

Design validate_design(const RawTable& table) {
  const std::size_t rows = table.rows();
  if (rows == 0) throw EmptyData();
  if (table.i.size() != rows || table.j.size() != rows || table.k.size() != rows) {
    throw DataError("index columns and response have different lengths");
  }
  int g = 0, h = 0, m = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (table.i[r] < 1 || table.j[r] < 1 || table.k[r] < 1) {
      throw DataError("indices must be positive (row " + std::to_string(r + 1) + ")");
    }
    if (!std::isfinite(table.y[r])) throw DataError("row " + std::to_string(r + 1) + ": y is not finite");
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (!std::isfinite(table.columns[c][r]))
        throw DataError("row " + std::to_string(r + 1) + ": column '" + table.names[c] + "' is not finite");
    }
    g = std::max(g, table.i[r]);
    h = std::max(h, table.j[r]);
    m = std::max(m, table.k[r]);
  }
  const auto cells = static_cast<std::size_t>(g) * h * m;
  if (cells > 4 * rows + 16) {
    // Sparse index ranges would otherwise allocate a huge occupancy map.
    throw DataError("index ranges imply " + std::to_string(cells) + " cells for " +
                    std::to_string(rows) + " rows; the design is not balanced");
  }
  std::vector<unsigned char> seen(cells, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto at = (static_cast<std::size_t>(table.i[r] - 1) * h + (table.j[r] - 1)) * m +
                    (table.k[r] - 1);
    if (seen[at]) throw DuplicateCell(table.i[r], table.j[r], table.k[r]);
    seen[at] = 1;
  }
  for (std::size_t at = 0; at < cells; ++at) {
    if (!seen[at]) {
      const int k = static_cast<int>(at % m);
      const int j = static_cast<int>((at / m) % h);
      const int i = static_cast<int>(at / (static_cast<std::size_t>(m) * h));
      throw MissingCell(i + 1, j + 1, k + 1);
    }
  }
  return Design(g, h, m);
}

std::vector<std::size_t> grid_order(const RawTable& table, const Design& design) {
  std::vector<std::size_t> order(static_cast<std::size_t>(design.n),
                                 std::numeric_limits<std::size_t>::max());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    order[static_cast<std::size_t>(design.index(table.i[r] - 1, table.j[r] - 1, table.k[r] - 1))] =
        r;
  }
  return order;
}

Grid to_grid(const std::vector<double>& column, const std::vector<std::size_t>& order,
             const Design& design) {
  Grid out(design);
  for (Eigen::Index t = 0; t < design.n; ++t) out.values[t] = column[order[static_cast<std::size_t>(t)]];
  return out;
}

}  // namespace crossfit
