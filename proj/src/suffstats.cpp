#include "crossfit/suffstats.hpp"

#include "crossfit/errors.hpp"

namespace crossfit {

std::array<double, kStrata> stratum_sizes(const Design& d) {
  const double g = d.g, h = d.h, m = d.m;
  return {1.0, m, h * m, g * m, g * h * m};
}

Eigen::MatrixXd SuffStats::stratum(Stratum s) const {
  if (s == Stratum::grand) return mean * mean.transpose();
  return ss[static_cast<int>(s)];
}

Eigen::MatrixXd SuffStats::stratum_xx(Stratum s) const {
  const int q = xi_size();
  if (s == Stratum::grand) return mean.head(q) * mean.head(q).transpose();
  return ss[static_cast<int>(s)].topLeftCorner(q, q);
}

Eigen::VectorXd SuffStats::stratum_xy(Stratum s) const {
  const int q = xi_size();
  if (s == Stratum::grand) return mean.head(q) * mean[y_index()];
  return ss[static_cast<int>(s)].col(y_index()).head(q);
}

double SuffStats::stratum_yy(Stratum s) const {
  if (s == Stratum::grand) return mean[y_index()] * mean[y_index()];
  return ss[static_cast<int>(s)](y_index(), y_index());
}

Eigen::MatrixXd SuffStats::block(Stratum s, Level r, Level c) const {
  const Eigen::MatrixXd full = stratum(s);
  return full.block(1 + dims.offset(r), 1 + dims.offset(c), dims.size(r), dims.size(c));
}

Eigen::VectorXd SuffStats::xy(Stratum s, Level r) const {
  const Eigen::MatrixXd full = stratum(s);
  return full.col(y_index()).segment(1 + dims.offset(r), dims.size(r));
}

Eigen::VectorXd SuffStats::xbar(Level level) const {
  return mean.segment(1 + dims.offset(level), dims.size(level));
}

Eigen::MatrixXd SuffStats::D(int which) const {
  const double g = design.g, h = design.h, n = static_cast<double>(design.n);
  switch (which) {
    case 1: return block(Stratum::row, Level::row, Level::row) / g;
    case 2: return block(Stratum::col, Level::col, Level::col) / h;
    case 3: return block(Stratum::cell, Level::inter, Level::inter) / (g * h);
    case 4: return block(Stratum::within, Level::within, Level::within) / n;
    default: throw Error("D block index must be 1..4");
  }
}

double SuffStats::y_variance() const {
  const auto a = stratum_sizes(design);
  double total = 0.0;
  for (int s = 0; s < 4; ++s) total += a[s] * ss[s](y_index(), y_index());
  return total / static_cast<double>(design.n - 1);
}

SuffStats compress(const ModelData& data) {
  const Design& d = data.design;
  const CovariateSet& cov = data.covariates;
  if (!(cov.design == d) || !(data.y.design == d)) {
    throw DimensionMismatch("model data", static_cast<std::size_t>(d.n),
                            static_cast<std::size_t>(data.y.values.size()));
  }
  SuffStats st;
  st.design = d;
  st.dims = cov.dims();
  const CovariateDims& dims = st.dims;
  const int q = st.augmented_size();
  const int yi = st.y_index();
  for (auto& s : st.ss) s = Eigen::MatrixXd::Zero(q, q);

  const Eigen::Index cells = static_cast<Eigen::Index>(d.g) * d.h;
  Eigen::MatrixXd cell_z(cells, q);
  Eigen::MatrixXd z(d.m, q);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      const Eigen::Index first = d.index(i, j, 0);
      z.col(0).setOnes();
      for (int c = 0; c < dims.pa; ++c) z.col(1 + dims.offset(Level::row) + c).setConstant(cov.row(i, c));
      for (int c = 0; c < dims.pb; ++c) z.col(1 + dims.offset(Level::col) + c).setConstant(cov.col(j, c));
      for (int c = 0; c < dims.pab; ++c) {
        z.col(1 + dims.offset(Level::inter) + c).setConstant(cov.inter(d.cell(i, j), c));
      }
      if (dims.pw > 0) {
        z.middleCols(1 + dims.offset(Level::within), dims.pw) = cov.within.middleRows(first, d.m);
      }
      z.col(yi) = data.y.values.segment(first, d.m);

      const Eigen::RowVectorXd cm = z.colwise().mean();
      cell_z.row(d.cell(i, j)) = cm;
      z.rowwise() -= cm;
      st.ss[static_cast<int>(Stratum::within)].noalias() += z.transpose() * z;
    }
  }

  Eigen::MatrixXd row_z = Eigen::MatrixXd::Zero(d.g, q);
  Eigen::MatrixXd col_z = Eigen::MatrixXd::Zero(d.h, q);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      row_z.row(i) += cell_z.row(d.cell(i, j));
      col_z.row(j) += cell_z.row(d.cell(i, j));
    }
  }
  row_z /= d.h;
  col_z /= d.g;
  const Eigen::RowVectorXd grand = row_z.colwise().mean();
  st.mean = grand.transpose();
  st.mean[0] = 1.0;

  Eigen::MatrixXd rc = row_z.rowwise() - grand;
  Eigen::MatrixXd cc = col_z.rowwise() - grand;
  rc.col(0).setZero();
  cc.col(0).setZero();
  st.ss[static_cast<int>(Stratum::row)].noalias() = rc.transpose() * rc;
  st.ss[static_cast<int>(Stratum::col)].noalias() = cc.transpose() * cc;

  Eigen::MatrixXd ic(cells, q);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      ic.row(d.cell(i, j)) = cell_z.row(d.cell(i, j)) - row_z.row(i) - col_z.row(j) + grand;
    }
  }
  ic.col(0).setZero();
  st.ss[static_cast<int>(Stratum::cell)].noalias() = ic.transpose() * ic;
  st.ss[static_cast<int>(Stratum::within)].row(0).setZero();
  st.ss[static_cast<int>(Stratum::within)].col(0).setZero();

  st.cell_means = cell_z.rightCols(q - 1);
  st.row_means = row_z.rightCols(q - 1);
  st.col_means = col_z.rightCols(q - 1);
  return st;
}

}  // namespace crossfit
