#include "crossfit/covariates.hpp"

#include "crossfit/errors.hpp"

#include <algorithm>
#include <cmath>

namespace crossfit {

const char* to_string(Level level) {
  switch (level) {
    case Level::row: return "row";
    case Level::col: return "col";
    case Level::inter: return "inter";
    case Level::within: return "within";
  }
  return "?";
}

int CovariateDims::size(Level level) const {
  switch (level) {
    case Level::row: return pa;
    case Level::col: return pb;
    case Level::inter: return pab;
    case Level::within: return pw;
  }
  return 0;
}

int CovariateDims::offset(Level level) const {
  switch (level) {
    case Level::row: return 0;
    case Level::col: return pa;
    case Level::inter: return pa + pb;
    case Level::within: return pa + pb + pab;
  }
  return 0;
}

CovariateSet::CovariateSet(const Design& d)
    : design(d),
      row(d.g, 0),
      col(d.h, 0),
      inter(static_cast<Eigen::Index>(d.g) * d.h, 0),
      within(d.n, 0) {}

CovariateDims CovariateSet::dims() const {
  return {static_cast<int>(row.cols()), static_cast<int>(col.cols()),
          static_cast<int>(inter.cols()), static_cast<int>(within.cols())};
}

std::vector<std::string> CovariateSet::names() const {
  std::vector<std::string> out;
  for (const auto* block : {&row_names, &col_names, &inter_names, &within_names}) {
    out.insert(out.end(), block->begin(), block->end());
  }
  return out;
}

Eigen::VectorXd CovariateSet::at(int i, int j, int k) const {
  const CovariateDims d = dims();
  Eigen::VectorXd x(d.p());
  x.segment(d.offset(Level::row), d.pa) = row.row(i).transpose();
  x.segment(d.offset(Level::col), d.pb) = col.row(j).transpose();
  x.segment(d.offset(Level::inter), d.pab) = inter.row(design.cell(i, j)).transpose();
  x.segment(d.offset(Level::within), d.pw) = within.row(design.index(i, j, k)).transpose();
  return x;
}

namespace {

Eigen::VectorXd level_values(const Grid& x, Level level) {
  const GridAverages a = averages(x);
  switch (level) {
    case Level::row: return a.row;
    case Level::col: return a.col;
    case Level::inter: return a.cell;
    case Level::within: return x.values;
  }
  return {};
}

double standard_deviation(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

}  // namespace

Grid expand(const Eigen::VectorXd& values, Level level, const Design& d) {
  Grid out(d);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      for (int k = 0; k < d.m; ++k) {
        double v = 0.0;
        switch (level) {
          case Level::row: v = values[i]; break;
          case Level::col: v = values[j]; break;
          case Level::inter: v = values[d.cell(i, j)]; break;
          case Level::within: v = values[d.index(i, j, k)]; break;
        }
        out(i, j, k) = v;
      }
    }
  }
  return out;
}

double level_deviation(const Grid& x, Level level) {
  if (level == Level::within) return 0.0;
  const Grid fitted = expand(level_values(x, level), level, x.design);
  return (x.values - fitted.values).cwiseAbs().maxCoeff();
}

double constancy_tolerance(const Grid& x) {
  return 1e-9 * std::max(1.0, standard_deviation(x.values));
}

CovariateSet classify_covariates(const Design& design,
                                 const std::vector<DeclaredCovariate>& covariates) {
  std::vector<const DeclaredCovariate*> by_level[4];
  for (const auto& c : covariates) {
    if (!(c.values.design == design)) {
      throw DimensionMismatch("covariate '" + c.name + "'", static_cast<std::size_t>(design.n),
                              static_cast<std::size_t>(c.values.values.size()));
    }
    const double dev = level_deviation(c.values, c.level);
    if (dev > constancy_tolerance(c.values)) throw LevelViolation(c.name, dev);
    by_level[static_cast<int>(c.level)].push_back(&c);
  }

  CovariateSet set(design);
  auto fill = [&](Level level, Eigen::MatrixXd& block, std::vector<std::string>& names) {
    const auto& list = by_level[static_cast<int>(level)];
    if (list.empty()) return;
    const Eigen::VectorXd first = level_values(list.front()->values, level);
    block.resize(first.size(), static_cast<Eigen::Index>(list.size()));
    for (std::size_t q = 0; q < list.size(); ++q) {
      block.col(static_cast<Eigen::Index>(q)) = level_values(list[q]->values, level);
      names.push_back(list[q]->name);
    }
  };
  fill(Level::row, set.row, set.row_names);
  fill(Level::col, set.col, set.col_names);
  fill(Level::inter, set.inter, set.inter_names);
  fill(Level::within, set.within, set.within_names);
  return set;
}

Decomposition decompose_covariate(const Grid& x) {
  const Design& d = x.design;
  const GridAverages a = averages(x);
  Decomposition out;
  out.mean = a.grand;
  out.row = a.row.array() - a.grand;
  out.col = a.col.array() - a.grand;
  out.inter.resize(a.cell.size());
  out.within.resize(d.n);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      const double cell = a.cell[d.cell(i, j)];
      out.inter[d.cell(i, j)] = cell - a.row[i] - a.col[j] + a.grand;
      for (int k = 0; k < d.m; ++k) out.within[d.index(i, j, k)] = x(i, j, k) - cell;
    }
  }
  return out;
}

std::vector<DeclaredCovariate> decomposed_declarations(const std::string& name, const Grid& x) {
  const Design& d = x.design;
  const Decomposition parts = decompose_covariate(x);
  return {
      {name + "_row", Level::row, expand(parts.row, Level::row, d)},
      {name + "_col", Level::col, expand(parts.col, Level::col, d)},
      {name + "_inter", Level::inter, expand(parts.inter, Level::inter, d)},
      {name + "_within", Level::within, Grid(d, parts.within)},
  };
}

}  // namespace crossfit
