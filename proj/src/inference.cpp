#include "crossfit/inference.hpp"

#include "crossfit/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>

namespace crossfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd inverse_or_empty(const Eigen::MatrixXd& D) {
  if (D.size() == 0) return D;
  return D.ldlt().solve(Eigen::MatrixXd::Identity(D.rows(), D.cols()));
}

}  // namespace

MomentEstimates residual_moments(const Grid& r) {
  const Design& d = r.design;
  const GridAverages a = averages(r);
  MomentEstimates mo;
  for (int i = 0; i < d.g; ++i) {
    const double c = a.row[i] - a.grand;
    mo.mu3_alpha += c * c * c;
    mo.mu4_alpha += c * c * c * c;
  }
  for (int j = 0; j < d.h; ++j) {
    const double c = a.col[j] - a.grand;
    mo.mu3_beta += c * c * c;
    mo.mu4_beta += c * c * c * c;
  }
  double e4 = 0.0;
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.h; ++j) {
      const double cell = a.cell[d.cell(i, j)];
      const double c = cell - a.row[i] - a.col[j] + a.grand;
      mo.mu4_gamma += c * c * c * c;
      for (int k = 0; k < d.m; ++k) {
        const double w = r(i, j, k) - cell;
        e4 += w * w * w * w;
      }
    }
  mo.mu3_alpha /= d.g;
  mo.mu4_alpha /= d.g;
  mo.mu3_beta /= d.h;
  mo.mu4_beta /= d.h;
  mo.mu4_gamma /= static_cast<double>(d.g) * d.h;
  mo.mu4_e = e4 / static_cast<double>(d.n);
  return mo;
}

CovarianceEstimate fhat(const FitResult& fit, const MomentEstimates& mo, const SuffStats& st,
                        bool allow_boundary) {
  if (fit.at_boundary() && !allow_boundary) throw BoundaryInference();
  const Design& d = st.design;
  const CovariateDims& dims = st.dims;
  const OmegaLayout lay(dims);
  const VarianceComponents& th = fit.params.theta;
  const double eta = d.eta();

  const Eigen::MatrixXd D1i = inverse_or_empty(st.D(1));
  const Eigen::MatrixXd D2i = inverse_or_empty(st.D(2));
  const Eigen::MatrixXd D3i = inverse_or_empty(st.D(3));
  const Eigen::MatrixXd D4i = inverse_or_empty(st.D(4));
  const Eigen::VectorXd xa = st.xbar(Level::row);
  const Eigen::VectorXd xb = st.xbar(Level::col);
  const Eigen::RowVectorXd f2 = dims.pa ? Eigen::RowVectorXd(xa.transpose() * D1i) : Eigen::RowVectorXd();
  const Eigen::RowVectorXd f3 = dims.pb ? Eigen::RowVectorXd(xb.transpose() * D2i) : Eigen::RowVectorXd();

  CovarianceEstimate out;
  out.tau = th.sigma_alpha2 + eta * th.sigma_beta2;
  out.f1 = out.tau;
  if (dims.pa) out.f1 += th.sigma_alpha2 * f2.dot(xa);
  if (dims.pb) out.f1 += eta * th.sigma_beta2 * f3.dot(xb);

  auto pos = [&](Level level) { return lay.xi[1 + dims.offset(level)]; };
  const int a1 = 1, aa = lay.theta[0];
  const int b1 = pos(Level::col), bb = lay.theta[1];
  const int ab1 = pos(Level::inter), gg = lay.theta[2];
  const int w1 = pos(Level::within), ee = lay.theta[3];

  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(lay.size, lay.size);
  F(0, 0) = out.f1;
  if (dims.pa) {
    F.block(0, a1, 1, dims.pa) = -th.sigma_alpha2 * f2;
    F.block(a1, 0, dims.pa, 1) = F.block(0, a1, 1, dims.pa).transpose();
    F.block(a1, a1, dims.pa, dims.pa) = th.sigma_alpha2 * D1i;
  }
  F(0, aa) = F(aa, 0) = mo.mu3_alpha;
  F(aa, aa) = mo.mu4_alpha - th.sigma_alpha2 * th.sigma_alpha2;

  const double se = std::sqrt(eta);
  if (dims.pb) {
    F.block(0, b1, 1, dims.pb) = -se * th.sigma_beta2 * f3;
    F.block(b1, 0, dims.pb, 1) = F.block(0, b1, 1, dims.pb).transpose();
    F.block(b1, b1, dims.pb, dims.pb) = th.sigma_beta2 * D2i;
  }
  F(0, bb) = F(bb, 0) = se * mo.mu3_beta;
  F(bb, bb) = mo.mu4_beta - th.sigma_beta2 * th.sigma_beta2;

  if (dims.pab) F.block(ab1, ab1, dims.pab, dims.pab) = th.sigma_gamma2 * D3i;
  F(gg, gg) = mo.mu4_gamma - th.sigma_gamma2 * th.sigma_gamma2;

  if (dims.pw) F.block(w1, w1, dims.pw, dims.pw) = th.sigma_e2 * D4i;
  F(ee, ee) = mo.mu4_e - th.sigma_e2 * th.sigma_e2;

  out.F = F;
  out.K = k_diagonal(d, dims);
  out.se.resize(lay.size);
  for (int r = 0; r < lay.size; ++r) {
    out.se[r] = F(r, r) >= 0.0 ? std::sqrt(F(r, r) / out.K[r]) : kNaN;
  }
  return out;
}

double normal_critical(double b) {
  if (!(b > 0.0 && b < 1.0)) throw ConfigError("confidence level must lie strictly in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - b / 2.0);
}

double CiRow::table_length() const {
  if (!defined) return kNaN;
  return variance ? sigma_upper - sigma_lower : upper - lower;
}

bool CiRow::covers(double truth) const { return defined && lower <= truth && truth <= upper; }

CiTable confidence_intervals(const FitResult& fit, const CovarianceEstimate& cov,
                             const std::vector<std::string>& names, double b) {
  const double z = normal_critical(b);
  const CovariateDims& dims = fit.params.dims;
  const OmegaLayout lay(dims);
  const Eigen::VectorXd est = fit.params.omega();
  const std::vector<std::string> rates = omega_rates(dims);
  CiTable table;
  table.level = 1.0 - b;
  std::vector<int> which(lay.size, -1);
  for (int c = 0; c < 4; ++c) which[lay.theta[c]] = c;

  for (int r = 0; r < lay.size; ++r) {
    CiRow row;
    row.name = static_cast<std::size_t>(r) < names.size() ? names[r] : "omega" + std::to_string(r);
    row.estimate = est[r];
    row.rate = rates[r];
    row.se = cov.se[r];
    if (which[r] < 0) {
      row.defined = std::isfinite(row.se);
      row.lower = row.defined ? est[r] - z * row.se : kNaN;
      row.upper = row.defined ? est[r] + z * row.se : kNaN;
    } else {
      row.variance = true;
      const double s2 = est[r];
      const double excess = cov.F(r, r);  // mu4 - sigma^4
      row.defined = excess > 0.0 && s2 > 0.0 && !fit.boundary[which[r]];
      if (row.defined) {
        const double sigma = std::sqrt(s2);
        const double half = z * std::sqrt(excess) / (2.0 * std::sqrt(cov.K[r]) * s2);
        row.sigma_lower = sigma * std::exp(-half);
        row.sigma_upper = sigma * std::exp(half);
        row.lower = row.sigma_lower * row.sigma_lower;
        row.upper = row.sigma_upper * row.sigma_upper;
      } else {
        row.sigma_lower = row.sigma_upper = row.lower = row.upper = kNaN;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

InfluenceInputs influence_inputs(const FitResult& fit, const SuffStats& st) {
  InfluenceInputs in;
  in.dims = st.dims;
  in.theta = fit.params.theta;
  in.D1 = st.D(1);
  in.D2 = st.D(2);
  in.D3 = st.D(3);
  in.D4 = st.D(4);
  in.xbar_a = st.xbar(Level::row);
  in.xbar_b = st.xbar(Level::col);
  in.eta = st.design.eta();
  return in;
}

Eigen::VectorXd influence(const InfluenceInputs& in, const InfluencePoint& p) {
  const CovariateDims& dims = in.dims;
  const OmegaLayout lay(dims);
  const VarianceComponents& th = in.theta;
  const double eta = in.eta;
  const double tau = th.sigma_alpha2 + eta * th.sigma_beta2;
  const Eigen::MatrixXd D1i = inverse_or_empty(in.D1), D2i = inverse_or_empty(in.D2);
  const Eigen::MatrixXd D3i = inverse_or_empty(in.D3), D4i = inverse_or_empty(in.D4);
  const Eigen::VectorXd xa_c = dims.pa ? Eigen::VectorXd(p.xa - in.xbar_a) : Eigen::VectorXd();
  const double qa = dims.pa ? in.xbar_a.dot(D1i * xa_c) : 0.0;
  const double qb = dims.pb ? in.xbar_b.dot(D2i * in.xbar_b) : 0.0;
  const double qbx = dims.pb ? in.xbar_b.dot(D2i * p.xb) : 0.0;
  const double rt = std::sqrt(eta);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.size);
  out[0] = (1.0 + th.sigma_beta2 / tau * (eta - rt) * qb) * p.alpha - qa * p.alpha +
           (eta + (rt * th.sigma_alpha2 + eta * eta * th.sigma_beta2) / tau * qb) * p.beta -
           rt * qbx * p.beta;
  auto put = [&](Level level, const Eigen::VectorXd& v) {
    for (int c = 0; c < dims.size(level); ++c) out[lay.xi[1 + dims.offset(level) + c]] = v[c];
  };
  if (dims.pa) put(Level::row, D1i * xa_c * p.alpha);
  if (dims.pb) {
    const double mix = th.sigma_beta2 / tau * (1.0 - rt) * p.alpha -
                       (th.sigma_alpha2 / tau + std::pow(eta, 1.5) * th.sigma_beta2 / tau) * p.beta;
    put(Level::col, D2i * p.xb * p.beta + D2i * in.xbar_b * mix);
  }
  if (dims.pab) put(Level::inter, D3i * p.xab_c * p.gamma);
  if (dims.pw) put(Level::within, D4i * p.xw_c * p.e);
  out[lay.theta[0]] = p.alpha * p.alpha - th.sigma_alpha2;
  out[lay.theta[1]] = p.beta * p.beta - th.sigma_beta2;
  out[lay.theta[2]] = p.gamma * p.gamma - th.sigma_gamma2;
  out[lay.theta[3]] = p.e * p.e - th.sigma_e2;
  return out;
}

Eigen::VectorXd influence_eta0(const InfluenceInputs& in, const InfluencePoint& p) {
  const CovariateDims& dims = in.dims;
  const OmegaLayout lay(dims);
  const VarianceComponents& th = in.theta;
  const Eigen::MatrixXd D1i = inverse_or_empty(in.D1), D2i = inverse_or_empty(in.D2);
  const Eigen::MatrixXd D3i = inverse_or_empty(in.D3), D4i = inverse_or_empty(in.D4);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(lay.size);
  const Eigen::VectorXd xa_c = dims.pa ? Eigen::VectorXd(p.xa - in.xbar_a) : Eigen::VectorXd();
  out[0] = (1.0 - (dims.pa ? in.xbar_a.dot(D1i * xa_c) : 0.0)) * p.alpha;
  auto put = [&](Level level, const Eigen::VectorXd& v) {
    for (int c = 0; c < dims.size(level); ++c) out[lay.xi[1 + dims.offset(level) + c]] = v[c];
  };
  if (dims.pa) put(Level::row, D1i * xa_c * p.alpha);
  if (dims.pb) put(Level::col, D2i * (p.xb - in.xbar_b) * p.beta);
  if (dims.pab) put(Level::inter, D3i * p.xab_c * p.gamma);
  if (dims.pw) put(Level::within, D4i * p.xw_c * p.e);
  out[lay.theta[0]] = p.alpha * p.alpha - th.sigma_alpha2;
  out[lay.theta[1]] = p.beta * p.beta - th.sigma_beta2;
  out[lay.theta[2]] = p.gamma * p.gamma - th.sigma_gamma2;
  out[lay.theta[3]] = p.e * p.e - th.sigma_e2;
  return out;
}

}  // namespace crossfit
