#include "crossfit/model.hpp"

#include "crossfit/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace crossfit {

namespace {

constexpr Level kLevels[4] = {Level::row, Level::col, Level::inter, Level::within};

Stratum stratum_of(int s) { return static_cast<Stratum>(s); }

}  // namespace

OmegaLayout::OmegaLayout(const CovariateDims& dims) : xi(dims.p() + 1) {
  xi[0] = 0;
  int pos = 1;
  for (int l = 0; l < 4; ++l) {
    const Level level = kLevels[l];
    const int first = 1 + dims.offset(level);
    for (int c = 0; c < dims.size(level); ++c) xi[first + c] = pos++;
    theta[l] = pos++;
  }
  size = pos;
}

ParamVector::ParamVector(const CovariateDims& d, Eigen::VectorXd x, const VarianceComponents& t)
    : dims(d), xi(std::move(x)), theta(t) {
  if (xi.size() != d.p() + 1) {
    throw DimensionMismatch("xi", static_cast<std::size_t>(d.p() + 1),
                            static_cast<std::size_t>(xi.size()));
  }
}

Eigen::VectorXd ParamVector::omega() const {
  const OmegaLayout lay(dims);
  Eigen::VectorXd w(lay.size);
  for (int c = 0; c < xi.size(); ++c) w[lay.xi[c]] = xi[c];
  for (int t = 0; t < 4; ++t) w[lay.theta[t]] = theta[t];
  return w;
}

ParamVector ParamVector::from_omega(const CovariateDims& dims, const Eigen::VectorXd& w) {
  const OmegaLayout lay(dims);
  if (w.size() != lay.size) {
    throw DimensionMismatch("omega", static_cast<std::size_t>(lay.size),
                            static_cast<std::size_t>(w.size()));
  }
  Eigen::VectorXd xi(dims.p() + 1);
  VarianceComponents theta;
  for (int c = 0; c < xi.size(); ++c) xi[c] = w[lay.xi[c]];
  for (int t = 0; t < 4; ++t) theta[t] = w[lay.theta[t]];
  return {dims, xi, theta};
}

Eigen::VectorXd ParamVector::slopes(Level level) const {
  return xi.segment(1 + dims.offset(level), dims.size(level));
}

std::vector<std::string> omega_names(const CovariateSet& covariates) {
  const CovariateDims dims = covariates.dims();
  const std::vector<std::string>* labels[4] = {&covariates.row_names, &covariates.col_names,
                                               &covariates.inter_names,
                                               &covariates.within_names};
  static const char* variances[4] = {"sigma_alpha2", "sigma_beta2", "sigma_gamma2", "sigma_e2"};
  std::vector<std::string> out{"xi0"};
  for (int l = 0; l < 4; ++l) {
    for (int c = 0; c < dims.size(kLevels[l]); ++c) {
      const auto& names = *labels[l];
      const std::string label =
          static_cast<std::size_t>(c) < names.size() ? names[c] : std::to_string(c + 1);
      out.push_back("xi" + std::to_string(l + 1) + "[" + label + "]");
    }
    out.emplace_back(variances[l]);
  }
  return out;
}

std::vector<std::string> omega_names(const CovariateDims& dims) {
  Design d(2, 2, 1);
  CovariateSet empty(d);
  empty.row.resize(d.g, dims.pa);
  empty.col.resize(d.h, dims.pb);
  empty.inter.resize(4, dims.pab);
  empty.within.resize(d.n, dims.pw);
  return omega_names(empty);
}

Eigen::VectorXd k_diagonal(const Design& d, const CovariateDims& dims) {
  const double rates[4] = {static_cast<double>(d.g), static_cast<double>(d.h),
                           static_cast<double>(d.g) * d.h, static_cast<double>(d.n)};
  Eigen::VectorXd k(dims.p() + 5);
  int pos = 0;
  k[pos++] = rates[0];  // intercept
  for (int l = 0; l < 4; ++l) {
    for (int c = 0; c <= dims.size(kLevels[l]); ++c) k[pos++] = rates[l];
  }
  return k;
}

std::vector<std::string> omega_rates(const CovariateDims& dims) {
  static const char* tags[4] = {"g", "h", "gh", "n"};
  std::vector<std::string> out{"g"};
  for (int l = 0; l < 4; ++l) {
    for (int c = 0; c <= dims.size(kLevels[l]); ++c) out.emplace_back(tags[l]);
  }
  return out;
}

Eigen::VectorXd ScoreVector::xi_block() const {
  const OmegaLayout lay(dims);
  Eigen::VectorXd out(lay.xi.size());
  for (std::size_t c = 0; c < lay.xi.size(); ++c) out[static_cast<Eigen::Index>(c)] = values[lay.xi[c]];
  return out;
}

Eigen::Vector4d ScoreVector::theta_block() const {
  const OmegaLayout lay(dims);
  return {values[lay.theta[0]], values[lay.theta[1]], values[lay.theta[2]], values[lay.theta[3]]};
}

Eigen::VectorXd ScoreVector::part(Level level) const {
  switch (level) {
    case Level::row: return values.segment(0, dims.pa + 2);
    case Level::col: return values.segment(dims.pa + 2, dims.pb + 1);
    case Level::inter: return values.segment(dims.pa + dims.pb + 3, dims.pab + 1);
    case Level::within: return values.segment(dims.pa + dims.pb + dims.pab + 4, dims.pw + 1);
  }
  return {};
}

double ScoreVector::normalized_max(const Design& design) const {
  const Eigen::VectorXd k = k_diagonal(design, dims);
  return (values.array() / k.array().sqrt()).abs().maxCoeff();
}

ResidualContrasts residual_contrasts(const SuffStats& st, const Eigen::VectorXd& xi) {
  const Design& d = st.design;
  const int p = st.dims.p();
  const Eigen::VectorXd slopes = xi.tail(p);
  const Eigen::VectorXd cell = st.cell_means.col(p) - st.cell_means.leftCols(p) * slopes -
                               Eigen::VectorXd::Constant(st.cell_means.rows(), xi[0]);
  ResidualContrasts rc;
  Eigen::VectorXd row = Eigen::VectorXd::Zero(d.g), col = Eigen::VectorXd::Zero(d.h);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      row[i] += cell[d.cell(i, j)];
      col[j] += cell[d.cell(i, j)];
    }
  }
  row /= d.h;
  col /= d.g;
  rc.grand = row.mean();
  rc.row = row.array() - rc.grand;
  rc.col = col.array() - rc.grand;
  rc.inter.resize(cell.size());
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      rc.inter[d.cell(i, j)] = cell[d.cell(i, j)] - row[i] - col[j] + rc.grand;
    }
  }
  Eigen::VectorXd c(st.augmented_size());
  c.head(st.xi_size()) = -xi;
  c[st.y_index()] = 1.0;
  rc.within_ss = c.dot(st.ss[0] * c);
  return rc;
}

StratumMoments stratum_moments(const SuffStats& st, const Eigen::VectorXd& xi) {
  if (xi.size() != st.xi_size()) {
    throw DimensionMismatch("xi", static_cast<std::size_t>(st.xi_size()),
                            static_cast<std::size_t>(xi.size()));
  }
  Eigen::VectorXd c(st.augmented_size());
  c.head(st.xi_size()) = -xi;
  c[st.y_index()] = 1.0;
  StratumMoments mom;
  for (int s = 0; s < kStrata; ++s) {
    const Eigen::MatrixXd full = st.stratum(stratum_of(s));
    mom.xx[s] = full.topLeftCorner(st.xi_size(), st.xi_size());
    mom.cross[s] = full.col(st.y_index()).head(st.xi_size()) - mom.xx[s] * xi;
    mom.q[s] = c.dot(full * c);
  }
  return mom;
}

StratumMoments expected_moments(const SuffStats& st, const Eigen::VectorXd& xi,
                                const ParamVector& truth) {
  const Lambdas lt = lambdas_from(truth.theta, st.design);
  const auto size = stratum_sizes(st.design);
  const Eigen::VectorXd delta = truth.xi - xi;
  StratumMoments mom;
  for (int s = 0; s < kStrata; ++s) {
    mom.xx[s] = st.stratum_xx(stratum_of(s));
    mom.cross[s] = mom.xx[s] * delta;
    mom.q[s] = delta.dot(mom.xx[s] * delta) + lt.mult[s] * lt.value[s] / size[s];
  }
  return mom;
}

double loglik(const StratumMoments& mom, const Lambdas& lambdas, const Design& design) {
  const auto size = stratum_sizes(design);
  double quad = 0.0;
  for (int s = 0; s < kStrata; ++s) quad += size[s] * mom.q[s] / lambdas.value[s];
  const double n = static_cast<double>(design.n);
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * logdet_v(lambdas) - 0.5 * quad;
}

double loglik(const ParamVector& params, const SuffStats& stats) {
  return loglik(stratum_moments(stats, params.xi), lambdas_from(params.theta, stats.design),
                stats.design);
}

ScoreVector score(const StratumMoments& mom, const Lambdas& lambdas, const Design& design,
                  const CovariateDims& dims) {
  const auto size = stratum_sizes(design);
  const auto J = lambda_jacobian(design);
  const OmegaLayout lay(dims);
  Eigen::VectorXd lxi = Eigen::VectorXd::Zero(dims.p() + 1);
  Eigen::Vector4d lth = Eigen::Vector4d::Zero();
  for (int s = 0; s < kStrata; ++s) {
    const double lam = lambdas.value[s];
    lxi += (size[s] / lam) * mom.cross[s];
    const double ds = -lambdas.mult[s] / (2.0 * lam) + size[s] * mom.q[s] / (2.0 * lam * lam);
    lth += ds * J.row(s).transpose();
  }
  ScoreVector out{dims, Eigen::VectorXd(lay.size)};
  for (int c = 0; c < lxi.size(); ++c) out.values[lay.xi[c]] = lxi[c];
  for (int t = 0; t < 4; ++t) out.values[lay.theta[t]] = lth[t];
  return out;
}

ScoreVector score(const ParamVector& params, const SuffStats& stats) {
  return score(stratum_moments(stats, params.xi), lambdas_from(params.theta, stats.design),
               stats.design, stats.dims);
}

NormalEquations normal_equations(const Lambdas& lambdas, const SuffStats& st) {
  const auto size = stratum_sizes(st.design);
  const int q = st.xi_size();
  NormalEquations ne;
  ne.M = Eigen::MatrixXd::Zero(q, q);
  ne.b = Eigen::VectorXd::Zero(q);
  for (int s = 0; s < kStrata; ++s) {
    const double w = size[s] / lambdas.value[s];
    ne.M += w * st.stratum_xx(stratum_of(s));
    ne.b += w * st.stratum_xy(stratum_of(s));
  }
  const Eigen::VectorXd diag = ne.M.diagonal();
  if ((diag.array() <= 0.0).any()) throw SingularDesign(std::numeric_limits<double>::infinity());
  const Eigen::VectorXd scale = diag.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = scale.asDiagonal() * ne.M * scale.asDiagonal();
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(scaled).eigenvalues();
  ne.condition = ev[0] > 0.0 ? ev[ev.size() - 1] / ev[0] : std::numeric_limits<double>::infinity();
  if (!(ne.condition <= 1e12)) throw SingularDesign(ne.condition);
  ne.ldlt.compute(ne.M);
  return ne;
}

Eigen::VectorXd gls_solve(const VarianceComponents& theta, const SuffStats& stats) {
  const NormalEquations ne = normal_equations(lambdas_from(theta, stats.design), stats);
  return ne.ldlt.solve(ne.b);
}

Grid residuals(const ModelData& data, const Eigen::VectorXd& xi) {
  const Design& d = data.design;
  const CovariateSet& cov = data.covariates;
  const CovariateDims dims = cov.dims();
  if (xi.size() != dims.p() + 1) {
    throw DimensionMismatch("xi", static_cast<std::size_t>(dims.p() + 1),
                            static_cast<std::size_t>(xi.size()));
  }
  const Eigen::VectorXd ba = xi.segment(1 + dims.offset(Level::row), dims.pa);
  const Eigen::VectorXd bb = xi.segment(1 + dims.offset(Level::col), dims.pb);
  const Eigen::VectorXd bab = xi.segment(1 + dims.offset(Level::inter), dims.pab);
  const Eigen::VectorXd bw = xi.segment(1 + dims.offset(Level::within), dims.pw);
  const Eigen::VectorXd fa = cov.row * ba;
  const Eigen::VectorXd fb = cov.col * bb;
  const Eigen::VectorXd fab = cov.inter * bab;
  const Eigen::VectorXd fw = cov.within * bw;
  Grid r(d);
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      const double shared = xi[0] + fa[i] + fb[j] + fab[d.cell(i, j)];
      for (int k = 0; k < d.m; ++k) {
        const Eigen::Index at = d.index(i, j, k);
        r.values[at] = data.y.values[at] - shared - fw[at];
      }
    }
  }
  return r;
}

Eigen::MatrixXd limit_B(const ParamVector& truth, const SuffStats& st) {
  const CovariateDims& dims = st.dims;
  const OmegaLayout lay(dims);
  const VarianceComponents& th = truth.theta;
  const double eta = st.design.eta();
  const double tau = th.sigma_alpha2 + eta * th.sigma_beta2;
  const Eigen::VectorXd xa = st.xbar(Level::row);
  const Eigen::VectorXd xb = st.xbar(Level::col);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(lay.size, lay.size);

  auto pos = [&](Level level) { return lay.xi[1 + dims.offset(level)]; };
  const int a0 = 0, a1 = 1, aa = lay.theta[0];
  const int b1 = pos(Level::col), bb = lay.theta[1];
  const int ab1 = pos(Level::inter), gg = lay.theta[2];
  const int w1 = pos(Level::within), ee = lay.theta[3];
  const int pa = dims.pa, pb = dims.pb, pab = dims.pab, pw = dims.pw;

  // row block
  B(a0, a0) = 1.0 / tau;
  B.block(a0, a1, 1, pa) = xa.transpose() / tau;
  B.block(a1, a0, pa, 1) = xa / tau;
  if (pa > 0) B.block(a1, a1, pa, pa) = st.D(1) / th.sigma_alpha2 + xa * xa.transpose() / tau;
  B(aa, aa) = 1.0 / (2.0 * th.sigma_alpha2 * th.sigma_alpha2);

  // row-column coupling
  const double se = std::sqrt(eta);
  B.block(a0, b1, 1, pb) = se * xb.transpose() / tau;
  B.block(a1, b1, pa, pb) = se * xa * xb.transpose() / tau;
  B.block(b1, a0, pb, 1) = B.block(a0, b1, 1, pb).transpose();
  B.block(b1, a1, pb, pa) = B.block(a1, b1, pa, pb).transpose();

  // column block
  if (pb > 0) B.block(b1, b1, pb, pb) = st.D(2) / th.sigma_beta2 + eta * xb * xb.transpose() / tau;
  B(bb, bb) = 1.0 / (2.0 * th.sigma_beta2 * th.sigma_beta2);

  if (pab > 0) B.block(ab1, ab1, pab, pab) = st.D(3) / th.sigma_gamma2;
  B(gg, gg) = 1.0 / (2.0 * th.sigma_gamma2 * th.sigma_gamma2);

  if (pw > 0) B.block(w1, w1, pw, pw) = st.D(4) / th.sigma_e2;
  B(ee, ee) = 1.0 / (2.0 * th.sigma_e2 * th.sigma_e2);
  return B;
}

InformationMatrices expected_info_Bn(const ParamVector& truth, const SuffStats& st) {
  const Design& d = st.design;
  const CovariateDims& dims = st.dims;
  const Eigen::VectorXd w0 = truth.omega();
  const Eigen::Index q = w0.size();
  auto expected_score = [&](const Eigen::VectorXd& w) {
    const ParamVector at = ParamVector::from_omega(dims, w);
    return score(expected_moments(st, at.xi, truth), lambdas_from(at.theta, d), d, dims).values;
  };
  Eigen::MatrixXd jac(q, q);
  for (Eigen::Index c = 0; c < q; ++c) {
    const double step = 1e-5 * std::max(std::abs(w0[c]), 1.0);
    Eigen::VectorXd up = w0, down = w0;
    up[c] += step;
    down[c] -= step;
    jac.col(c) = (expected_score(up) - expected_score(down)) / (2.0 * step);
  }
  const Eigen::VectorXd ks = k_diagonal(d, dims).cwiseSqrt().cwiseInverse();
  InformationMatrices out;
  out.Bn = -(ks.asDiagonal() * jac * ks.asDiagonal());
  out.Bn = 0.5 * (out.Bn + out.Bn.transpose()).eval();
  out.B = limit_B(truth, st);
  return out;
}

}  // namespace crossfit
