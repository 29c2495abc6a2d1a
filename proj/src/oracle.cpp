#include "crossfit/oracle.hpp"

#include "crossfit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace crossfit::oracle {

namespace {

void guard(Eigen::Index n) {
  if (n > 4096) throw TooLargeForDenseOracle(static_cast<std::size_t>(n));
}

double max_abs(const Eigen::MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Eigen::MatrixXd dense_X(const ModelData& data) {
  const Design& d = data.design;
  guard(d.n);
  const CovariateDims dims = data.covariates.dims();
  Eigen::MatrixXd X(d.n, dims.p() + 1);
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.h; ++j)
      for (int k = 0; k < d.m; ++k) {
        const Eigen::Index r = d.index(i, j, k);
        X(r, 0) = 1.0;
        X.row(r).tail(dims.p()) = data.covariates.at(i, j, k).transpose();
      }
  return X;
}

Eigen::MatrixXd dense_Z(const Design& d, int which) {
  guard(d.n);
  if (which == 0) return Eigen::MatrixXd::Identity(d.n, d.n);
  const Eigen::Index cols = which == 1 ? d.g : which == 2 ? d.h : static_cast<Eigen::Index>(d.g) * d.h;
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(d.n, cols);
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.h; ++j)
      for (int k = 0; k < d.m; ++k) {
        const Eigen::Index c = which == 1 ? i : which == 2 ? j : d.cell(i, j);
        Z(d.index(i, j, k), c) = 1.0;
      }
  return Z;
}

DenseModel dense_model(const ModelData& data, const VarianceComponents& theta) {
  return {dense_X(data), dense_v(theta, data.design), data.y.values};
}

double dense_logdet(const Eigen::MatrixXd& V) {
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success) throw Error("dense covariance is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double dense_quad(const Eigen::MatrixXd& V, const Eigen::VectorXd& r) {
  return r.dot(V.llt().solve(r));
}

double dense_loglik(const DenseModel& m, const Eigen::VectorXd& xi) {
  const double n = static_cast<double>(m.y.size());
  const Eigen::VectorXd r = m.y - m.X * xi;
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * dense_logdet(m.V) -
         0.5 * dense_quad(m.V, r);
}

Eigen::VectorXd dense_gls(const DenseModel& m) {
  const Eigen::LLT<Eigen::MatrixXd> llt(m.V);
  const Eigen::MatrixXd ViX = llt.solve(m.X);
  const Eigen::MatrixXd M = m.X.transpose() * ViX;
  return M.ldlt().solve(ViX.transpose() * m.y);
}

AdjustmentTraces dense_traces(const DenseModel& m, const Design& d) {
  const Eigen::LLT<Eigen::MatrixXd> llt(m.V);
  const Eigen::MatrixXd ViX = llt.solve(m.X);
  const Eigen::MatrixXd M = m.X.transpose() * ViX;
  const auto Mf = M.ldlt();
  double t[4];
  const int which[4] = {1, 2, 3, 0};
  for (int c = 0; c < 4; ++c) {
    const Eigen::MatrixXd Z = dense_Z(d, which[c]);
    const Eigen::MatrixXd ZtViX = Z.transpose() * ViX;
    t[c] = 0.5 * Mf.solve(ZtViX.transpose() * ZtViX).trace();
  }
  return {t[0], t[1], t[2], t[3]};
}

ScoreVector dense_score(const ModelData& data, const ParamVector& params) {
  const Design& d = data.design;
  const DenseModel m = dense_model(data, params.theta);
  const Eigen::LLT<Eigen::MatrixXd> llt(m.V);
  const Eigen::VectorXd Vir = llt.solve(m.y - m.X * params.xi);
  const Eigen::VectorXd lxi = m.X.transpose() * Vir;
  const Eigen::MatrixXd Vi = llt.solve(Eigen::MatrixXd::Identity(d.n, d.n));
  const int which[4] = {1, 2, 3, 0};
  const OmegaLayout lay(params.dims);
  ScoreVector out{params.dims, Eigen::VectorXd(lay.size)};
  for (int c = 0; c < lxi.size(); ++c) out.values[lay.xi[c]] = lxi[c];
  for (int c = 0; c < 4; ++c) {
    const Eigen::MatrixXd Z = dense_Z(d, which[c]);
    const Eigen::VectorXd zr = Z.transpose() * Vir;
    const double tr = (Z.transpose() * Vi * Z).trace();
    out.values[lay.theta[c]] = -0.5 * tr + 0.5 * zr.squaredNorm();
  }
  return out;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd grad(x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double h = std::max(std::abs(x[c]), 1.0) * rel_step;
    Eigen::VectorXd up = x, down = x;
    up[c] += h;
    down[c] -= h;
    const double fu = f(up), fd = f(down);
    if (!std::isfinite(fu) || !std::isfinite(fd)) throw NonFiniteEvaluation();
    grad[c] = (fu - fd) / (2.0 * h);
  }
  return grad;
}

SuffStats naive_suffstats(const ModelData& data) {
  const Design& d = data.design;
  const CovariateDims dims = data.covariates.dims();
  const int q = dims.p() + 2;
  // z_ijk = [1, x_ijk, y_ijk]
  auto z = [&](int i, int j, int k) {
    Eigen::VectorXd v(q);
    v[0] = 1.0;
    v.segment(1, dims.p()) = data.covariates.at(i, j, k);
    v[q - 1] = data.y(i, j, k);
    return v;
  };
  Eigen::MatrixXd cell = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.g) * d.h, q);
  Eigen::MatrixXd row = Eigen::MatrixXd::Zero(d.g, q);
  Eigen::MatrixXd col = Eigen::MatrixXd::Zero(d.h, q);
  Eigen::VectorXd grand = Eigen::VectorXd::Zero(q);
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.h; ++j)
      for (int k = 0; k < d.m; ++k) {
        const Eigen::VectorXd v = z(i, j, k);
        cell.row(d.cell(i, j)) += v.transpose() / d.m;
        row.row(i) += v.transpose() / (static_cast<double>(d.h) * d.m);
        col.row(j) += v.transpose() / (static_cast<double>(d.g) * d.m);
        grand += v / static_cast<double>(d.n);
      }

  SuffStats st;
  st.design = d;
  st.dims = dims;
  for (auto& s : st.ss) s = Eigen::MatrixXd::Zero(q, q);
  for (int a = 1; a < q; ++a) {
    for (int b = 1; b < q; ++b) {
      double w = 0.0, c = 0.0, r = 0.0, cc = 0.0;
      for (int i = 0; i < d.g; ++i)
        for (int j = 0; j < d.h; ++j) {
          const Eigen::Index ij = d.cell(i, j);
          for (int k = 0; k < d.m; ++k) {
            const Eigen::VectorXd v = z(i, j, k);
            w += (v[a] - cell(ij, a)) * (v[b] - cell(ij, b));
          }
          c += (cell(ij, a) - row(i, a) - col(j, a) + grand[a]) *
               (cell(ij, b) - row(i, b) - col(j, b) + grand[b]);
        }
      for (int i = 0; i < d.g; ++i) r += (row(i, a) - grand[a]) * (row(i, b) - grand[b]);
      for (int j = 0; j < d.h; ++j) cc += (col(j, a) - grand[a]) * (col(j, b) - grand[b]);
      st.ss[0](a, b) = w;
      st.ss[1](a, b) = c;
      st.ss[2](a, b) = r;
      st.ss[3](a, b) = cc;
    }
  }
  st.mean = grand;
  st.mean[0] = 1.0;
  st.cell_means = cell.rightCols(q - 1);
  st.row_means = row.rightCols(q - 1);
  st.col_means = col.rightCols(q - 1);
  return st;
}

ModelData random_instance(const Design& d, const CovariateDims& dims, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  auto fill = [&](Eigen::Index rows, int cols, double shift) {
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out(r, c) = shift + (1.0 + 0.5 * c) * z(rng);
    return out;
  };
  CovariateSet cov(d);
  cov.row = fill(d.g, dims.pa, 1.0);
  cov.col = fill(d.h, dims.pb, -0.5);
  cov.inter = fill(static_cast<Eigen::Index>(d.g) * d.h, dims.pab, 0.3);
  cov.within = fill(d.n, dims.pw, 2.0);
  for (int c = 0; c < dims.pa; ++c) cov.row_names.push_back("a" + std::to_string(c + 1));
  for (int c = 0; c < dims.pb; ++c) cov.col_names.push_back("b" + std::to_string(c + 1));
  for (int c = 0; c < dims.pab; ++c) cov.inter_names.push_back("ab" + std::to_string(c + 1));
  for (int c = 0; c < dims.pw; ++c) cov.within_names.push_back("w" + std::to_string(c + 1));

  Eigen::VectorXd alpha(d.g), beta(d.h), gamma(static_cast<Eigen::Index>(d.g) * d.h);
  for (auto& v : alpha) v = 1.5 * z(rng);
  for (auto& v : beta) v = 1.2 * z(rng);
  for (auto& v : gamma) v = 0.8 * z(rng);
  Grid y(d);
  for (int i = 0; i < d.g; ++i)
    for (int j = 0; j < d.h; ++j)
      for (int k = 0; k < d.m; ++k) {
        double v = 1.0 + alpha[i] + beta[j] + gamma[d.cell(i, j)] + z(rng);
        const Eigen::VectorXd x = cov.at(i, j, k);
        for (Eigen::Index c = 0; c < x.size(); ++c) v += 0.5 * (c + 1) * x[c];
        y(i, j, k) = v;
      }
  return {d, cov, y};
}

VarianceComponents random_theta(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.3, 2.5);
  VarianceComponents t;
  t.sigma_alpha2 = u(rng);
  t.sigma_beta2 = u(rng);
  t.sigma_gamma2 = u(rng);
  t.sigma_e2 = u(rng);
  return t;
}

ParamVector random_params(const CovariateDims& dims, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd xi(dims.p() + 1);
  for (auto& v : xi) v = z(rng);
  return {dims, xi, random_theta(rng)};
}

double spectrum_error(const VarianceComponents& theta, const Design& d) {
  const Eigen::MatrixXd V = dense_v(theta, d);
  Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(V).eigenvalues();
  const Lambdas lam = lambdas_from(theta, d);
  std::vector<double> expect;
  for (int s = 0; s < kStrata; ++s) {
    for (int c = 0; c < static_cast<int>(lam.mult[s]); ++c) expect.push_back(lam.value[s]);
  }
  std::sort(expect.begin(), expect.end());
  if (static_cast<Eigen::Index>(expect.size()) != ev.size()) return std::numeric_limits<double>::infinity();
  double err = 0.0;
  for (Eigen::Index c = 0; c < ev.size(); ++c) err = std::max(err, std::abs(ev[c] - expect[c]));
  return err;
}

std::vector<CheckResult> run_validation(const ValidationOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const CovariateDims dims{1, 1, 1, 1};
  const double tol = 1e-8;
  constexpr double kMaxCondition = 1e6;
  const char* names[] = {"suffstats", "vinv_apply", "logdet_v", "quad_form", "gls_solve",
                         "adjustment_traces", "loglik", "score"};
  constexpr int kChecks = 8;
  double err[kChecks] = {};

  for (int g : {2, 3})
    for (int h : {2, 3})
      for (int m : {2, 3}) {
        const Design d(g, h, m);
        for (int r = 0; r < opt.instances; ++r) {
          ModelData data = random_instance(d, dims, rng);
          ParamVector params = random_params(dims, rng);
          // Near-collinear draws (two almost equal row values at g = 2, say) make every
          // GLS solver lose digits; they say nothing about the structured formulas.
          while (1.0 / normal_equations(lambdas_from(params.theta, d), compress(data)).ldlt.rcond() >
                 kMaxCondition) {
            data = random_instance(d, dims, rng);
            params = random_params(dims, rng);
          }
          const SuffStats st = compress(data);
          const SuffStats naive = naive_suffstats(data);
          for (int s = 0; s < 4; ++s) err[0] = std::max(err[0], max_abs(st.ss[s] - naive.ss[s]));
          err[0] = std::max(err[0], max_abs(st.mean - naive.mean));

          const Lambdas lam = opt.lambdas(params.theta, d);
          const DenseModel dm = dense_model(data, params.theta);
          Eigen::VectorXd v(d.n);
          for (auto& x : v) x = z(rng);
          err[1] = std::max(err[1], max_abs(vinv_apply(lam, d, v) - dm.V.llt().solve(v)));
          err[2] = std::max(err[2], std::abs(logdet_v(lam) - dense_logdet(dm.V)));
          err[3] = std::max(err[3], std::abs(quad_form(lam, Grid(d, v)) - dense_quad(dm.V, v)));

          const NormalEquations ne = normal_equations(lam, st);
          err[4] = std::max(err[4], max_abs(ne.ldlt.solve(ne.b) - dense_gls(dm)));
          err[5] = std::max(err[5], max_abs(adjustment_traces(lam, ne, st).vector() -
                                            dense_traces(dm, d).vector()));
          const StratumMoments mom = stratum_moments(st, params.xi);
          err[6] = std::max(err[6], std::abs(loglik(mom, lam, d) - dense_loglik(dm, params.xi)));
          err[7] = std::max(err[7], max_abs(score(mom, lam, d, dims).values -
                                            dense_score(data, params).values));
        }
      }

  std::vector<CheckResult> out;
  for (int c = 0; c < kChecks; ++c) {
    const bool ok = std::isfinite(err[c]) && err[c] <= tol;
    out.push_back({names[c], err[c], tol, ok});
  }
  double spec = 0.0;
  for (int g : {2, 3, 4})
    for (int h : {2, 3, 4})
      for (int m : {2, 3, 4}) {
        const Design d(g, h, m);
        spec = std::max(spec, spectrum_error(random_theta(rng), d));
      }
  out.push_back({"spectrum", spec, tol, std::isfinite(spec) && spec <= tol});
  return out;
}

}  // namespace crossfit::oracle
