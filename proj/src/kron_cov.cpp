#include "crossfit/kron_cov.hpp"

#include "crossfit/errors.hpp"

#include <cmath>

namespace crossfit {

double VarianceComponents::operator[](int t) const {
  switch (t) {
    case 0: return sigma_alpha2;
    case 1: return sigma_beta2;
    case 2: return sigma_gamma2;
    default: return sigma_e2;
  }
}

double& VarianceComponents::operator[](int t) {
  switch (t) {
    case 0: return sigma_alpha2;
    case 1: return sigma_beta2;
    case 2: return sigma_gamma2;
    default: return sigma_e2;
  }
}

std::array<double, kStrata> lambda_multiplicities(const Design& d) {
  const double g = d.g, h = d.h, m = d.m;
  return {g * h * (m - 1), (g - 1) * (h - 1), g - 1, h - 1, 1.0};
}

Eigen::Matrix<double, kStrata, 4> lambda_jacobian(const Design& d) {
  const double g = d.g, h = d.h, m = d.m;
  Eigen::Matrix<double, kStrata, 4> J;
  //      alpha   beta    gamma  e
  J << 0.0,     0.0,    0.0,   1.0,
       0.0,     0.0,    m,     1.0,
       h * m,   0.0,    m,     1.0,
       0.0,     g * m,  m,     1.0,
       h * m,   g * m,  m,     1.0;
  return J;
}

Lambdas lambdas_from(const VarianceComponents& theta, const Design& d) {
  const double hm = static_cast<double>(d.h) * d.m;
  const double gm = static_cast<double>(d.g) * d.m;
  Lambdas out;
  out.value[0] = theta.sigma_e2;
  out.value[1] = theta.sigma_e2 + d.m * theta.sigma_gamma2;
  out.value[2] = out.value[1] + hm * theta.sigma_alpha2;
  out.value[3] = out.value[1] + gm * theta.sigma_beta2;
  out.value[4] = out.value[1] + hm * theta.sigma_alpha2 + gm * theta.sigma_beta2;
  for (int s = 0; s < kStrata; ++s) {
    if (!(out.value[s] > 0.0)) throw NonPositiveLambda(s, out.value[s]);
  }
  out.mult = lambda_multiplicities(d);
  return out;
}

double logdet_v(const Lambdas& lambdas) {
  double total = 0.0;
  for (int s = 0; s < kStrata; ++s) {
    if (!(lambdas.value[s] > 0.0)) throw NonPositiveLambda(s, lambdas.value[s]);
    if (lambdas.mult[s] > 0.0) total += lambdas.mult[s] * std::log(lambdas.value[s]);
  }
  return total;
}

std::array<double, kStrata> stratum_sums(const Grid& r) {
  const Design& d = r.design;
  const GridAverages a = averages(r);
  std::array<double, kStrata> sums{};
  for (int i = 0; i < d.g; ++i) {
    for (int j = 0; j < d.h; ++j) {
      const double cell = a.cell[d.cell(i, j)];
      for (int k = 0; k < d.m; ++k) {
        const double w = r(i, j, k) - cell;
        sums[0] += w * w;
      }
      const double c = cell - a.row[i] - a.col[j] + a.grand;
      sums[1] += c * c;
    }
  }
  sums[2] = (a.row.array() - a.grand).square().sum();
  sums[3] = (a.col.array() - a.grand).square().sum();
  sums[4] = a.grand * a.grand;
  return sums;
}

double quad_form(const Lambdas& lambdas, const Design& d,
                 const std::array<double, kStrata>& sums) {
  const auto size = stratum_sizes(d);
  double total = 0.0;
  for (int s = 0; s < kStrata; ++s) total += size[s] * sums[s] / lambdas.value[s];
  return total;
}

double quad_form(const Lambdas& lambdas, const Grid& r) {
  return quad_form(lambdas, r.design, stratum_sums(r));
}

Grid vinv_apply(const Lambdas& lambdas, const Grid& v) {
  const Design& d = v.design;
  const GridAverages a = averages(v);
  const auto& l = lambdas.value;
  Grid out(d);
  for (int i = 0; i < d.g; ++i) {
    const double row = a.row[i] - a.grand;
    for (int j = 0; j < d.h; ++j) {
      const double cell = a.cell[d.cell(i, j)];
      const double col = a.col[j] - a.grand;
      const double inter = cell - a.row[i] - a.col[j] + a.grand;
      const double shared = inter / l[1] + row / l[2] + col / l[3] + a.grand / l[4];
      for (int k = 0; k < d.m; ++k) out(i, j, k) = (v(i, j, k) - cell) / l[0] + shared;
    }
  }
  return out;
}

Eigen::VectorXd vinv_apply(const Lambdas& lambdas, const Design& design, const Eigen::VectorXd& v) {
  if (v.size() != design.n) {
    throw DimensionMismatch("vinv_apply", static_cast<std::size_t>(design.n),
                            static_cast<std::size_t>(v.size()));
  }
  return vinv_apply(lambdas, Grid(design, v)).values;
}

Eigen::MatrixXd dense_v(const VarianceComponents& theta, const Design& d) {
  if (d.n > 4096) throw TooLargeForDenseOracle(static_cast<std::size_t>(d.n));
  auto ones = [](int a) { return Eigen::MatrixXd::Ones(a, a); };
  auto eye = [](int a) { return Eigen::MatrixXd::Identity(a, a); };
  auto kron3 = [](const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C) {
    Eigen::MatrixXd AB(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      for (Eigen::Index c = 0; c < A.cols(); ++c)
        AB.block(r * B.rows(), c * B.cols(), B.rows(), B.cols()) = A(r, c) * B;
    Eigen::MatrixXd out(AB.rows() * C.rows(), AB.cols() * C.cols());
    for (Eigen::Index r = 0; r < AB.rows(); ++r)
      for (Eigen::Index c = 0; c < AB.cols(); ++c)
        out.block(r * C.rows(), c * C.cols(), C.rows(), C.cols()) = AB(r, c) * C;
    return out;
  };
  return theta.sigma_alpha2 * kron3(eye(d.g), ones(d.h), ones(d.m)) +
         theta.sigma_beta2 * kron3(ones(d.g), eye(d.h), ones(d.m)) +
         theta.sigma_gamma2 * kron3(eye(d.g), eye(d.h), ones(d.m)) +
         theta.sigma_e2 * kron3(eye(d.g), eye(d.h), eye(d.m));
}

}  // namespace crossfit
