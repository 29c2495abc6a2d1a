#include "helpers.hpp"

#include "crossfit/errors.hpp"

using namespace crossfit;
using namespace crossfit::testing;

namespace {

struct Fitted {
  SimDataset ds;
  SuffStats st;
  FitResult fit;
  MomentEstimates mo;
  CovarianceEstimate cov;
};

Fitted fit_sim(const SimConfig& c, std::uint64_t r) {
  Fitted f{simulate_dataset(c, r), {}, {}, {}, {}};
  f.st = compress(f.ds.data);
  FitOptions opt;
  opt.method = c.method;
  f.fit = fit(f.st, opt);
  f.mo = residual_moments(residuals(f.ds.data, f.fit.params.xi));
  f.cov = fhat(f.fit, f.mo, f.st, f.fit.at_boundary());
  return f;
}

}  // namespace

TEST(Moments, ZeroResiduals) {
  const MomentEstimates mo = residual_moments(Grid(Design(3, 4, 2)));
  EXPECT_EQ(mo.mu3_alpha, 0.0);
  EXPECT_EQ(mo.mu4_alpha, 0.0);
  EXPECT_EQ(mo.mu3_beta, 0.0);
  EXPECT_EQ(mo.mu4_beta, 0.0);
  EXPECT_EQ(mo.mu4_gamma, 0.0);
  EXPECT_EQ(mo.mu4_e, 0.0);
}

TEST(Moments, HandcraftedTwoByTwoByTwo) {
  const Design d(2, 2, 2);
  Grid r(d);
  const double v[8] = {1.0, 3.0, -2.0, 0.5, 4.0, 2.0, -1.0, -3.5};
  for (int t = 0; t < 8; ++t) r.values[t] = v[t];
  // Direct evaluation with cells (k fastest): c00={1,3} c01={-2,.5} c10={4,2} c11={-1,-3.5}.
  const double c00 = 2.0, c01 = -0.75, c10 = 3.0, c11 = -2.25;
  const double r0 = (c00 + c01) / 2, r1 = (c10 + c11) / 2;
  const double k0 = (c00 + c10) / 2, k1 = (c01 + c11) / 2;
  const double gr = (c00 + c01 + c10 + c11) / 4;
  auto p3 = [](double x) { return x * x * x; };
  auto p4 = [](double x) { return x * x * x * x; };
  const MomentEstimates mo = residual_moments(r);
  EXPECT_NEAR(mo.mu3_alpha, (p3(r0 - gr) + p3(r1 - gr)) / 2, 1e-12);
  EXPECT_NEAR(mo.mu4_alpha, (p4(r0 - gr) + p4(r1 - gr)) / 2, 1e-12);
  EXPECT_NEAR(mo.mu3_beta, (p3(k0 - gr) + p3(k1 - gr)) / 2, 1e-12);
  EXPECT_NEAR(mo.mu4_beta, (p4(k0 - gr) + p4(k1 - gr)) / 2, 1e-12);
  const double g4 = p4(c00 - r0 - k0 + gr) + p4(c01 - r0 - k1 + gr) + p4(c10 - r1 - k0 + gr) +
                    p4(c11 - r1 - k1 + gr);
  EXPECT_NEAR(mo.mu4_gamma, g4 / 4, 1e-12);
  const double e4 = p4(1 - c00) + p4(3 - c00) + p4(-2 - c01) + p4(0.5 - c01) + p4(4 - c10) +
                    p4(2 - c10) + p4(-1 - c11) + p4(-3.5 - c11);
  EXPECT_NEAR(mo.mu4_e, e4 / 8, 1e-12);
}

TEST(Moments, SymmetricLawHasNoSkewness) {
  const Design d(10, 10, 3);
  std::normal_distribution<double> z;
  double sum = 0.0, sum2 = 0.0;
  const int reps = 500;
  for (int rep = 0; rep < reps; ++rep) {
    std::mt19937_64 rng = replicate_stream(404, rep);
    Grid r(d);
    Eigen::VectorXd a(d.g);
    for (auto& v : a) v = 3.0 * z(rng);
    for (int i = 0; i < d.g; ++i)
      for (int j = 0; j < d.h; ++j)
        for (int k = 0; k < d.m; ++k) r(i, j, k) = a[i] + z(rng);
    const double m3 = residual_moments(r).mu3_alpha;
    sum += m3;
    sum2 += m3 * m3;
  }
  const double mean = sum / reps;
  const double mc_se = std::sqrt((sum2 / reps - mean * mean) / reps);
  EXPECT_LT(std::abs(mean), 3.0 * mc_se);
}

TEST(Fhat, CenteredCovariatesReduceToTau) {
  const Fitted f = fit_sim(SimConfig{}, 2);
  ASSERT_FALSE(f.fit.at_boundary());
  EXPECT_LT(f.st.xbar(Level::row).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(f.cov.f1, f.cov.tau, 1e-10 * f.cov.tau);
  const OmegaLayout lay(f.st.dims);
  EXPECT_NEAR(f.cov.F(0, 1), 0.0, 1e-10);
  EXPECT_NEAR(f.cov.F(0, lay.xi[2]), 0.0, 1e-10);
  EXPECT_DOUBLE_EQ(f.cov.F(0, lay.theta[1]), std::sqrt(f.st.design.eta()) * f.mo.mu3_beta);
  EXPECT_DOUBLE_EQ(f.cov.F(0, lay.theta[0]), f.mo.mu3_alpha);
}

TEST(Fhat, ZeroBlocksAreExactlyZero) {
  SimConfig c;
  c.g = 8;
  c.h = 12;
  const Fitted f = fit_sim(c, 0);
  const OmegaLayout lay(f.st.dims);
  // Block membership: 0 = (a), 1 = (b), 2 = (ab), 3 = (w); xi0 couples to (a) and (b).
  std::vector<int> block(lay.size, -1);
  block[0] = -1;
  block[lay.xi[1]] = 0;
  block[lay.theta[0]] = 0;
  block[lay.xi[2]] = 1;
  block[lay.theta[1]] = 1;
  block[lay.xi[3]] = 2;
  block[lay.theta[2]] = 2;
  block[lay.xi[4]] = 3;
  block[lay.theta[3]] = 3;
  for (int r = 0; r < lay.size; ++r)
    for (int s = 0; s < lay.size; ++s) {
      if (r == s) continue;
      const int other = r == 0 ? s : r;
      const bool allowed = (r == 0 || s == 0) && (block[other] == 0 || block[other] == 1);
      if (!allowed) EXPECT_EQ(f.cov.F(r, s), 0.0) << r << "," << s;
    }
  for (int r = 0; r < lay.size; ++r) EXPECT_NE(f.cov.F(r, r), 0.0);
}

TEST(Fhat, BoundaryFitThrowsUnlessAllowed) {
  Fitted f = fit_sim(SimConfig{}, 0);
  f.fit.boundary[2] = true;
  EXPECT_THROW(fhat(f.fit, f.mo, f.st), BoundaryInference);
  const CovarianceEstimate cov = fhat(f.fit, f.mo, f.st, true);
  const CiTable ci = confidence_intervals(f.fit, cov, omega_names(f.ds.data.covariates));
  const OmegaLayout lay(f.st.dims);
  EXPECT_FALSE(ci.rows[lay.theta[2]].defined);
  EXPECT_FALSE(ci.rows[lay.theta[2]].covers(36.0));
  EXPECT_TRUE(ci.rows[lay.theta[3]].defined);
}

TEST(Intervals, NormalCriticalValue) {
  EXPECT_NEAR(normal_critical(0.05), 1.959964, 1e-6);
  EXPECT_NEAR(normal_critical(0.10), 1.644854, 1e-6);
  EXPECT_THROW(normal_critical(0.0), ConfigError);
}

TEST(Intervals, WithinSlopeWidth) {
  const CovariateDims dims{0, 0, 0, 1};
  const Design d(10, 10, 10);
  FitResult fit;
  fit.design = d;
  Eigen::VectorXd xi(2);
  xi << 0.0, 4.0;
  fit.params = ParamVector(dims, xi, {9, 49, 36, 81});
  CovarianceEstimate cov;
  const OmegaLayout lay(dims);
  cov.K = k_diagonal(d, dims);
  cov.F = Eigen::MatrixXd::Identity(lay.size, lay.size);
  const int w = lay.xi[1];
  cov.F(w, w) = 81.0;  // sigma_e^2 times d* = 1
  cov.se = (cov.F.diagonal().array() / cov.K.array()).sqrt();
  const CiTable ci = confidence_intervals(fit, cov, omega_names(dims), 0.05);
  const CiRow& row = ci.rows[w];
  EXPECT_EQ(row.rate, "n");
  EXPECT_NEAR(row.upper - row.lower, 1.116, 5e-4);
  EXPECT_NEAR(row.upper - row.lower, 2 * 1.959963985 * 9 / std::sqrt(1000.0), 1e-8);
}

TEST(Intervals, VarianceEndpointsAreLogSymmetric) {
  const Fitted f = fit_sim(SimConfig{}, 4);
  const CiTable ci = confidence_intervals(f.fit, f.cov, omega_names(f.ds.data.covariates));
  int seen = 0;
  for (const CiRow& row : ci.rows) {
    if (!row.variance || !row.defined) continue;
    ++seen;
    EXPECT_NEAR(row.sigma_lower * row.sigma_upper, row.estimate, 1e-10 * row.estimate);
    EXPECT_NEAR(row.lower, row.sigma_lower * row.sigma_lower, 1e-12 * row.upper);
    EXPECT_NEAR(row.upper, row.sigma_upper * row.sigma_upper, 1e-12 * row.upper);
    EXPECT_LT(row.lower, row.estimate);
    EXPECT_GT(row.upper, row.estimate);
    EXPECT_DOUBLE_EQ(row.table_length(), row.sigma_upper - row.sigma_lower);
  }
  EXPECT_EQ(seen, 4);
}

TEST(Intervals, NonPositiveExcessIsUndefined) {
  Fitted f = fit_sim(SimConfig{}, 4);
  const OmegaLayout lay(f.st.dims);
  f.cov.F(lay.theta[3], lay.theta[3]) = -1.0;
  const CiTable ci = confidence_intervals(f.fit, f.cov, omega_names(f.ds.data.covariates));
  const CiRow& row = ci.rows[lay.theta[3]];
  EXPECT_FALSE(row.defined);
  EXPECT_TRUE(std::isnan(row.lower));
  EXPECT_TRUE(std::isnan(row.table_length()));
  EXPECT_FALSE(row.covers(81.0));
}

TEST(Intervals, StandardErrorsAreScaleEquivariant) {
  SimDataset ds = simulate_dataset(SimConfig{}, 6);
  auto ses = [](const ModelData& data) {
    const SuffStats st = compress(data);
    const FitResult res = fit_reml(st);
    return fhat(res, residual_moments(residuals(data, res.params.xi)), st).se;
  };
  const Eigen::VectorXd base = ses(ds.data);
  const double s = 3.0;
  ds.data.y.values *= s;
  const Eigen::VectorXd scaled = ses(ds.data);
  const OmegaLayout lay(ds.data.covariates.dims());
  std::vector<bool> variance(lay.size, false);
  for (int t : lay.theta) variance[t] = true;
  for (int r = 0; r < lay.size; ++r) {
    const double factor = variance[r] ? s * s : s;
    EXPECT_NEAR(scaled[r] / (factor * base[r]), 1.0, 1e-8) << "entry " << r;
  }
}

namespace {

InfluenceInputs sample_inputs(double eta) {
  InfluenceInputs in;
  in.dims = {1, 1, 1, 1};
  in.theta = {9, 49, 36, 81};
  in.D1 = Eigen::MatrixXd::Constant(1, 1, 1.3);
  in.D2 = Eigen::MatrixXd::Constant(1, 1, 2.1);
  in.D3 = Eigen::MatrixXd::Constant(1, 1, 3.7);
  in.D4 = Eigen::MatrixXd::Constant(1, 1, 8.9);
  in.xbar_a = Eigen::VectorXd::Constant(1, 0.6);
  in.xbar_b = Eigen::VectorXd::Zero(1);
  in.eta = eta;
  return in;
}

InfluencePoint sample_point(double alpha, double beta, double gamma, double e) {
  InfluencePoint p;
  p.alpha = alpha;
  p.beta = beta;
  p.gamma = gamma;
  p.e = e;
  p.xa = Eigen::VectorXd::Constant(1, 1.4);
  p.xb = Eigen::VectorXd::Constant(1, -0.8);
  p.xab_c = Eigen::VectorXd::Constant(1, 0.35);
  p.xw_c = Eigen::VectorXd::Constant(1, -1.25);
  return p;
}

}  // namespace

TEST(Influence, ZeroEffectsGiveMinusVariances) {
  const InfluenceInputs in = sample_inputs(1.0);
  const Eigen::VectorXd v = influence(in, sample_point(0, 0, 0, 0));
  const OmegaLayout lay(in.dims);
  for (int c : lay.xi) EXPECT_EQ(v[c], 0.0);
  EXPECT_EQ(v[lay.theta[0]], -9.0);
  EXPECT_EQ(v[lay.theta[1]], -49.0);
  EXPECT_EQ(v[lay.theta[2]], -36.0);
  EXPECT_EQ(v[lay.theta[3]], -81.0);
}

TEST(Influence, WithinSlopeIsLinearInError) {
  const InfluenceInputs in = sample_inputs(0.7);
  const OmegaLayout lay(in.dims);
  const int w = lay.xi[4];
  const double one = influence(in, sample_point(0.3, -1.1, 0.4, 1.5))[w];
  const double two = influence(in, sample_point(0.3, -1.1, 0.4, 3.0))[w];
  EXPECT_NE(one, 0.0);
  EXPECT_NEAR(two, 2.0 * one, 1e-14);
  EXPECT_NEAR(one, -1.25 * 1.5 / 8.9, 1e-14);
}

TEST(Influence, SmallEtaMatchesSimplifiedForm) {
  const InfluenceInputs in = sample_inputs(1e-8);
  for (const auto& p : {sample_point(1.2, -0.7, 0.5, 2.0), sample_point(-2.0, 1.5, -0.3, 0.1)}) {
    const Eigen::VectorXd a = influence(in, p), b = influence_eta0(in, p);
    for (Eigen::Index c = 0; c < a.size(); ++c) EXPECT_NEAR(a[c], b[c], 1e-6) << "entry " << c;
  }
}
