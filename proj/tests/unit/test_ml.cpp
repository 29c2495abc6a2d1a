#include "helpers.hpp"

#include "crossfit/errors.hpp"

#include <numbers>

using namespace crossfit;
using namespace crossfit::testing;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

ParamVector random_point(const ModelData& data, std::mt19937_64& rng) {
  return oracle::random_params(data.covariates.dims(), rng);
}

// y = X xi exactly.
ModelData exact_response(ModelData data, const Eigen::VectorXd& xi) {
  data.y.values = oracle::dense_X(data) * xi;
  return data;
}

}  // namespace

TEST(Loglik, IidZeroResponse) {
  const Design d(2, 2, 2);
  std::mt19937_64 rng(1);
  ModelData data = oracle::random_instance(d, {1, 1, 1, 1}, rng);
  data.y = Grid(d);
  const ParamVector p(data.covariates.dims(), Eigen::VectorXd::Zero(5), {0, 0, 0, 1});
  EXPECT_NEAR(loglik(p, compress(data)), -0.5 * 8 * kLog2Pi, 1e-12);
}

TEST(Loglik, MatchesDense) {
  std::mt19937_64 rng(2);
  int count = 0;
  for (const Design& d : tiny_designs()) {
    for (int rep = 0; rep < 3; ++rep, ++count) {
      const ModelData data = oracle::random_instance(d, {1, 1, 1, 1}, rng);
      const ParamVector p = random_point(data, rng);
      const double dense = oracle::dense_loglik(oracle::dense_model(data, p.theta), p.xi);
      EXPECT_NEAR(loglik(p, compress(data)), dense, 1e-8);
    }
  }
  EXPECT_GE(count, 20);
}

TEST(Loglik, LocationInvariance) {
  std::mt19937_64 rng(3);
  ModelData data = oracle::random_instance(Design(3, 2, 3), {1, 0, 1, 1}, rng);
  ParamVector p = random_point(data, rng);
  const double before = loglik(p, compress(data));
  data.y.values.array() += 2.75;
  p.xi[0] += 2.75;
  EXPECT_NEAR(loglik(p, compress(data)), before, 1e-10);
}

TEST(Score, MatchesCentralDifferences) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Design d = tiny_designs()[rep % 8];
    const ModelData data = oracle::random_instance(d, {1, 1, 1, 1}, rng);
    const SuffStats st = compress(data);
    const ParamVector p = random_point(data, rng);
    const CovariateDims dims = p.dims;
    const Eigen::VectorXd fd = oracle::fd_gradient(
        [&](const Eigen::VectorXd& w) { return loglik(ParamVector::from_omega(dims, w), st); },
        p.omega(), 1e-6);
    const Eigen::VectorXd s = score(p, st).values;
    for (Eigen::Index c = 0; c < s.size(); ++c) {
      EXPECT_LE(std::abs(fd[c] - s[c]), 1e-5 * std::max(1.0, std::abs(s[c])))
          << "entry " << c << " replicate " << rep;
    }
  }
}

TEST(Score, MatchesDenseScore) {
  std::mt19937_64 rng(5);
  for (const Design& d : tiny_designs()) {
    const ModelData data = oracle::random_instance(d, {1, 1, 1, 1}, rng);
    const ParamVector p = random_point(data, rng);
    EXPECT_LT(max_abs_diff(score(p, compress(data)).values, oracle::dense_score(data, p).values),
              1e-8);
  }
}

TEST(Score, XiBlockVanishesAtGls) {
  std::mt19937_64 rng(6);
  for (const Design& d : tiny_designs()) {
    const ModelData data = oracle::random_instance(d, {1, 1, 1, 1}, rng);
    const SuffStats st = compress(data);
    const VarianceComponents th = oracle::random_theta(rng);
    const ParamVector p(st.dims, gls_solve(th, st), th);
    EXPECT_LT(score(p, st).xi_block().cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Score, ZeroResidualLeavesPureTraceTerms) {
  std::mt19937_64 rng(7);
  const Design d(3, 2, 2);
  const ModelData base = oracle::random_instance(d, {1, 1, 1, 1}, rng);
  const ParamVector p = random_point(base, rng);
  const ModelData data = exact_response(base, p.xi);
  const ScoreVector s = score(p, compress(data));
  EXPECT_LT(s.xi_block().cwiseAbs().maxCoeff(), 1e-10);
  const Lambdas l = lambdas_from(p.theta, d);
  const auto J = lambda_jacobian(d);
  for (int t = 0; t < 4; ++t) {
    double expected = 0.0;
    for (int s2 = 0; s2 < kStrata; ++s2) expected -= 0.5 * J(s2, t) * l.mult[s2] / l.value[s2];
    EXPECT_NEAR(s.theta_block()[t], expected, 1e-10);
  }
}

TEST(Gls, ZeroRandomEffectsGiveOls) {
  std::mt19937_64 rng(8);
  const ModelData data = oracle::random_instance(Design(3, 3, 2), {1, 1, 1, 1}, rng);
  const Eigen::MatrixXd X = oracle::dense_X(data);
  const Eigen::VectorXd ols = (X.transpose() * X).ldlt().solve(X.transpose() * data.y.values);
  EXPECT_LT(max_abs_diff(gls_solve({0, 0, 0, 2.5}, compress(data)), ols), 1e-10);
}

TEST(Gls, MatchesDense) {
  std::mt19937_64 rng(9);
  for (const Design& d : tiny_designs()) {
    const ModelData data = oracle::random_instance(d, {1, 1, 1, 1}, rng);
    const VarianceComponents th = oracle::random_theta(rng);
    EXPECT_LT(max_abs_diff(gls_solve(th, compress(data)),
                           oracle::dense_gls(oracle::dense_model(data, th))),
              1e-8);
  }
}

TEST(Gls, ReproducesExactFit) {
  std::mt19937_64 rng(10);
  const ModelData base = oracle::random_instance(Design(3, 3, 3), {1, 1, 1, 1}, rng);
  Eigen::VectorXd xi(5);
  xi << 1.0, -2.0, 0.5, 3.0, 4.0;
  const ModelData data = exact_response(base, xi);
  EXPECT_LT(max_abs_diff(gls_solve({1, 2, 0.5, 1}, compress(data)), xi), 1e-10);
}

TEST(Gls, CollinearColumnsAreSingular) {
  std::mt19937_64 rng(11);
  ModelData data = oracle::random_instance(Design(4, 3, 2), {2, 0, 0, 0}, rng);
  data.covariates.row.col(1) = 2.0 * data.covariates.row.col(0);
  EXPECT_THROW(gls_solve({1, 1, 1, 1}, compress(data)), SingularDesign);
}

TEST(FitMl, RecoversTruthWithinFourStandardErrors) {
  SimConfig c;
  c.g = 50;
  c.h = 50;
  c.m = 10;
  c.seed = 17;
  c.method = Method::ml;
  const SimDataset ds = simulate_dataset(c, 0);
  const SuffStats st = compress(ds.data);
  const FitResult res = fit_ml(st);
  ASSERT_TRUE(res.converged);
  ASSERT_FALSE(res.at_boundary());
  const CovarianceEstimate cov =
      fhat(res, residual_moments(residuals(ds.data, res.params.xi)), st);
  const Eigen::VectorXd est = res.params.omega(), truth = ds.truth.omega();
  for (Eigen::Index r = 0; r < est.size(); ++r) {
    EXPECT_LE(std::abs(est[r] - truth[r]), 4.0 * cov.se[r]) << "omega entry " << r;
  }
}

TEST(FitMl, VarianceOnlyModelIsStationary) {
  std::mt19937_64 rng(12);
  const ModelData data = oracle::random_instance(Design(8, 7, 3), {0, 0, 0, 0}, rng);
  const SuffStats st = compress(data);
  const FitResult res = fit_ml(st);
  ASSERT_TRUE(res.converged);
  ASSERT_FALSE(res.at_boundary());
  EXPECT_LE(score(res.params, st).normalized_max(st.design), 1e-8);
  EXPECT_LE(res.score_norm, 1e-8);
}

TEST(FitMl, ZeroInteractionVarianceHitsTheFloor) {
  std::normal_distribution<double> z;
  bool seen = false;
  for (std::uint64_t seed = 1; seed <= 40 && !seen; ++seed) {
    std::mt19937_64 rng(seed);
    const Design d(6, 6, 2);
    ModelData data{d, CovariateSet(d), Grid(d)};
    Eigen::VectorXd a(d.g), b(d.h);
    for (auto& v : a) v = 2.0 * z(rng);
    for (auto& v : b) v = 2.0 * z(rng);
    for (int i = 0; i < d.g; ++i)
      for (int j = 0; j < d.h; ++j)
        for (int k = 0; k < d.m; ++k) data.y(i, j, k) = 1.0 + a[i] + b[j] + z(rng);
    const FitResult res = fit_ml(compress(data));
    if (res.boundary[2]) {
      seen = true;
      EXPECT_TRUE(res.converged);
      EXPECT_EQ(res.params.theta.sigma_gamma2, res.floor);
      EXPECT_TRUE(res.at_boundary());
    }
  }
  EXPECT_TRUE(seen) << "no boundary fit in 40 seeds";
}

TEST(FitMl, SingleObservationPerCellIsNotIdentifiable) {
  std::mt19937_64 rng(13);
  const ModelData data = oracle::random_instance(Design(4, 4, 1), {1, 1, 1, 0}, rng);
  EXPECT_THROW(fit_ml(compress(data)), NotIdentifiable);
}

TEST(FitMl, IterationCapRaisesWithBestIterate) {
  SimConfig c;
  const SimDataset ds = simulate_dataset(c, 3);
  FitOptions opt;
  opt.max_iter = 1;
  try {
    fit_ml(compress(ds.data), opt);
    FAIL() << "expected NoConvergence";
  } catch (const NoConvergence& e) {
    EXPECT_FALSE(e.best.converged);
    EXPECT_GT(e.best.params.theta.sigma_e2, 0.0);
    EXPECT_TRUE(std::isfinite(e.best.loglik));
  }
}

TEST(FitMl, AgreesWithDenseGlsAtSolution) {
  std::mt19937_64 rng(14);
  const ModelData data = oracle::random_instance(Design(6, 5, 3), {1, 1, 1, 1}, rng);
  const SuffStats st = compress(data);
  const FitResult res = fit_ml(st);
  EXPECT_LT(max_abs_diff(res.params.xi,
                         oracle::dense_gls(oracle::dense_model(data, res.params.theta))),
            1e-8);
}

TEST(InformationB, KnownEntries) {
  SimConfig c;
  c.g = 12;
  c.h = 9;
  c.m = 4;
  const SimDataset ds = simulate_dataset(c, 0);
  const SuffStats st = compress(ds.data);
  const Eigen::MatrixXd B = limit_B(ds.truth, st);
  const OmegaLayout lay(st.dims);
  const int e = lay.theta[3];
  EXPECT_NEAR(B(e, e), 1.0 / (2.0 * 81.0 * 81.0), 1e-15);
  const int ab = lay.xi[1 + st.dims.offset(Level::inter)];
  EXPECT_NEAR(B(ab, ab), st.D(3)(0, 0) / 36.0, 1e-12);
}

TEST(InformationB, FiniteSampleMatrixApproachesLimit) {
  std::vector<double> dist;
  for (int size : {4, 8, 16}) {
    SimConfig c;
    c.g = c.h = c.m = size;
    c.seed = 99;
    const SimDataset ds = simulate_dataset(c, 0);
    const InformationMatrices im = expected_info_Bn(ds.truth, compress(ds.data));
    dist.push_back((im.Bn - im.B).norm());
  }
  EXPECT_GT(dist[0], dist[1]);
  EXPECT_GT(dist[1], dist[2]);
}
