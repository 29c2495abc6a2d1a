#include "helpers.hpp"

using namespace crossfit;
using namespace crossfit::testing;

TEST(Traces, MatchDense) {
  std::mt19937_64 rng(1);
  for (const Design& d : tiny_designs()) {
    for (int rep = 0; rep < 3; ++rep) {
      const ModelData data = oracle::random_instance(d, {1, 1, 1, 1}, rng);
      const VarianceComponents th = oracle::random_theta(rng);
      const Eigen::Vector4d a = adjustment_traces(th, compress(data)).vector();
      const Eigen::Vector4d b = oracle::dense_traces(oracle::dense_model(data, th), d).vector();
      EXPECT_LT(max_abs_diff(a, b), 1e-9);
    }
  }
}

TEST(Traces, InterceptOnlyErrorTrace) {
  std::mt19937_64 rng(2);
  const Design d(4, 3, 5);
  const ModelData data = oracle::random_instance(d, {0, 0, 0, 0}, rng);
  const VarianceComponents th{1.3, 0.4, 2.2, 0.9};
  const Lambdas l = lambdas_from(th, d);
  EXPECT_NEAR(adjustment_traces(th, compress(data)).t_e, 1.0 / (2.0 * l.value[4]), 1e-14);
}

TEST(Traces, FiniteLimitForLargeRandomEffects) {
  std::mt19937_64 rng(3);
  const ModelData data = oracle::random_instance(Design(3, 3, 2), {1, 1, 1, 1}, rng);
  const SuffStats st = compress(data);
  Eigen::Vector4d prev = Eigen::Vector4d::Zero();
  double prev_change = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 7; ++k) {
    const double big = std::pow(10.0, k);
    const Eigen::Vector4d t = adjustment_traces({big, big, big, 1.0}, st).vector();
    ASSERT_TRUE(t.allFinite());
    if (k > 1) {
      const double change = (t.head<3>() - prev.head<3>()).cwiseAbs().maxCoeff();
      EXPECT_LT(change, prev_change);
      prev_change = change;
    }
    prev = t;
  }
  EXPECT_LT(prev_change, 1e-4);
}

TEST(RemlScore, DiffersFromScoreOnlyByTraces) {
  std::mt19937_64 rng(4);
  const ModelData data = oracle::random_instance(Design(3, 2, 3), {1, 1, 1, 1}, rng);
  const SuffStats st = compress(data);
  const ParamVector p = oracle::random_params(st.dims, rng);
  const Eigen::VectorXd diff = reml_score(p, st).values - score(p, st).values;
  const OmegaLayout lay(st.dims);
  for (int c : lay.xi) EXPECT_EQ(diff[c], 0.0);
  const Eigen::Vector4d t = adjustment_traces(p.theta, st).vector();
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(diff[lay.theta[k]], t[k], 1e-12);
}

// The variance entries are the derivative of l - 1/2 log|X'V^-1X| at fixed xi, so the
// adjustment enters with a plus sign.
TEST(RemlScore, VarianceEntriesMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const ModelData data = oracle::random_instance(tiny_designs()[rep % 8], {1, 1, 1, 1}, rng);
    const SuffStats st = compress(data);
    const ParamVector p = oracle::random_params(st.dims, rng);
    auto la = [&](const Eigen::VectorXd& th) {
      const VarianceComponents v = VarianceComponents::from(th);
      const Lambdas l = lambdas_from(v, st.design);
      return loglik(ParamVector(st.dims, p.xi, v), st) -
             0.5 * log_det_normal(normal_equations(l, st));
    };
    const Eigen::VectorXd fd = oracle::fd_gradient(la, p.theta.vector(), 1e-6);
    const Eigen::Vector4d s = reml_score(p, st).theta_block();
    for (int k = 0; k < 4; ++k) EXPECT_LE(std::abs(fd[k] - s[k]), 1e-5 * std::max(1.0, std::abs(s[k])));
  }
}

TEST(RemlScore, NormalizedAdjustmentShrinksWithDesign) {
  std::vector<double> worst;
  for (int gh : {10, 20, 40}) {
    SimConfig c;
    c.g = c.h = gh;
    c.m = 5;
    const SimDataset ds = simulate_dataset(c, 0);
    const SuffStats st = compress(ds.data);
    const Eigen::Vector4d t = adjustment_traces(ds.truth.theta, st).vector();
    const Eigen::VectorXd K = k_diagonal(st.design, st.dims);
    const OmegaLayout lay(st.dims);
    double w = 0.0;
    for (int k = 0; k < 4; ++k) w = std::max(w, std::abs(t[k]) / std::sqrt(K[lay.theta[k]]));
    worst.push_back(w);
  }
  EXPECT_GT(worst[0], worst[1]);
  EXPECT_GT(worst[1], worst[2]);
}

TEST(RemlCriterion, EqualsProfileLoglikMinusHalfLogDet) {
  std::mt19937_64 rng(6);
  const ModelData data = oracle::random_instance(Design(3, 3, 2), {1, 1, 1, 1}, rng);
  const SuffStats st = compress(data);
  const VarianceComponents th{0.8, 1.7, 0.4, 1.2};
  const oracle::DenseModel dm = oracle::dense_model(data, th);
  const Eigen::VectorXd xi = oracle::dense_gls(dm);
  const Eigen::MatrixXd M = dm.X.transpose() * dm.V.ldlt().solve(dm.X);
  const double expected = oracle::dense_loglik(dm, xi) - 0.5 * std::log(M.determinant());
  EXPECT_NEAR(reml_criterion(th, st), expected, 1e-8);
}

TEST(FitReml, ZeroesTheAdjustedScore) {
  SimConfig c;
  c.seed = 5;
  const SimDataset ds = simulate_dataset(c, 1);
  const SuffStats st = compress(ds.data);
  const FitResult res = fit_reml(st);
  ASSERT_TRUE(res.converged);
  ASSERT_FALSE(res.at_boundary());
  EXPECT_LE(reml_score(res.params, st).normalized_max(st.design), 1e-8);
  EXPECT_EQ(res.method, Method::reml);
  EXPECT_NEAR(res.reml_criterion, reml_criterion(res.params.theta, st), 1e-8);
}

// One-way emulation: column and interaction effects absent.
TEST(FitReml, ErrorVarianceExceedsMlOnSmallSamples) {
  std::normal_distribution<double> z;
  double diff = 0.0;
  int used = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng = replicate_stream(2718, seed);
    const Design d(4, 3, 2);
    ModelData data{d, CovariateSet(d), Grid(d)};
    std::mt19937_64 xr = replicate_stream(31, seed);
    data.covariates = oracle::random_instance(d, {1, 0, 0, 1}, xr).covariates;
    Eigen::VectorXd a(d.g);
    for (auto& v : a) v = 2.0 * z(rng);
    for (int i = 0; i < d.g; ++i)
      for (int j = 0; j < d.h; ++j)
        for (int k = 0; k < d.m; ++k) {
          const Eigen::VectorXd x = data.covariates.at(i, j, k);
          data.y(i, j, k) = 1.0 + x.sum() + a[i] + z(rng);
        }
    const SuffStats st = compress(data);
    try {
      const FitResult ml = fit_ml(st), reml = fit_reml(st);
      diff += reml.params.theta.sigma_e2 - ml.params.theta.sigma_e2;
      ++used;
    } catch (const Error&) {
    }
  }
  ASSERT_GE(used, 190);
  EXPECT_GT(diff / used, 0.0);
}

TEST(FitReml, DistanceToMlShrinksWithDesign) {
  std::vector<double> med;
  for (int gh : {10, 40}) {
    std::vector<double> dist;
    SimConfig c;
    c.g = c.h = gh;
    c.m = 5;
    c.seed = 8;
    for (int r = 0; r < 30; ++r) {
      const SimDataset ds = simulate_dataset(c, static_cast<std::uint64_t>(r));
      const SuffStats st = compress(ds.data);
      const FitResult ml = fit_ml(st), reml = fit_reml(st);
      const Eigen::VectorXd K = k_diagonal(st.design, st.dims);
      const OmegaLayout lay(st.dims);
      double w = 0.0;
      for (int k = 0; k < 4; ++k) {
        w = std::max(w, std::sqrt(K[lay.theta[k]]) *
                            std::abs(reml.params.theta[k] - ml.params.theta[k]));
      }
      dist.push_back(w);
    }
    med.push_back(median(dist));
  }
  EXPECT_GT(med[0], med[1]);
}
