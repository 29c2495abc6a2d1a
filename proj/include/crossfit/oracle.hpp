#pragma once

// Dense brute-force reference implementations. Only meant for tiny designs.

#include "crossfit/model.hpp"
#include "crossfit/reml.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace crossfit::oracle {

struct DenseModel {
  Eigen::MatrixXd X;  // n x (p + 1), columns in xi order
  Eigen::MatrixXd V;  // n x n
  Eigen::VectorXd y;
};

Eigen::MatrixXd dense_X(const ModelData& data);
// Z_0 = I, Z_1 = I_g (x) 1_h (x) 1_m, Z_2 = 1_g (x) I_h (x) 1_m, Z_3 = I_g (x) I_h (x) 1_m.
Eigen::MatrixXd dense_Z(const Design& design, int which);
DenseModel dense_model(const ModelData& data, const VarianceComponents& theta);

double dense_logdet(const Eigen::MatrixXd& V);
double dense_quad(const Eigen::MatrixXd& V, const Eigen::VectorXd& r);
double dense_loglik(const DenseModel& model, const Eigen::VectorXd& xi);
Eigen::VectorXd dense_gls(const DenseModel& model);
AdjustmentTraces dense_traces(const DenseModel& model, const Design& design);
// psi(omega) straight from y, X and V.
ScoreVector dense_score(const ModelData& data, const ParamVector& params);

// Central differences with per-coordinate step max(|x_c|, 1) * rel_step.
// Throws NonFiniteEvaluation.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double rel_step = 1e-6);

// Appendix-style statistics computed with explicit loops over the grid.
SuffStats naive_suffstats(const ModelData& data);

// Random tiny instance with the requested covariate dimensions.
ModelData random_instance(const Design& design, const CovariateDims& dims, std::mt19937_64& rng);
VarianceComponents random_theta(std::mt19937_64& rng);
ParamVector random_params(const CovariateDims& dims, std::mt19937_64& rng);

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct ValidationOptions {
  std::uint64_t seed = 1;
  int instances = 20;
  // Spectrum used by the structured side; tests swap in a broken one as a negative control.
  std::function<Lambdas(const VarianceComponents&, const Design&)> lambdas = lambdas_from;
};

// Structured-vs-dense suite over g, h, m in {2, 3}.
std::vector<CheckResult> run_validation(const ValidationOptions& options = {});

// Max deviation of the sorted dense spectrum from the predicted lambdas and multiplicities.
double spectrum_error(const VarianceComponents& theta, const Design& design);

}  // namespace crossfit::oracle
