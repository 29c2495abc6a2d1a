#include "crossfit/fit.hpp"

#include "crossfit/reml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace crossfit {

const char* to_string(Method method) { return method == Method::ml ? "ml" : "reml"; }

Method parse_method(const std::string& text) {
  if (text == "ml") return Method::ml;
  if (text == "reml") return Method::reml;
  throw ConfigError("unknown method '" + text + "' (expected ml or reml)");
}

NoConvergence::NoConvergence(FitResult best_iterate)
    : Error("solver did not converge in " + std::to_string(best_iterate.iterations) +
            " iterations (score norm " + std::to_string(best_iterate.score_norm) + ")"),
      best(std::move(best_iterate)) {}

namespace {

struct Evaluation {
  VarianceComponents theta;
  Eigen::VectorXd xi;
  ScoreVector score;
  double loglik = 0.0;
  double reml = 0.0;
  double objective = 0.0;
};

Evaluation evaluate(const VarianceComponents& theta, const SuffStats& st, Method method) {
  const Lambdas lam = lambdas_from(theta, st.design);
  const NormalEquations ne = normal_equations(lam, st);
  Evaluation ev;
  ev.theta = theta;
  ev.xi = ne.ldlt.solve(ne.b);
  const StratumMoments mom = stratum_moments(st, ev.xi);
  ev.loglik = loglik(mom, lam, st.design);
  ev.reml = ev.loglik - 0.5 * log_det_normal(ne);
  ev.score = score(mom, lam, st.design, st.dims);
  if (method == Method::reml) {
    const Eigen::Vector4d t = adjustment_traces(lam, ne, st).vector();
    const OmegaLayout lay(st.dims);
    for (int c = 0; c < 4; ++c) ev.score.values[lay.theta[c]] += t[c];
    ev.objective = ev.reml;
  } else {
    ev.objective = ev.loglik;
  }
  if (!std::isfinite(ev.objective) || !ev.score.values.allFinite()) throw NonFiniteEvaluation();
  return ev;
}

std::optional<Evaluation> try_evaluate(const VarianceComponents& theta, const SuffStats& st,
                                       Method method) {
  try {
    return evaluate(theta, st, method);
  } catch (const NonPositiveLambda&) {
  } catch (const SingularDesign&) {
  } catch (const NonFiniteEvaluation&) {
  }
  return std::nullopt;
}

// Score norm with the components held at the floor (active set) left out.
double kkt_norm(const Evaluation& ev, const Design& d, const std::array<bool, 4>& active) {
  ScoreVector s = ev.score;
  const OmegaLayout lay(s.dims);
  for (int c = 0; c < 4; ++c) {
    if (active[c]) s.values[lay.theta[c]] = 0.0;
  }
  return s.normalized_max(d);
}

}  // namespace

VarianceComponents anova_start(const SuffStats& st, double floor) {
  const Design& d = st.design;
  VarianceComponents ols;
  const Eigen::VectorXd xi = gls_solve(ols, st);
  const StratumMoments mom = stratum_moments(st, xi);
  const auto size = stratum_sizes(d);
  const auto mult = lambda_multiplicities(d);
  double lam[4];
  for (int s = 0; s < 4; ++s) lam[s] = size[s] * mom.q[s] / mult[s];
  VarianceComponents start;
  start.sigma_e2 = std::max(lam[0], floor);
  start.sigma_gamma2 = std::max((lam[1] - lam[0]) / d.m, floor);
  start.sigma_alpha2 = std::max((lam[2] - lam[1]) / (static_cast<double>(d.h) * d.m), floor);
  start.sigma_beta2 = std::max((lam[3] - lam[1]) / (static_cast<double>(d.g) * d.m), floor);
  return start;
}

FitResult fit(const SuffStats& st, const FitOptions& opt) {
  const Design& d = st.design;
  if (d.m < 2) {
    throw NotIdentifiable(
        "m = 1 leaves sigma_gamma^2 and sigma_e^2 confounded; at least two replicates per cell "
        "are required");
  }
  const double var_y = st.y_variance();
  const double floor = opt.floor_rel * (var_y > 0.0 ? var_y : 1.0);
  const double fd_scale = 1e-3 * (var_y > 0.0 ? var_y : 1.0);

  Evaluation cur = evaluate(anova_start(st, floor), st, opt.method);
  FitResult res;
  res.method = opt.method;
  res.design = d;
  res.floor = floor;

  auto active_set = [&](const Evaluation& ev) {
    std::array<bool, 4> act{};
    const Eigen::Vector4d g = ev.score.theta_block();
    for (int c = 0; c < 4; ++c) act[c] = ev.theta[c] <= floor * (1.0 + 1e-9) && g[c] < 0.0;
    return act;
  };

  auto finish = [&](const Evaluation& ev, int iters, double norm, double step, bool ok) {
    res.params = ParamVector(st.dims, ev.xi, ev.theta);
    res.score = ev.score;
    res.loglik = ev.loglik;
    res.reml_criterion = ev.reml;
    res.iterations = iters;
    res.score_norm = norm;
    res.last_step = step;
    res.converged = ok;
    for (int c = 0; c < 4; ++c) res.boundary[c] = ev.theta[c] <= floor * (1.0 + 1e-9);
  };

  double last_step = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    const std::array<bool, 4> active = active_set(cur);
    const double norm = kkt_norm(cur, d, active);
    if (norm < opt.score_tol && last_step < opt.step_tol) {
      finish(cur, iter - 1, norm, last_step, true);
      return res;
    }

    // Jacobian of the variance score by central differences.
    const Eigen::Vector4d g0 = cur.score.theta_block();
    Eigen::Matrix4d H;
    for (int c = 0; c < 4; ++c) {
      const double h = std::max(std::abs(cur.theta[c]), fd_scale) * opt.fd_rel;
      VarianceComponents up = cur.theta, down = cur.theta;
      up[c] += h;
      down[c] -= h;
      const Eigen::Vector4d gu = evaluate(up, st, opt.method).score.theta_block();
      if (auto dn = try_evaluate(down, st, opt.method); dn && down[c] > 0.0) {
        H.col(c) = (gu - dn->score.theta_block()) / (2.0 * h);
      } else {
        H.col(c) = (gu - g0) / h;
      }
    }
    H = 0.5 * (H + H.transpose()).eval();

    std::vector<int> free;
    for (int c = 0; c < 4; ++c) {
      if (!active[c]) free.push_back(c);
    }
    Eigen::Vector4d dir = Eigen::Vector4d::Zero();
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd Hf(nf, nf);
      Eigen::VectorXd gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf[a] = g0[free[a]];
        for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(free[a], free[b]);
      }
      // Flip and floor the curvature so the step is an ascent direction.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hf);
      Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
      const double cap = std::max(ev.maxCoeff(), std::numeric_limits<double>::min()) * 1e-12;
      ev = ev.cwiseMax(cap);
      const Eigen::VectorXd df =
          es.eigenvectors() * (es.eigenvectors().transpose() * gf).cwiseQuotient(ev);
      for (Eigen::Index a = 0; a < nf; ++a) dir[free[a]] = df[a];
    }

    const double slack = 1e-13 * std::max(1.0, std::abs(cur.objective));
    double scale = 1.0;
    int halvings = 0;
    std::optional<Evaluation> next;
    for (; halvings <= opt.max_halvings; ++halvings, scale *= 0.5) {
      VarianceComponents cand = cur.theta;
      for (int c = 0; c < 4; ++c) cand[c] = std::max(cur.theta[c] + scale * dir[c], floor);
      auto ev = try_evaluate(cand, st, opt.method);
      if (ev && ev->objective >= cur.objective - slack) {
        next = std::move(ev);
        break;
      }
    }

    double step = 0.0;
    if (next) {
      for (int c = 0; c < 4; ++c) {
        step = std::max(step, std::abs(next->theta[c] - cur.theta[c]) /
                                  std::max(std::abs(cur.theta[c]), floor));
      }
      cur = std::move(*next);
    }
    last_step = step;
    const double new_norm = kkt_norm(cur, d, active_set(cur));
    res.trace.push_back({iter, cur.objective, new_norm, step, halvings});
    if (!next && new_norm >= opt.score_tol) {
      // No acceptable step: report the best iterate.
      finish(cur, iter, new_norm, step, false);
      throw NoConvergence(res);
    }
  }
  const std::array<bool, 4> active = active_set(cur);
  const double norm = kkt_norm(cur, d, active);
  const bool ok = norm < opt.score_tol && last_step < opt.step_tol;
  finish(cur, opt.max_iter, norm, last_step, ok);
  if (!ok) throw NoConvergence(res);
  return res;
}

FitResult fit_ml(const SuffStats& stats, FitOptions options) {
  options.method = Method::ml;
  return fit(stats, options);
}

FitResult fit_reml(const SuffStats& stats, FitOptions options) {
  options.method = Method::reml;
  return fit(stats, options);
}

}  // namespace crossfit
