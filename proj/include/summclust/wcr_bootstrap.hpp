#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "summclust/ols.hpp"
#include "summclust/rng.hpp"

namespace summclust {

struct BootstrapConfig {
  int B = 399;                 // replications
  std::uint64_t seed = 0;      // sign draws are derived from (seed, b)
  double beta_0j = 0.0;        // null value for the coefficient of interest
  bool ci = false;
  double ci_tol = 1e-3;        // endpoint tolerance, as a fraction of the CV1 s.e.
  double level = 0.05;         // test level used for interval inversion
  bool enumerate_all = false;  // exhaust all 2^G sign patterns instead
};

struct BootstrapResult {
  double p_value = 1.0;              // #{|t*| >= |t_hat|} / B
  std::vector<double> t_stats;       // bootstrap t* statistics
  int degenerate = 0;                // replications with zero bootstrap s.e.
  std::optional<std::pair<double, double>> ci;
};

namespace wcr_detail {

// Everything y-dependent a replication needs, reduced to cluster level.
// With wild resampling X never changes, so a replication only has to touch
// k-vectors: beta* = beta~ + (X'X)^-1 sum_g v_g s~_g, and the bootstrap
// scores are s*_g = v_g s~_g - X_g'X_g (beta* - beta~).
struct Workspace {
  int G = 0;
  int j = 0;
  double correction = 0.0;            // CV1 small-sample factor
  double t_hat = 0.0;                 // observed CV1 t for the null
  Eigen::MatrixXd score_mat;          // k x G, restricted scores s~_g
  Eigen::VectorXd p_g;                // w_j's~_g
  Eigen::MatrixXd q_mat;              // k x G, columns X_g'X_g w_j
  Eigen::MatrixXd inv_gram;
};

inline Workspace prepare(const PreparedDesign& design, const FittedModel& model,
                         double beta_0j) {
  const int k = design.k();
  const int G = design.G;
  const int j = design.j;

  // Restricted fit: impose beta_j = beta_0j and regress y - beta_0j x_j on
  // the remaining columns.
  Eigen::VectorXd beta_r = Eigen::VectorXd::Zero(k);
  beta_r(j) = beta_0j;
  if (k > 1) {
    Eigen::MatrixXd gram_others(k - 1, k - 1);
    Eigen::VectorXd rhs(k - 1);
    for (int r = 0, rr = 0; r < k; ++r) {
      if (r == j) continue;
      rhs(rr) = design.moment(r) - beta_0j * design.gram(r, j);
      for (int c = 0, cc = 0; c < k; ++c) {
        if (c == j) continue;
        gram_others(rr, cc) = design.gram(r, c);
        ++cc;
      }
      ++rr;
    }
    const Eigen::VectorXd delta = solve_sym_ginv(gram_others, rhs).x;
    for (int r = 0, rr = 0; r < k; ++r) {
      if (r == j) continue;
      beta_r(r) = delta(rr);
      ++rr;
    }
  }

  Workspace ws;
  ws.G = G;
  ws.j = j;
  ws.correction = cv1_correction(model.N, G, model.k_dof);
  ws.inv_gram = model.inv_gram;
  // restricted residuals computed observation by observation, so an exact
  // restricted fit produces exactly zero scores
  ws.score_mat.resize(k, G);
  for (int g = 0; g < G; ++g) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
    for (int r : design.cluster_rows[g]) {
      s += design.X.row(r).transpose() * (design.y(r) - design.X.row(r).dot(beta_r));
    }
    ws.score_mat.col(g) = std::move(s);
  }
  const Eigen::VectorXd w = model.inv_gram.col(j);
  ws.p_g = ws.score_mat.transpose() * w;
  ws.q_mat.resize(k, G);
  for (int g = 0; g < G; ++g) ws.q_mat.col(g) = design.gram_blocks[g] * w;

  // Observed statistic: CV1 t for H0 beta_j = beta_0j.
  double meat_jj = 0.0;
  for (const auto& s : model.scores) {
    const double wj_s = w.dot(s);
    meat_jj += wj_s * wj_s;
  }
  const double se = std::sqrt(ws.correction * meat_jj);
  const double num = model.beta(j) - beta_0j;
  if (se == 0.0) {
    ws.t_hat = num == 0.0 ? 0.0
                          : std::copysign(std::numeric_limits<double>::infinity(), num);
  } else {
    ws.t_hat = num / se;
  }
  return ws;
}

// One bootstrap t* for a given vector of cluster signs.
inline double t_star(const Workspace& ws, const Eigen::VectorXd& signs, int* degenerate) {
  const Eigen::VectorXd u = ws.score_mat * signs;
  const Eigen::VectorXd delta = ws.inv_gram * u;
  const double num = delta(ws.j);
  double meat = 0.0;
  for (int g = 0; g < ws.G; ++g) {
    const double term = signs(g) * ws.p_g(g) - ws.q_mat.col(g).dot(delta);
    meat += term * term;
  }
  const double se = std::sqrt(ws.correction * meat);
  if (se == 0.0) {
    if (num == 0.0) return 0.0;
    ++*degenerate;
    return std::copysign(std::numeric_limits<double>::infinity(), num);
  }
  return num / se;
}

}  // namespace wcr_detail

// Wild cluster restricted bootstrap p-value for H0: beta_j = beta_0j.
// Restricted residuals get cluster-level Rademacher signs; each replication
// refits and computes the CV1 t-statistic, and the p-value is the fraction
// of |t*| at least as large as the observed |t|.
inline BootstrapResult wcr_pvalue(const PreparedDesign& design, const FittedModel& model,
                                  const BootstrapConfig& config) {
  if (design.G < 2) throw std::invalid_argument("wcr_pvalue: needs at least 2 clusters");
  if (config.B < 1 && !config.enumerate_all) {
    throw std::invalid_argument("wcr_pvalue: B must be >= 1");
  }
  const wcr_detail::Workspace ws = wcr_detail::prepare(design, model, config.beta_0j);
  const int G = design.G;

  BootstrapResult result;
  Eigen::VectorXd signs(G);
  const double abs_t_hat = std::fabs(ws.t_hat);
  int count = 0;

  if (config.enumerate_all) {
    if (G > 30) throw std::invalid_argument("wcr_pvalue: enumeration limited to G <= 30");
    const std::uint64_t n_patterns = 1ULL << G;
    result.t_stats.reserve(n_patterns);
    for (std::uint64_t pattern = 0; pattern < n_patterns; ++pattern) {
      for (int g = 0; g < G; ++g) signs(g) = (pattern >> g) & 1ULL ? 1.0 : -1.0;
      const double t = wcr_detail::t_star(ws, signs, &result.degenerate);
      result.t_stats.push_back(t);
      if (std::fabs(t) >= abs_t_hat) ++count;
    }
    result.p_value = static_cast<double>(count) / static_cast<double>(n_patterns);
    return result;
  }

  result.t_stats.reserve(config.B);
  for (int b = 0; b < config.B; ++b) {
    Rng rng(config.seed, static_cast<std::uint64_t>(b));
    for (int g = 0; g < G; ++g) signs(g) = rng.next_sign();
    const double t = wcr_detail::t_star(ws, signs, &result.degenerate);
    result.t_stats.push_back(t);
    if (std::fabs(t) >= abs_t_hat) ++count;
  }
  result.p_value = static_cast<double>(count) / config.B;
  return result;
}

// Confidence interval by test inversion: bisect on the null value in each
// direction from beta_hat_j until the bootstrap p-value crosses the level.
// The same seed is reused at every grid point. A bound that never crosses
// within +-20 CV1 standard errors is reported as infinite.
inline std::pair<double, double> wcr_ci(const PreparedDesign& design,
                                        const FittedModel& model,
                                        const BootstrapConfig& config) {
  const double beta_j = model.beta(design.j);
  const VarianceEstimate v1 = cv1(model);
  const double se = v1.se_j;
  if (se == 0.0) return {beta_j, beta_j};

  auto p_at = [&](double b0) {
    BootstrapConfig c = config;
    c.beta_0j = b0;
    c.ci = false;
    return wcr_pvalue(design, model, c).p_value;
  };

  const double level = config.level;
  const double tol = std::max(config.ci_tol, 1e-12) * se;
  auto search = [&](double direction) {
    double inside = beta_j;  // p >= level here
    double mult = 1.0;
    double outside;
    for (;;) {
      outside = beta_j + direction * mult * se;
      if (p_at(outside) < level) break;
      inside = outside;
      if (mult >= 20.0) return direction * std::numeric_limits<double>::infinity();
      mult = std::min(mult * 2.0, 20.0);
    }
    while (std::fabs(outside - inside) > tol) {
      const double mid = 0.5 * (inside + outside);
      (p_at(mid) >= level ? inside : outside) = mid;
    }
    return 0.5 * (inside + outside);
  };

  return {search(-1.0), search(+1.0)};
}

}  // namespace summclust
