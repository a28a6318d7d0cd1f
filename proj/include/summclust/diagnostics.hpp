#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "summclust/jackknife.hpp"
#include "summclust/ols.hpp"

namespace summclust {

// L_g = Tr(X_g'X_g (X'X)^-1), the trace of cluster g's block of the hat
// matrix; H_g itself is never formed. The L_g sum to k.
inline Eigen::VectorXd leverage(const PreparedDesign& design,
                                const Eigen::MatrixXd& inv_gram) {
  Eigen::VectorXd L(design.G);
  for (int g = 0; g < design.G; ++g) {
    L(g) = design.gram_blocks[g].cwiseProduct(inv_gram).sum();
  }
  return L;
}

inline Eigen::VectorXd leverage(const PreparedDesign& design, const FittedModel& model) {
  return leverage(design, model.inv_gram);
}

// Partial leverage of column j: residualize x_j on the other columns (one
// least-squares solve on the Gram) and compute each cluster's share of the
// residual variation. The L_gj average exactly 1/G.
inline Eigen::VectorXd partial_leverage(const PreparedDesign& design, int j) {
  const int k = design.k();
  if (j < 0 || j >= k) throw std::invalid_argument("partial_leverage: bad column index");

  Eigen::VectorXd xj_resid = design.X.col(j);
  if (k > 1) {
    Eigen::MatrixXd gram_others(k - 1, k - 1);
    Eigen::VectorXd cross(k - 1);
    for (int r = 0, rr = 0; r < k; ++r) {
      if (r == j) continue;
      cross(rr) = design.gram(r, j);
      for (int c = 0, cc = 0; c < k; ++c) {
        if (c == j) continue;
        gram_others(rr, cc) = design.gram(r, c);
        ++cc;
      }
      ++rr;
    }
    const Eigen::VectorXd delta = solve_sym_ginv(gram_others, cross).x;
    for (int r = 0, rr = 0; r < k; ++r) {
      if (r == j) continue;
      xj_resid -= delta(rr) * design.X.col(r);
      ++rr;
    }
  }

  const double total = xj_resid.squaredNorm();
  if (total <= 1e-10 * design.gram(j, j)) {
    throw std::runtime_error("partial_leverage: coefficient not identified (no residual variation in column " +
                             design.colnames[j] + ")");
  }
  Eigen::VectorXd L(design.G);
  for (int g = 0; g < design.G; ++g) {
    double s = 0.0;
    for (int r : design.cluster_rows[g]) s += xj_resid(r) * xj_resid(r);
    L(g) = s / total;
  }
  return L;
}

// Scaled variance V_s(a) = sum (a_g - abar)^2 / ((G-1) abar^2).
inline std::optional<double> scaled_variance(const Eigen::VectorXd& values) {
  const int G = static_cast<int>(values.size());
  if (G < 2) return std::nullopt;
  const double mean = values.mean();
  if (mean == 0.0) return std::nullopt;
  double ss = 0.0;
  for (int g = 0; g < G; ++g) ss += (values(g) - mean) * (values(g) - mean);
  return ss / ((G - 1.0) * mean * mean);
}

struct Summary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double mean = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::optional<double> coefvar;  // sqrt of the scaled variance
};

// Six order/central statistics plus the coefficient of variation. Quartiles
// use the linear-interpolation convention h = (G-1)p.
inline Summary summarize(const Eigen::VectorXd& values) {
  const int G = static_cast<int>(values.size());
  if (G < 1) throw std::invalid_argument("summarize: empty vector");
  std::vector<double> v(values.data(), values.data() + G);
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double h = (G - 1) * p;
    const int lo = static_cast<int>(std::floor(h));
    if (lo + 1 >= G) return v.back();
    return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
  };
  Summary s;
  s.min = v.front();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.mean = values.mean();
  s.q3 = quantile(0.75);
  s.max = v.back();
  if (const auto vs = scaled_variance(values)) s.coefvar = std::sqrt(*vs);
  return s;
}

struct AltMeans {
  std::optional<double> harmonic;  // undefined when any value is <= 0
  std::optional<double> geometric;
  double quadratic = 0.0;
  std::optional<double> harmonic_ratio;  // ratios to the arithmetic mean
  std::optional<double> geometric_ratio;
  std::optional<double> quadratic_ratio;
};

inline AltMeans alternative_means(const Eigen::VectorXd& values) {
  const int G = static_cast<int>(values.size());
  if (G < 1) throw std::invalid_argument("alternative_means: empty vector");
  AltMeans out;
  const double mean = values.mean();
  bool all_positive = true;
  double inv_sum = 0.0;
  double log_sum = 0.0;
  double sq_sum = 0.0;
  for (int g = 0; g < G; ++g) {
    const double a = values(g);
    if (a <= 0.0) all_positive = false;
    if (all_positive) {
      inv_sum += 1.0 / a;
      log_sum += std::log(a);
    }
    sq_sum += a * a;
  }
  out.quadratic = std::sqrt(sq_sum / G);
  if (all_positive) {
    out.harmonic = G / inv_sum;
    out.geometric = std::exp(log_sum / G);
  }
  if (mean != 0.0) {
    if (out.harmonic) out.harmonic_ratio = *out.harmonic / mean;
    if (out.geometric) out.geometric_ratio = *out.geometric / mean;
    out.quadratic_ratio = out.quadratic / mean;
  }
  return out;
}

struct EffectiveClusters {
  Eigen::VectorXd gamma0;  // gamma_gj(0) = w_j' X_g'X_g w_j
  Eigen::VectorXd gamma1;  // gamma_gj(1) = (iota' X_g w_j)^2
  double gstar0 = 0.0;
  std::optional<double> gstar1;     // suppressed with nested fixed effects
  std::optional<double> gstar_rho;  // only when a valid rho was requested
  double rho = 0.0;
  bool fe_nested = false;
};

// Effective number of clusters G*_j(rho) = G / (1 + Gamma_j(rho)), where
// Gamma_j(rho) is the scaled variance of the gamma_gj(rho). The gamma are
// interpolated exactly between their rho=0 and rho=1 values, so no
// N_g x N_g matrix is ever formed. With cluster-level (or nested) fixed
// effects only rho = 0 is meaningful.
inline EffectiveClusters effective_clusters(const PreparedDesign& design,
                                            const FittedModel& model,
                                            std::optional<double> rho = std::nullopt) {
  if (rho && (*rho < 0.0 || *rho > 1.0)) {
    throw std::invalid_argument("rho must be in [0,1]");
  }
  const int G = design.G;
  const Eigen::VectorXd w = model.inv_gram.col(model.j);

  EffectiveClusters out;
  out.fe_nested = design.fe_nested;
  out.gamma0.resize(G);
  out.gamma1.resize(G);
  for (int g = 0; g < G; ++g) {
    out.gamma0(g) = w.dot(design.gram_blocks[g] * w);
    double colsum = 0.0;
    for (int r : design.cluster_rows[g]) colsum += design.X.row(r).dot(w);
    out.gamma1(g) = colsum * colsum;
  }

  auto gstar_of = [G](const Eigen::VectorXd& gamma) -> std::optional<double> {
    const auto vs = scaled_variance(gamma);
    if (!vs) return std::nullopt;
    return G / (1.0 + *vs);
  };

  const auto g0 = gstar_of(out.gamma0);
  if (!g0) {
    throw std::runtime_error("effective_clusters: degenerate gamma(0) sequence");
  }
  out.gstar0 = *g0;
  if (!design.fe_nested) {
    out.gstar1 = gstar_of(out.gamma1);
    if (rho) {
      out.rho = *rho;
      const Eigen::VectorXd mixed = *rho * out.gamma1 + (1.0 - *rho) * out.gamma0;
      out.gstar_rho = gstar_of(mixed);
    }
  } else if (rho && *rho == 0.0) {
    out.rho = 0.0;
    out.gstar_rho = out.gstar0;
  }
  return out;
}

struct ClusterDiagnostics {
  Eigen::VectorXd Ng;
  Eigen::VectorXd L;           // leverage
  Eigen::VectorXd Lpart;       // partial leverage for the coefficient of interest
  Eigen::VectorXd beta_del_j;  // beta_j^(g)
  Summary ng_summary, lev_summary, partlev_summary, betanog_summary;
  AltMeans ng_means, lev_means, partlev_means, betanog_means;
};

inline ClusterDiagnostics compute_cluster_diagnostics(
    const PreparedDesign& design, const FittedModel& model,
    const std::vector<Eigen::VectorXd>& beta_del) {
  ClusterDiagnostics d;
  d.Ng.resize(design.G);
  for (int g = 0; g < design.G; ++g) d.Ng(g) = design.Ng[g];
  d.L = leverage(design, model);
  d.Lpart = partial_leverage(design, design.j);
  d.beta_del_j.resize(design.G);
  for (int g = 0; g < design.G; ++g) d.beta_del_j(g) = beta_del[g](design.j);
  d.ng_summary = summarize(d.Ng);
  d.lev_summary = summarize(d.L);
  d.partlev_summary = summarize(d.Lpart);
  d.betanog_summary = summarize(d.beta_del_j);
  d.ng_means = alternative_means(d.Ng);
  d.lev_means = alternative_means(d.L);
  d.partlev_means = alternative_means(d.Lpart);
  d.betanog_means = alternative_means(d.beta_del_j);
  return d;
}

}  // namespace summclust
