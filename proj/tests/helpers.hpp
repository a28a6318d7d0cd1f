#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "summclust/analytic_oracles.hpp"
#include "summclust/design.hpp"
#include "summclust/diagnostics.hpp"
#include "summclust/jackknife.hpp"
#include "summclust/model_spec.hpp"
#include "summclust/ols.hpp"
#include "summclust/rng.hpp"

namespace test_helpers {

using summclust::PreparedDesign;
using summclust::Rng;

// Independent least-squares route (column-pivoted QR on X itself, not the
// accumulated normal equations).
inline Eigen::VectorXd dense_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

// Hat-matrix diagonals h_i via thin QR.
inline Eigen::VectorXd hat_diagonals(const Eigen::MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  const int k = static_cast<int>(X.cols());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::MatrixXd thin_q = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  return thin_q.rowwise().squaredNorm();
}

// HC1 heteroskedasticity-robust variance, computed observation by
// observation with a dense inverse.
inline Eigen::MatrixXd hc1_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(X.rows());
  const int k = static_cast<int>(X.cols());
  const Eigen::MatrixXd inv = (X.transpose() * X).inverse();
  const Eigen::VectorXd resid = y - X * dense_ols(X, y);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < n; ++i) {
    meat += resid(i) * resid(i) * X.row(i).transpose() * X.row(i);
  }
  return (static_cast<double>(n) / (n - k)) * inv * meat * inv;
}

// Brute-force delete-one refit: stack every cluster except g and solve fresh.
inline Eigen::VectorXd refit_without_cluster(const PreparedDesign& design, int g) {
  const int n = design.N() - design.Ng[g];
  Eigen::MatrixXd X(n, design.k());
  Eigen::VectorXd y(n);
  int row = 0;
  for (int r = 0; r < design.N(); ++r) {
    if (design.cluster_of_row[r] == g) continue;
    X.row(row) = design.X.row(r);
    y(row) = design.y(r);
    ++row;
  }
  return dense_ols(X, y);
}

// Trace of cluster g's hat-matrix block, formed explicitly.
inline double explicit_hg_trace(const PreparedDesign& design, int g) {
  const Eigen::MatrixXd Xg = design.rows_of(g);
  const Eigen::MatrixXd inv = design.gram.inverse();
  return (Xg * inv * Xg.transpose()).trace();
}

struct RandomDesignOptions {
  int min_G = 3, max_G = 15;
  int min_Ng = 1, max_Ng = 20;
  int min_k = 1, max_k = 5;
  bool require_nonsingular_downdates = true;
  double cluster_effect_sd = 1.0;
};

// Random clustered design with a continuous test regressor and a mix of
// continuous and dummy controls; y carries cluster effects so that scores
// are correlated within clusters.
inline PreparedDesign random_design(Rng& rng, const RandomDesignOptions& opt = {}) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    const int G = opt.min_G + static_cast<int>(rng.next_below(opt.max_G - opt.min_G + 1));
    const int k = opt.min_k + static_cast<int>(rng.next_below(opt.max_k - opt.min_k + 1));
    std::vector<int> cluster_ids;
    for (int g = 0; g < G; ++g) {
      const int ng = opt.min_Ng + static_cast<int>(rng.next_below(opt.max_Ng - opt.min_Ng + 1));
      for (int i = 0; i < ng; ++i) cluster_ids.push_back(g + 1);
    }
    const int n = static_cast<int>(cluster_ids.size());
    if (n <= k + 1) continue;

    Eigen::MatrixXd X(n, k);
    for (int c = 0; c < k; ++c) {
      const bool dummy = c > 0 && rng.next_bernoulli(0.4);
      for (int r = 0; r < n; ++r) {
        X(r, c) = dummy ? (rng.next_bernoulli(0.5) ? 1.0 : 0.0) : rng.next_normal();
      }
    }
    Eigen::VectorXd beta(k);
    for (int c = 0; c < k; ++c) beta(c) = rng.next_normal();
    Eigen::VectorXd y(n);
    std::vector<double> effect(G + 1);
    for (int g = 0; g <= G; ++g) effect[g] = opt.cluster_effect_sd * rng.next_normal();
    for (int r = 0; r < n; ++r) {
      y(r) = X.row(r).dot(beta) + effect[cluster_ids[r]] + rng.next_normal();
    }

    try {
      PreparedDesign design = summclust::prepare_design(std::move(X), std::move(y),
                                                        cluster_ids, /*j=*/0);
      if (opt.require_nonsingular_downdates &&
          summclust::DeleteOneSolver(design).any_dropped()) {
        continue;
      }
      return design;
    } catch (const std::runtime_error&) {
      continue;
    }
  }
  throw std::runtime_error("random_design: could not draw a usable design");
}

inline summclust::Dataset make_dataset(
    const std::vector<std::string>& names,
    const std::vector<std::vector<double>>& numeric_columns) {
  summclust::Dataset data;
  data.names = names;
  for (const auto& v : numeric_columns) {
    summclust::Column col;
    col.kind = summclust::Column::Kind::numeric;
    col.values = v;
    data.columns.push_back(std::move(col));
  }
  return data;
}

// ---- shared machinery for the closed-form example designs ----

struct ClusterSamples {
  std::vector<std::vector<double>> x;  // per cluster
  std::vector<std::vector<double>> y;
};

inline summclust::ExampleDesign example_from_samples(summclust::ExampleDesign::Kind kind,
                                                     const ClusterSamples& s) {
  const int G = static_cast<int>(s.x.size());
  summclust::ExampleDesign d;
  d.kind = kind;
  d.Ng.resize(G);
  d.xbar_g.resize(G);
  d.var_x_g.resize(G);
  d.cov_xy_g.resize(G);
  d.dbar_g.resize(G);
  d.treated.resize(G);
  for (int g = 0; g < G; ++g) {
    const auto& xg = s.x[g];
    const int ng = static_cast<int>(xg.size());
    d.Ng(g) = ng;
    double mx = 0.0;
    for (double v : xg) mx += v;
    mx /= ng;
    d.xbar_g(g) = mx;
    d.dbar_g(g) = mx;  // for binary x the mean is the treated share
    double vx = 0.0;
    for (double v : xg) vx += (v - mx) * (v - mx);
    d.var_x_g(g) = vx / ng;  // 1/N_g convention
    d.treated[g] = mx > 0.5;
    if (!s.y.empty()) {
      const auto& yg = s.y[g];
      double my = 0.0;
      for (double v : yg) my += v;
      my /= ng;
      double cxy = 0.0;
      for (int i = 0; i < ng; ++i) cxy += (xg[i] - mx) * (yg[i] - my);
      d.cov_xy_g(g) = cxy / ng;
    }
  }
  return d;
}

struct PipelineResult {
  summclust::PreparedDesign design;
  summclust::FittedModel model;
  Eigen::VectorXd L;
  Eigen::VectorXd Lp;
};

// flatten per-cluster samples into [x, const] (or just x)
inline PipelineResult pipeline_const(const ClusterSamples& s, bool with_constant) {
  std::vector<int> ids;
  std::vector<double> xs, ys;
  for (std::size_t g = 0; g < s.x.size(); ++g) {
    for (std::size_t i = 0; i < s.x[g].size(); ++i) {
      ids.push_back(static_cast<int>(g) + 1);
      xs.push_back(s.x[g][i]);
      ys.push_back(s.y[g][i]);
    }
  }
  const int n = static_cast<int>(xs.size());
  Eigen::MatrixXd X(n, with_constant ? 2 : 1);
  Eigen::VectorXd y(n);
  for (int r = 0; r < n; ++r) {
    X(r, 0) = xs[r];
    if (with_constant) X(r, 1) = 1.0;
    y(r) = ys[r];
  }
  PipelineResult out{summclust::prepare_design(std::move(X), std::move(y), ids), {}, {}, {}};
  out.model = summclust::fit_ols(out.design);
  out.L = summclust::leverage(out.design, out.model);
  out.Lp = summclust::partial_leverage(out.design, 0);
  return out;
}

// run the x-only model through the full pipeline with cluster fixed effects
// partialed out
inline PipelineResult pipeline_absorbed(const ClusterSamples& s) {
  std::vector<double> ids, xs, ys;
  for (std::size_t g = 0; g < s.x.size(); ++g) {
    for (std::size_t i = 0; i < s.x[g].size(); ++i) {
      ids.push_back(static_cast<double>(g) + 1);
      xs.push_back(s.x[g][i]);
      ys.push_back(s.y[g][i]);
    }
  }
  const summclust::Dataset data = make_dataset({"y", "x", "cid"}, {ys, xs, ids});
  summclust::ModelSpec spec;
  spec.coef_var = "x";
  spec.yvar = "y";
  spec.cluster = "cid";
  spec.absorb = "cid";
  PipelineResult out{summclust::build_design(data, spec), {}, {}, {}};
  out.model = summclust::fit_ols(out.design);
  out.L = summclust::leverage(out.design, out.model);
  out.Lp = summclust::partial_leverage(out.design, 0);
  return out;
}

inline ClusterSamples random_samples(Rng& rng, int G, bool binary,
                                     bool cluster_level = false) {
  ClusterSamples s;
  s.x.resize(G);
  s.y.resize(G);
  for (int g = 0; g < G; ++g) {
    const int ng = 3 + static_cast<int>(rng.next_below(8));
    const bool treated_cluster = g % 2 == 0;
    const double effect = rng.next_normal();
    for (int i = 0; i < ng; ++i) {
      double x;
      if (cluster_level) {
        x = treated_cluster ? 1.0 : 0.0;
      } else if (binary) {
        x = rng.next_bernoulli(0.3 + 0.05 * g) ? 1.0 : 0.0;
      } else {
        x = rng.next_normal() * (1.0 + 0.1 * g) + 0.2 * g;
      }
      s.x[g].push_back(x);
      s.y[g].push_back(0.8 * x + effect + rng.next_normal());
    }
  }
  return s;
}

inline std::string write_temp_csv(const std::string& name, const std::string& content) {
  const std::string path = std::string("/tmp/summclust_test_") + name + ".csv";
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace test_helpers
