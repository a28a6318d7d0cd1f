#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "summclust/design.hpp"
#include "summclust/student_t.hpp"

namespace summclust {

struct FittedModel {
  Eigen::VectorXd beta;
  Eigen::MatrixXd inv_gram;               // (X'X)^-1
  Eigen::VectorXd residuals;              // N
  std::vector<Eigen::VectorXd> scores;    // s_g = X_g'u_g
  int N = 0;
  int G = 0;
  int k = 0;
  int k_dof = 0;  // includes absorbed fixed effects
  int j = 0;
};

enum class CvKind { CV1, CV3, CV3J };

inline const char* cv_label(CvKind kind) {
  switch (kind) {
    case CvKind::CV1: return "CV1";
    case CvKind::CV3: return "CV3";
    case CvKind::CV3J: return "CV3J";
  }
  return "?";
}

struct Inference {
  double t = 0.0;
  double p = 1.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool degenerate = false;  // zero standard error
};

struct VarianceEstimate {
  CvKind kind = CvKind::CV1;
  Eigen::MatrixXd matrix;  // k x k, symmetric PSD
  double se_j = 0.0;
  double t_j = 0.0;
  double p_j = 1.0;
  double ci_lower_j = 0.0;
  double ci_upper_j = 0.0;
  int dof = 0;
  bool degenerate = false;
};

// t, two-sided p against t(dof), and the confidence interval at `level`.
// A zero standard error is reported as a degenerate (infinite) statistic.
inline Inference t_inference(double beta_j, double se_j, double beta_0j, int dof,
                             double level = 0.95) {
  if (dof < 1) throw std::invalid_argument("t_inference: dof must be >= 1");
  if (se_j < 0.0) throw std::invalid_argument("t_inference: negative standard error");
  Inference out;
  const double diff = beta_j - beta_0j;
  if (se_j == 0.0) {
    out.degenerate = true;
    if (diff == 0.0) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = diff > 0.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
      out.p = 0.0;
    }
    out.ci_lower = out.ci_upper = beta_j;
    return out;
  }
  out.t = diff / se_j;
  out.p = student_t_two_sided_p(out.t, dof);
  const double crit = student_t_critical(dof, 1.0 - level);
  out.ci_lower = beta_j - crit * se_j;
  out.ci_upper = beta_j + crit * se_j;
  return out;
}

// OLS from the accumulated Gram and moment blocks; residuals are formed per
// cluster and the empirical scores come from the same blocks.
inline FittedModel fit_ols(const PreparedDesign& design) {
  FittedModel model;
  model.N = design.N();
  model.G = design.G;
  model.k = design.k();
  model.k_dof = design.k_dof();
  model.j = design.j;

  Eigen::LLT<Eigen::MatrixXd> llt(design.gram);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("fit_ols: singular X'X (rank check should have caught this)");
  }
  model.beta = llt.solve(design.moment);
  model.inv_gram = llt.solve(Eigen::MatrixXd::Identity(model.k, model.k));

  model.residuals.resize(model.N);
  model.scores.resize(design.G);
  for (int g = 0; g < design.G; ++g) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(model.k);
    for (int r : design.cluster_rows[g]) {
      model.residuals(r) = design.y(r) - design.X.row(r).dot(model.beta);
      s += design.X.row(r).transpose() * model.residuals(r);
    }
    model.scores[g] = std::move(s);
  }
  return model;
}

inline VarianceEstimate make_variance_estimate(CvKind kind, Eigen::MatrixXd matrix,
                                               const FittedModel& model,
                                               double beta_0j = 0.0,
                                               double level = 0.95) {
  VarianceEstimate est;
  est.kind = kind;
  est.matrix = std::move(matrix);
  est.dof = model.G - 1;
  est.se_j = std::sqrt(std::max(0.0, est.matrix(model.j, model.j)));
  const Inference inf = t_inference(model.beta(model.j), est.se_j, beta_0j, est.dof, level);
  est.t_j = inf.t;
  est.p_j = inf.p;
  est.ci_lower_j = inf.ci_lower;
  est.ci_upper_j = inf.ci_upper;
  est.degenerate = inf.degenerate;
  return est;
}

// CV1 small-sample factor G(N-1) / ((G-1)(N-k)).
inline double cv1_correction(int N, int G, int k_dof) {
  return (static_cast<double>(G) * (N - 1)) /
         (static_cast<double>(G - 1) * (N - k_dof));
}

// CV1: c * (X'X)^-1 (sum_g s_g s_g') (X'X)^-1 with inference against t(G-1).
inline VarianceEstimate cv1(const FittedModel& model, double beta_0j = 0.0,
                            double level = 0.95) {
  if (model.G < 2) throw std::invalid_argument("cv1: needs at least 2 clusters");
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(model.k, model.k);
  for (const auto& s : model.scores) meat.selfadjointView<Eigen::Lower>().rankUpdate(s);
  meat.triangularView<Eigen::StrictlyUpper>() = meat.transpose();
  const double c = cv1_correction(model.N, model.G, model.k_dof);
  Eigen::MatrixXd v = c * model.inv_gram * meat * model.inv_gram;
  v = 0.5 * (v + v.transpose()).eval();
  return make_variance_estimate(CvKind::CV1, std::move(v), model, beta_0j, level);
}

}  // namespace summclust
