#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <vector>

#include "summclust/linalg.hpp"
#include "summclust/ols.hpp"

namespace summclust {

// Prefactored delete-one-cluster solver. For each cluster g it factors the
// downdated Gram X'X - X_g'X_g once; when that matrix is singular the
// non-identified coefficients are forced to exactly 0, like a sweep-based
// generalized inverse, and the dropped column set is recorded.
class DeleteOneSolver {
 public:
  explicit DeleteOneSolver(const PreparedDesign& design, double tol = 1e-12)
      : k_(design.k()) {
    const int G = design.G;
    llt_.resize(G);
    kept_.resize(G);
    dropped_.resize(G);
    for (int g = 0; g < G; ++g) {
      Eigen::MatrixXd A = design.gram - design.gram_blocks[g];
      A = 0.5 * (A + A.transpose()).eval();
      const RankResult rank = detect_rank(A, tol);
      kept_[g] = rank.kept;
      dropped_[g] = rank.dropped;
      if (!rank.dropped.empty()) any_dropped_ = true;
      const int m = static_cast<int>(rank.kept.size());
      Eigen::MatrixXd Akk(m, m);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) Akk(r, c) = A(rank.kept[r], rank.kept[c]);
      llt_[g].compute(Akk);
      if (llt_[g].info() != Eigen::Success) {
        // pivots passed the cutoff but LLT still failed: retry with a
        // stricter cutoff so the offending direction is dropped too
        const RankResult strict = detect_rank(A, 1e-9);
        kept_[g] = strict.kept;
        dropped_[g] = strict.dropped;
        if (!strict.dropped.empty()) any_dropped_ = true;
        const int ms = static_cast<int>(strict.kept.size());
        Eigen::MatrixXd As(ms, ms);
        for (int r = 0; r < ms; ++r)
          for (int c = 0; c < ms; ++c) As(r, c) = A(strict.kept[r], strict.kept[c]);
        llt_[g].compute(As);
        if (llt_[g].info() != Eigen::Success) {
          throw std::runtime_error("delete-one Gram could not be factored");
        }
      }
    }
  }

  int n_clusters() const { return static_cast<int>(llt_.size()); }
  bool any_dropped() const { return any_dropped_; }
  const std::vector<int>& dropped(int g) const { return dropped_[g]; }

  // beta^(g) for right-hand side X'y - X_g'y_g; dropped coefficients are 0.
  Eigen::VectorXd solve(int g, const Eigen::VectorXd& rhs) const {
    const auto& kept = kept_[g];
    const int m = static_cast<int>(kept.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(k_);
    if (m == 0) return out;
    Eigen::VectorXd bk(m);
    for (int r = 0; r < m; ++r) bk(r) = rhs(kept[r]);
    const Eigen::VectorXd xk = llt_[g].solve(bk);
    for (int r = 0; r < m; ++r) out(kept[r]) = xk(r);
    return out;
  }

 private:
  int k_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt_;
  std::vector<std::vector<int>> kept_;
  std::vector<std::vector<int>> dropped_;
  bool any_dropped_ = false;
};

struct JackknifeResult {
  std::vector<Eigen::VectorXd> beta_del;  // beta^(g), g = 1..G
  Eigen::VectorXd beta_bar;               // mean of the beta^(g)
  std::vector<bool> zeroed;               // coefficient of interest zeroed for g
  VarianceEstimate cv3;
  std::optional<VarianceEstimate> cv3j;

  bool any_zeroed() const {
    for (bool z : zeroed)
      if (z) return true;
    return false;
  }
};

// beta^(g) = (X'X - X_g'X_g)^-(X'y - X_g'y_g) for every g. When the
// downdated Gram is singular the affected coefficients are zeroed; `zeroed`
// flags clusters where that happened to the coefficient of interest.
inline std::vector<Eigen::VectorXd> delete_one_betas(const PreparedDesign& design,
                                                     std::vector<bool>* zeroed = nullptr) {
  const DeleteOneSolver solver(design);
  std::vector<Eigen::VectorXd> betas(design.G);
  if (zeroed) zeroed->assign(design.G, false);
  for (int g = 0; g < design.G; ++g) {
    betas[g] = solver.solve(g, design.moment - design.moment_blocks[g]);
    if (zeroed) {
      for (int d : solver.dropped(g)) {
        if (d == design.j) (*zeroed)[g] = true;
      }
    }
  }
  return betas;
}

namespace detail {

inline Eigen::MatrixXd jackknife_outer_sum(const std::vector<Eigen::VectorXd>& beta_del,
                                           const Eigen::VectorXd& center) {
  const int k = static_cast<int>(center.size());
  const int G = static_cast<int>(beta_del.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  for (const auto& b : beta_del) {
    const Eigen::VectorXd d = b - center;
    sum.selfadjointView<Eigen::Lower>().rankUpdate(d);
  }
  sum.triangularView<Eigen::StrictlyUpper>() = sum.transpose();
  return ((G - 1.0) / G) * sum;
}

}  // namespace detail

// CV3 = (G-1)/G sum_g (beta^(g) - beta_hat)(beta^(g) - beta_hat)'.
inline VarianceEstimate cv3_jackknife(const PreparedDesign& design,
                                      const FittedModel& model, double beta_0j = 0.0,
                                      double level = 0.95) {
  const auto betas = delete_one_betas(design);
  return make_variance_estimate(
      CvKind::CV3, detail::jackknife_outer_sum(betas, model.beta), model, beta_0j, level);
}

// CV3J uses the sample mean of the beta^(g) as the center instead.
inline VarianceEstimate cv3j_jackknife(const PreparedDesign& design,
                                       const FittedModel& model, double beta_0j = 0.0,
                                       double level = 0.95) {
  const auto betas = delete_one_betas(design);
  Eigen::VectorXd bar = Eigen::VectorXd::Zero(design.k());
  for (const auto& b : betas) bar += b;
  bar /= design.G;
  return make_variance_estimate(
      CvKind::CV3J, detail::jackknife_outer_sum(betas, bar), model, beta_0j, level);
}

// Everything at once, sharing one pass over the delete-one estimates.
inline JackknifeResult jackknife(const PreparedDesign& design, const FittedModel& model,
                                 bool with_cv3j = false, double beta_0j = 0.0,
                                 double level = 0.95) {
  JackknifeResult result;
  result.beta_del = delete_one_betas(design, &result.zeroed);
  result.beta_bar = Eigen::VectorXd::Zero(design.k());
  for (const auto& b : result.beta_del) result.beta_bar += b;
  result.beta_bar /= design.G;
  result.cv3 = make_variance_estimate(
      CvKind::CV3, detail::jackknife_outer_sum(result.beta_del, model.beta), model,
      beta_0j, level);
  if (with_cv3j) {
    result.cv3j = make_variance_estimate(
        CvKind::CV3J, detail::jackknife_outer_sum(result.beta_del, result.beta_bar),
        model, beta_0j, level);
  }
  return result;
}

// Sandwich form of CV3 built from the modified scores
// s"_g = X_g' M_gg^-1 u_g with M_gg = I - X_g (X'X)^-1 X_g'. Forms N_g x N_g
// blocks, so it is only suitable as a small-sample cross-check.
inline Eigen::MatrixXd cv3_direct(const PreparedDesign& design, const FittedModel& model) {
  const int k = design.k();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (int g = 0; g < design.G; ++g) {
    const Eigen::MatrixXd Xg = design.rows_of(g);
    const int ng = static_cast<int>(Xg.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(ng, ng) -
                        Xg * model.inv_gram * Xg.transpose();
    M = 0.5 * (M + M.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.eigenvalues().minCoeff() < 1e-12) {
      throw std::runtime_error("cv3_direct: singular M_gg for cluster " +
                               design.cluster_labels[g] +
                               " (coefficient not identified without it)");
    }
    Eigen::VectorXd ug(ng);
    const auto& idx = design.cluster_rows[g];
    for (int r = 0; r < ng; ++r) ug(r) = model.residuals(idx[r]);
    const Eigen::VectorXd s = Xg.transpose() * es.eigenvectors() *
                              (es.eigenvectors().transpose() * ug).cwiseQuotient(
                                  es.eigenvalues());
    meat.selfadjointView<Eigen::Lower>().rankUpdate(s);
  }
  meat.triangularView<Eigen::StrictlyUpper>() = meat.transpose();
  Eigen::MatrixXd v = ((design.G - 1.0) / design.G) * model.inv_gram * meat * model.inv_gram;
  return 0.5 * (v + v.transpose()).eval();
}

}  // namespace summclust
