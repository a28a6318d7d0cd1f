#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

namespace summclust {

struct RankResult {
  std::vector<int> kept;
  std::vector<int> dropped;
};

// Rank-revealing Cholesky on a symmetric PSD Gram matrix. Walks the columns
// in order and drops any column whose conditional pivot falls below
// tol * max diagonal, so the first occurrence of each independent direction
// is kept and later collinear columns are the ones removed.
inline RankResult detect_rank(const Eigen::MatrixXd& gram, double tol = 1e-10) {
  const int k = static_cast<int>(gram.cols());
  RankResult result;
  if (k == 0) return result;

  double scale = 0.0;
  for (int i = 0; i < k; ++i) scale = std::max(scale, gram(i, i));
  if (scale <= 0.0) {
    for (int i = 0; i < k; ++i) result.dropped.push_back(i);
    return result;
  }
  const double cutoff = tol * scale;

  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(k, k);
  std::vector<bool> excluded(k, false);
  for (int j = 0; j < k; ++j) {
    double pivot = gram(j, j);
    for (int i = 0; i < j; ++i) pivot -= R(i, j) * R(i, j);
    if (pivot <= cutoff) {
      excluded[j] = true;
      result.dropped.push_back(j);
      continue;  // row j of R stays zero, so later columns skip it
    }
    const double r_jj = std::sqrt(pivot);
    R(j, j) = r_jj;
    for (int l = j + 1; l < k; ++l) {
      double v = gram(j, l);
      for (int i = 0; i < j; ++i) v -= R(i, j) * R(i, l);
      R(j, l) = v / r_jj;
    }
    result.kept.push_back(j);
  }
  return result;
}

struct GinvSolve {
  Eigen::VectorXd x;
  std::vector<int> dropped;  // columns whose coefficients were forced to 0
};

// Solve A x = b for symmetric PSD A that may be rank deficient. Columns that
// cannot be identified are detected with the same keep-first pivot rule as
// detect_rank; their coefficients are set to exactly 0, matching the sweep
// style generalized inverses used by regression packages.
inline GinvSolve solve_sym_ginv(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                double tol = 1e-12) {
  const int k = static_cast<int>(A.cols());
  GinvSolve out;
  out.x = Eigen::VectorXd::Zero(k);
  const RankResult rank = detect_rank(A, tol);
  out.dropped = rank.dropped;
  const int m = static_cast<int>(rank.kept.size());
  if (m == 0) return out;

  Eigen::MatrixXd Akk(m, m);
  Eigen::VectorXd bk(m);
  for (int r = 0; r < m; ++r) {
    bk(r) = b(rank.kept[r]);
    for (int c = 0; c < m; ++c) Akk(r, c) = A(rank.kept[r], rank.kept[c]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(Akk);
  Eigen::VectorXd xk;
  if (llt.info() == Eigen::Success) {
    xk = llt.solve(bk);
  } else {
    xk = Akk.ldlt().solve(bk);
  }
  for (int r = 0; r < m; ++r) out.x(rank.kept[r]) = xk(r);
  return out;
}

// Solve A x = b for symmetric PD A; throws if A is not positive definite.
inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("solve_spd: matrix is not positive definite");
  }
  return llt.solve(b);
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& A) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("spd_inverse: matrix is not positive definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
}

inline double min_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// max |A - B| / max(|A|_max, |B|_max); 0 when both are zero.
inline double rel_max_diff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const double scale = std::max(A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (A - B).cwiseAbs().maxCoeff() / scale;
}

}  // namespace summclust
