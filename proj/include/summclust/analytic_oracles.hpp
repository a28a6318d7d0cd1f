#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace summclust {

// Closed-form leverage, partial leverage, and influence identities for a few
// canonical one-regressor designs. These are exact and independent of the
// matrix pipeline, which makes them useful as oracles in property tests.
struct ExampleDesign {
  enum class Kind {
    mean_only,               // regression on a constant
    single_regressor_const,  // x plus constant
    single_regressor_fe,     // x with cluster fixed effects partialed out
    treatment_const,         // binary d plus constant
    treatment_fe,            // binary d with cluster fixed effects
    cluster_level_treatment  // binary d plus constant, d constant within clusters
  };

  Kind kind = Kind::mean_only;
  Eigen::VectorXd Ng;
  Eigen::VectorXd xbar_g;   // within-cluster means of x
  Eigen::VectorXd var_x_g;  // within-cluster variances (1/N_g convention)
  Eigen::VectorXd cov_xy_g; // within-cluster covariances (1/N_g convention)
  Eigen::VectorXd dbar_g;   // within-cluster treated shares
  std::vector<bool> treated;

  int G() const { return static_cast<int>(Ng.size()); }
  double N() const { return Ng.sum(); }
  double xbar() const { return Ng.dot(xbar_g) / N(); }
  double dbar() const { return Ng.dot(dbar_g) / N(); }
  // total variance = mean of within variances + variance of within means
  double var_x() const {
    const double m = xbar();
    double s = 0.0;
    for (int g = 0; g < G(); ++g) {
      s += Ng(g) * (var_x_g(g) + (xbar_g(g) - m) * (xbar_g(g) - m));
    }
    return s / N();
  }
};

namespace oracle_detail {

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) {
    throw std::runtime_error(std::string("degenerate design: ") + what);
  }
}

}  // namespace oracle_detail

inline Eigen::VectorXd oracle_leverage(const ExampleDesign& d) {
  using Kind = ExampleDesign::Kind;
  const int G = d.G();
  const double N = d.N();
  Eigen::VectorXd L(G);
  switch (d.kind) {
    case Kind::mean_only:
      for (int g = 0; g < G; ++g) L(g) = d.Ng(g) / N;
      return L;
    case Kind::single_regressor_const: {
      const double vx = d.var_x();
      const double xb = d.xbar();
      oracle_detail::require_positive(vx, "zero variance of x");
      for (int g = 0; g < G; ++g) {
        const double dev = d.xbar_g(g) - xb;
        L(g) = d.Ng(g) / (N * vx) * (vx + d.var_x_g(g) + dev * dev);
      }
      return L;
    }
    case Kind::single_regressor_fe: {
      const double denom = d.Ng.dot(d.var_x_g);
      oracle_detail::require_positive(denom, "no within-cluster variation in x");
      for (int g = 0; g < G; ++g) L(g) = d.Ng(g) * d.var_x_g(g) / denom;
      return L;
    }
    case Kind::treatment_const: {
      const double db = d.dbar();
      oracle_detail::require_positive(db, "no treated observations");
      oracle_detail::require_positive(1.0 - db, "no control observations");
      for (int g = 0; g < G; ++g) {
        L(g) = d.Ng(g) / N * (d.dbar_g(g) / db + (1.0 - d.dbar_g(g)) / (1.0 - db));
      }
      return L;
    }
    case Kind::cluster_level_treatment: {
      const double db = d.dbar();
      oracle_detail::require_positive(db, "no treated clusters");
      oracle_detail::require_positive(1.0 - db, "no control clusters");
      for (int g = 0; g < G; ++g) {
        L(g) = d.treated[g] ? d.Ng(g) / (N * db) : d.Ng(g) / (N * (1.0 - db));
      }
      return L;
    }
    case Kind::treatment_fe: {
      double denom = 0.0;
      for (int g = 0; g < G; ++g) denom += d.Ng(g) * d.dbar_g(g) * (1.0 - d.dbar_g(g));
      oracle_detail::require_positive(denom, "no within-cluster treatment variation");
      for (int g = 0; g < G; ++g) {
        L(g) = d.Ng(g) * d.dbar_g(g) * (1.0 - d.dbar_g(g)) / denom;
      }
      return L;
    }
  }
  throw std::logic_error("oracle_leverage: unknown kind");
}

inline Eigen::VectorXd oracle_partial_leverage(const ExampleDesign& d) {
  using Kind = ExampleDesign::Kind;
  const int G = d.G();
  const double N = d.N();
  Eigen::VectorXd L(G);
  switch (d.kind) {
    case Kind::mean_only:
      // one regressor, nothing to partial out
      for (int g = 0; g < G; ++g) L(g) = d.Ng(g) / N;
      return L;
    case Kind::single_regressor_const: {
      const double vx = d.var_x();
      const double xb = d.xbar();
      oracle_detail::require_positive(vx, "zero variance of x");
      for (int g = 0; g < G; ++g) {
        const double dev = d.xbar_g(g) - xb;
        L(g) = d.Ng(g) * (d.var_x_g(g) + dev * dev) / (N * vx);
      }
      return L;
    }
    case Kind::single_regressor_fe:
    case Kind::treatment_fe:
      // leverage and partial leverage coincide after partialing out
      return oracle_leverage(d);
    case Kind::treatment_const: {
      const double db = d.dbar();
      oracle_detail::require_positive(db, "no treated observations");
      oracle_detail::require_positive(1.0 - db, "no control observations");
      for (int g = 0; g < G; ++g) {
        L(g) = d.Ng(g) / N * (d.dbar_g(g) / db + (db - d.dbar_g(g)) / (1.0 - db));
      }
      return L;
    }
    case Kind::cluster_level_treatment: {
      const double db = d.dbar();
      oracle_detail::require_positive(db, "no treated clusters");
      oracle_detail::require_positive(1.0 - db, "no control clusters");
      for (int g = 0; g < G; ++g) {
        L(g) = d.treated[g] ? d.Ng(g) * (1.0 - db) / (N * db)
                            : d.Ng(g) * db / (N * (1.0 - db));
      }
      return L;
    }
  }
  throw std::logic_error("oracle_partial_leverage: unknown kind");
}

// Residuals of the influence identity
//   beta^(g) - beta_hat = L_g (beta^(g) - beta_g),
// which holds exactly for the mean-only and fixed-effects designs. The
// full-sample estimate is recovered as the leverage-weighted average of the
// per-cluster estimates.
inline Eigen::VectorXd oracle_influence_identity(const ExampleDesign& d,
                                                 const Eigen::VectorXd& beta_hat_g,
                                                 const Eigen::VectorXd& beta_del) {
  using Kind = ExampleDesign::Kind;
  if (d.kind != Kind::mean_only && d.kind != Kind::single_regressor_fe) {
    throw std::invalid_argument(
        "oracle_influence_identity: only mean_only and single_regressor_fe");
  }
  const Eigen::VectorXd L = oracle_leverage(d);
  const double beta_hat = L.dot(beta_hat_g);
  Eigen::VectorXd resid(d.G());
  for (int g = 0; g < d.G(); ++g) {
    resid(g) = beta_del(g) - beta_hat - L(g) * (beta_del(g) - beta_hat_g(g));
  }
  return resid;
}

}  // namespace summclust
