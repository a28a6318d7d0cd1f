#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "summclust/diagnostics.hpp"
#include "summclust/jackknife.hpp"
#include "summclust/ols.hpp"
#include "summclust/rng.hpp"
#include "summclust/student_t.hpp"
#include "summclust/wcr_bootstrap.hpp"

namespace summclust {

struct SimConfig {
  int G = 20;
  int N = 2000;
  double gamma = 2.0;   // cluster-size imbalance
  double p_c = 1.0;     // probability a regressor is active within a cluster
  int n_regressors = 5; // binary regressors; a constant is appended
  int reps = 1000;
  int B = 399;
  double level = 0.05;
  std::uint64_t seed = 0;

  enum class ErrorModel { iid_normal, equicorrelated_normal };
  ErrorModel error_model = ErrorModel::equicorrelated_normal;
  double rho_u = 0.5;  // intra-cluster error correlation
};

struct CaseResult {
  int case_id = 0;
  int G = 0;
  int N = 0;
  double gamma = 0.0;
  double p_c = 0.0;
  double Vs_partial = 0.0;  // scaled variance of the partial leverages
  double gstar0 = 0.0;
  double rej_cv1 = 0.0;
  double rej_cv3 = 0.0;
  double rej_wcr = 0.0;
  bool dropped = false;  // a delete-one Gram was singular
  Summary leverage_summary;
};

// N_g = [N exp(gamma g / G) / sum_h exp(gamma h / G)] for g < G; the last
// cluster absorbs the remainder so the sizes sum to N exactly.
inline std::vector<int> cluster_sizes(int N, int G, double gamma) {
  if (G < 1 || N < G) throw std::invalid_argument("cluster_sizes: need N >= G >= 1");
  if (gamma < 0.0) throw std::invalid_argument("cluster_sizes: gamma must be >= 0");
  double denom = 0.0;
  for (int h = 1; h <= G; ++h) denom += std::exp(gamma * h / G);
  std::vector<int> sizes(G);
  int used = 0;
  for (int g = 1; g < G; ++g) {
    sizes[g - 1] = static_cast<int>(std::floor(N * std::exp(gamma * g / G) / denom));
    used += sizes[g - 1];
  }
  sizes[G - 1] = N - used;
  for (int g = 0; g < G; ++g) {
    if (sizes[g] < 1) {
      throw std::invalid_argument("cluster_sizes: cluster " + std::to_string(g + 1) +
                                  " would be empty");
    }
  }
  return sizes;
}

// Regressor scheme: for each binary regressor and each cluster, the whole
// cluster is zero with probability 1 - p_c; otherwise entries are iid
// Bernoulli(0.5). A constant column is appended and the first regressor is
// the one under test. Redraws until the design has full column rank.
inline PreparedDesign generate_design(const SimConfig& config, Rng& rng) {
  const std::vector<int> sizes = cluster_sizes(config.N, config.G, config.gamma);
  const int k = config.n_regressors + 1;

  std::vector<int> cluster_ids(config.N);
  {
    int row = 0;
    for (int g = 0; g < config.G; ++g) {
      for (int i = 0; i < sizes[g]; ++i, ++row) cluster_ids[row] = g + 1;
    }
  }

  const int max_tries = 1000;
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    Eigen::MatrixXd X(config.N, k);
    X.col(k - 1).setOnes();
    for (int c = 0; c < config.n_regressors; ++c) {
      int row = 0;
      for (int g = 0; g < config.G; ++g) {
        const bool active = rng.next_bernoulli(config.p_c);
        for (int i = 0; i < sizes[g]; ++i, ++row) {
          X(row, c) = active && rng.next_bernoulli(0.5) ? 1.0 : 0.0;
        }
      }
    }
    try {
      PreparedDesign design = prepare_design(std::move(X), Eigen::VectorXd::Zero(config.N),
                                             cluster_ids, /*j=*/0);
      for (int c = 0; c < config.n_regressors; ++c) design.colnames[c] = "x" + std::to_string(c + 1);
      design.colnames[k - 1] = "_cons";
      return design;
    } catch (const std::runtime_error&) {
      // rank deficient draw, try again
    }
  }
  throw std::runtime_error("generate_design: degenerate design (rank deficient after " +
                           std::to_string(max_tries) + " draws); p_c too small?");
}

namespace sim_detail {

inline void draw_null_outcome(const SimConfig& config, const PreparedDesign& design,
                              Rng& rng, Eigen::VectorXd* y) {
  const bool equi = config.error_model == SimConfig::ErrorModel::equicorrelated_normal;
  const double a = equi ? std::sqrt(config.rho_u) : 0.0;
  const double b = equi ? std::sqrt(1.0 - config.rho_u) : 1.0;
  for (int g = 0; g < design.G; ++g) {
    const double zg = equi ? rng.next_normal() : 0.0;
    for (int r : design.cluster_rows[g]) {
      (*y)(r) = a * zg + b * rng.next_normal();
    }
  }
}

inline void refresh_moments(PreparedDesign* design) {
  design->moment.setZero();
  for (int g = 0; g < design->G; ++g) {
    const auto& idx = design->cluster_rows[g];
    auto& m = design->moment_blocks[g];
    m.setZero();
    for (int r : idx) m += design->X.row(r).transpose() * design->y(r);
    design->moment += m;
  }
}

}  // namespace sim_detail

// Rejection frequencies for CV1, CV3, and WCR tests of the true null on one
// fixed design. The design's diagnostics are recorded alongside. A case is
// flagged dropped when any delete-one Gram is singular; CV3 results are not
// meaningful then and are reported as NaN.
inline CaseResult run_case(const SimConfig& config, PreparedDesign design, int case_id) {
  CaseResult result;
  result.case_id = case_id;
  result.G = config.G;
  result.N = config.N;
  result.gamma = config.gamma;
  result.p_c = config.p_c;

  const DeleteOneSolver solver(design);
  result.dropped = solver.any_dropped();

  const Eigen::MatrixXd inv_gram = spd_inverse(design.gram);
  const Eigen::VectorXd partlev = partial_leverage(design, design.j);
  result.Vs_partial = scaled_variance(partlev).value_or(0.0);
  {
    const Eigen::VectorXd w = inv_gram.col(design.j);
    Eigen::VectorXd gamma0(design.G);
    for (int g = 0; g < design.G; ++g) gamma0(g) = w.dot(design.gram_blocks[g] * w);
    result.gstar0 = design.G / (1.0 + scaled_variance(gamma0).value_or(0.0));
  }
  result.leverage_summary = summarize(leverage(design, inv_gram));

  const double crit = student_t_critical(config.G - 1, config.level);
  const double factor = (config.G - 1.0) / config.G;

  int rej1 = 0;
  int rej3 = 0;
  int rejw = 0;
  FittedModel model;
  model.N = config.N;
  model.G = config.G;
  model.k = design.k();
  model.k_dof = design.k_dof();
  model.j = design.j;
  model.inv_gram = inv_gram;
  model.residuals.resize(config.N);
  model.scores.resize(config.G);

  for (int rep = 0; rep < config.reps; ++rep) {
    Rng rng(config.seed, static_cast<std::uint64_t>(case_id), static_cast<std::uint64_t>(rep));
    sim_detail::draw_null_outcome(config, design, rng, &design.y);
    sim_detail::refresh_moments(&design);

    model.beta = inv_gram * design.moment;
    for (int g = 0; g < design.G; ++g) {
      for (int r : design.cluster_rows[g]) {
        model.residuals(r) = design.y(r) - design.X.row(r).dot(model.beta);
      }
      model.scores[g] = design.moment_blocks[g] - design.gram_blocks[g] * model.beta;
    }

    const VarianceEstimate v1 = cv1(model);
    if (std::fabs(v1.t_j) > crit) ++rej1;

    if (!result.dropped) {
      double cv3_jj = 0.0;
      for (int g = 0; g < design.G; ++g) {
        const Eigen::VectorXd bg =
            solver.solve(g, design.moment - design.moment_blocks[g]);
        const double d = bg(design.j) - model.beta(design.j);
        cv3_jj += d * d;
      }
      const double se3 = std::sqrt(factor * cv3_jj);
      const double t3 = se3 > 0.0 ? model.beta(design.j) / se3
                                  : (model.beta(design.j) == 0.0
                                         ? 0.0
                                         : std::numeric_limits<double>::infinity());
      if (std::fabs(t3) > crit) ++rej3;
    }

    BootstrapConfig bc;
    bc.B = config.B;
    bc.seed = Rng(config.seed, case_id, rep, 0x626f6f74ULL).next_u64();
    bc.beta_0j = 0.0;
    const BootstrapResult boot = wcr_pvalue(design, model, bc);
    if (boot.p_value < config.level) ++rejw;
  }

  result.rej_cv1 = static_cast<double>(rej1) / config.reps;
  result.rej_cv3 = result.dropped ? std::numeric_limits<double>::quiet_NaN()
                                  : static_cast<double>(rej3) / config.reps;
  result.rej_wcr = static_cast<double>(rejw) / config.reps;
  return result;
}

struct BatchConfig {
  SimConfig base;
  int cases = 1;
  bool gamma_range = false;  // draw gamma uniformly from [gamma_lo, gamma_hi]
  double gamma_lo = 2.0;
  double gamma_hi = 4.0;
  std::vector<double> pcs;   // cycled across cases; empty = base.p_c
  int threads = 0;           // 0 = hardware concurrency
};

inline SimConfig case_config(const BatchConfig& batch, int case_id) {
  SimConfig config = batch.base;
  if (batch.gamma_range) {
    Rng rng(batch.base.seed, 0x67616d6dULL, static_cast<std::uint64_t>(case_id));
    config.gamma = rng.next_uniform(batch.gamma_lo, batch.gamma_hi);
  }
  if (!batch.pcs.empty()) config.p_c = batch.pcs[case_id % batch.pcs.size()];
  return config;
}

inline std::vector<CaseResult> run_batch(const BatchConfig& batch) {
  const int n_cases = batch.cases;
  std::vector<CaseResult> results(n_cases);
  int n_threads = batch.threads;
  if (n_threads <= 0) {
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
  }
  n_threads = std::min(n_threads, n_cases);

  std::atomic<int> next_case{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_threads);
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t]() {
      try {
        for (;;) {
          const int c = next_case.fetch_add(1);
          if (c >= n_cases) break;
          const SimConfig config = case_config(batch, c);
          Rng design_rng(config.seed, 0x64736e67ULL, static_cast<std::uint64_t>(c));
          PreparedDesign design = generate_design(config, design_rng);
          results[c] = run_case(config, std::move(design), c);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

inline void write_case_csv_header(std::ostream& out) {
  out << "case_id,G,N,gamma,p_c,Vs_partial,gstar0,rej_cv1,rej_cv3,rej_wcr,dropped\n";
}

inline void write_case_csv_row(std::ostream& out, const CaseResult& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                r.case_id, r.G, r.N, r.gamma, r.p_c, r.Vs_partial, r.gstar0, r.rej_cv1,
                r.rej_cv3, r.rej_wcr, r.dropped ? 1 : 0);
  out << buf;
}

inline void write_case_csv(std::ostream& out, const std::vector<CaseResult>& results) {
  write_case_csv_header(out);
  for (const auto& r : results) write_case_csv_row(out, r);
}

}  // namespace summclust
