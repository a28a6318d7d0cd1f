#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "summclust/dataset.hpp"
#include "summclust/linalg.hpp"
#include "summclust/model_spec.hpp"

namespace summclust {

// Numeric design with its cluster partition and the per-cluster building
// blocks X_g'X_g and X_g'y_g from which everything downstream is assembled.
struct PreparedDesign {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;                           // N x k, full column rank
  std::vector<int> cluster_of_row;             // 0..G-1
  std::vector<std::vector<int>> cluster_rows;  // row indices per cluster
  std::vector<std::string> cluster_labels;
  int G = 0;
  std::vector<int> Ng;

  Eigen::MatrixXd gram;                        // X'X
  Eigen::VectorXd moment;                      // X'y
  std::vector<Eigen::MatrixXd> gram_blocks;    // X_g'X_g
  std::vector<Eigen::VectorXd> moment_blocks;  // X_g'y_g

  bool absorbed = false;
  int n_absorbed_levels = 0;  // absorbed fixed effects, counted in dof corrections
  bool fe_nested = false;     // absorb set, or a fevar nested within clusters
  int j = 0;                  // column of the coefficient of interest
  std::vector<std::string> colnames;
  std::vector<std::string> dropped_collinear;

  int N() const { return static_cast<int>(y.size()); }
  int k() const { return static_cast<int>(X.cols()); }
  // Parameters counted by small-sample corrections, absorbed effects included.
  int k_dof() const { return k() + n_absorbed_levels; }

  Eigen::MatrixXd rows_of(int g) const {
    const auto& idx = cluster_rows[g];
    Eigen::MatrixXd out(idx.size(), X.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(r) = X.row(idx[r]);
    return out;
  }
  Eigen::VectorXd y_of(int g) const {
    const auto& idx = cluster_rows[g];
    Eigen::VectorXd out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out(r) = y(idx[r]);
    return out;
  }
};

struct AbsorbNestingReport {
  bool ok = true;
  std::vector<std::string> offending_levels;  // absorb levels spanning clusters
};

// The absorb variable nests within clusters when every absorb level maps to
// exactly one cluster level; only then are delete-one-cluster quantities
// computable from the partialed-out data.
inline AbsorbNestingReport validate_absorb_nesting(const Dataset& data,
                                                   const ModelSpec& spec) {
  if (!spec.has_absorb()) {
    throw std::invalid_argument("validate_absorb_nesting: absorb not set");
  }
  const GroupCodes absorb = group_codes(data, spec.absorb);
  const GroupCodes cluster = group_codes(data, spec.cluster);
  std::vector<int> seen(absorb.n_levels(), -1);
  std::vector<bool> bad(absorb.n_levels(), false);
  for (std::size_t r = 0; r < absorb.codes.size(); ++r) {
    const int a = absorb.codes[r];
    const int c = cluster.codes[r];
    if (seen[a] < 0) {
      seen[a] = c;
    } else if (seen[a] != c) {
      bad[a] = true;
    }
  }
  AbsorbNestingReport report;
  for (int a = 0; a < absorb.n_levels(); ++a) {
    if (bad[a]) {
      report.ok = false;
      report.offending_levels.push_back(absorb.labels[a]);
    }
  }
  return report;
}

namespace detail {

// True when every level of the variable lies inside a single cluster.
inline bool nested_within_clusters(const GroupCodes& var, const GroupCodes& cluster) {
  std::vector<int> seen(var.n_levels(), -1);
  for (std::size_t r = 0; r < var.codes.size(); ++r) {
    const int v = var.codes[r];
    if (seen[v] < 0) {
      seen[v] = cluster.codes[r];
    } else if (seen[v] != cluster.codes[r]) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Wraps an already-numeric design. Cluster ids are remapped to 0..G-1 in
// first-appearance order; throws if X is rank deficient.
inline PreparedDesign prepare_design(Eigen::MatrixXd X, Eigen::VectorXd y,
                                     const std::vector<int>& cluster_ids, int j = 0) {
  const int n = static_cast<int>(X.rows());
  if (n != y.size() || n != static_cast<int>(cluster_ids.size())) {
    throw std::invalid_argument("prepare_design: mismatched lengths");
  }
  if (j < 0 || j >= X.cols()) throw std::invalid_argument("prepare_design: bad j");

  PreparedDesign design;
  design.X = std::move(X);
  design.y = std::move(y);
  design.j = j;
  design.cluster_of_row.resize(n);
  std::unordered_map<int, int> remap;
  for (int r = 0; r < n; ++r) {
    auto it = remap.find(cluster_ids[r]);
    if (it == remap.end()) {
      it = remap.emplace(cluster_ids[r], static_cast<int>(design.cluster_labels.size())).first;
      design.cluster_labels.push_back(std::to_string(cluster_ids[r]));
      design.cluster_rows.emplace_back();
    }
    design.cluster_of_row[r] = it->second;
    design.cluster_rows[it->second].push_back(r);
  }
  design.G = static_cast<int>(design.cluster_labels.size());
  design.Ng.resize(design.G);
  for (int g = 0; g < design.G; ++g) {
    design.Ng[g] = static_cast<int>(design.cluster_rows[g].size());
  }

  const int k = design.k();
  design.colnames.resize(k);
  for (int c = 0; c < k; ++c) design.colnames[c] = "x" + std::to_string(c + 1);
  design.gram_blocks.resize(design.G);
  design.moment_blocks.resize(design.G);
  design.gram = Eigen::MatrixXd::Zero(k, k);
  design.moment = Eigen::VectorXd::Zero(k);
  for (int g = 0; g < design.G; ++g) {
    const Eigen::MatrixXd Xg = design.rows_of(g);
    const Eigen::VectorXd yg = design.y_of(g);
    design.gram_blocks[g] = Xg.transpose() * Xg;
    design.moment_blocks[g] = Xg.transpose() * yg;
    design.gram += design.gram_blocks[g];
    design.moment += design.moment_blocks[g];
  }
  if (!detect_rank(design.gram, 1e-10).dropped.empty()) {
    throw std::runtime_error("prepare_design: rank-deficient design");
  }
  return design;
}

// Expands a ModelSpec into a numeric design: factor variables become full dummy
// sets, absorbed fixed effects are partialed out as deviations from group
// means, collinear columns are dropped (keeping first occurrences), and the
// per-cluster Gram and moment blocks are accumulated in cluster order.
inline PreparedDesign build_design(const Dataset& data, const ModelSpec& spec,
                                   bool enforce_absorb_nesting = true) {
  validate_model_spec(data, spec);
  const std::size_t n = data.n_rows();
  if (n == 0) throw std::invalid_argument("build_design: no observations");

  if (spec.has_absorb() && enforce_absorb_nesting) {
    const auto report = validate_absorb_nesting(data, spec);
    if (!report.ok) {
      std::string msg = "absorb variable '" + spec.absorb +
                        "' is not nested within clusters; offending levels:";
      for (const auto& l : report.offending_levels) msg += " " + l;
      throw std::runtime_error(msg);
    }
  }

  PreparedDesign design;
  const GroupCodes cluster = group_codes(data, spec.cluster);
  design.G = cluster.n_levels();
  design.cluster_labels = cluster.labels;
  design.cluster_of_row = cluster.codes;
  design.cluster_rows.resize(design.G);
  for (std::size_t r = 0; r < n; ++r) {
    design.cluster_rows[cluster.codes[r]].push_back(static_cast<int>(r));
  }
  design.Ng.resize(design.G);
  for (int g = 0; g < design.G; ++g) {
    design.Ng[g] = static_cast<int>(design.cluster_rows[g].size());
    if (design.Ng[g] == 0) {
      throw std::runtime_error("empty cluster '" + cluster.labels[g] + "'");
    }
  }

  // Assemble raw columns: coefficient of interest, ordinary regressors,
  // optional constant, then one full dummy set per factor variable.
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> cols;
  auto push_numeric = [&](const std::string& name) {
    const Column& c = data.column(name);
    cols.emplace_back(Eigen::Map<const Eigen::VectorXd>(c.values.data(), n));
    names.push_back(name);
  };
  push_numeric(spec.coef_var);
  for (const auto& x : spec.xvars) push_numeric(x);
  if (spec.effective_add_constant()) {
    cols.emplace_back(Eigen::VectorXd::Ones(n));
    names.push_back("_cons");
  }
  design.fe_nested = spec.has_absorb();
  for (const auto& f : spec.fevars) {
    const GroupCodes fe = group_codes(data, f);
    if (detail::nested_within_clusters(fe, cluster)) design.fe_nested = true;
    for (int l = 0; l < fe.n_levels(); ++l) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
      for (std::size_t r = 0; r < n; ++r) {
        if (fe.codes[r] == l) d(r) = 1.0;
      }
      cols.push_back(std::move(d));
      names.push_back(f + "=" + fe.labels[l]);
    }
  }

  design.y = Eigen::Map<const Eigen::VectorXd>(data.column(spec.yvar).values.data(), n);

  // Partial out the absorbed fixed effects: replace y and every column of X
  // by deviations from the absorb-group means.
  if (spec.has_absorb()) {
    const GroupCodes absorb = group_codes(data, spec.absorb);
    design.absorbed = true;
    design.n_absorbed_levels = absorb.n_levels();
    const int L = absorb.n_levels();
    std::vector<double> count(L, 0.0);
    for (std::size_t r = 0; r < n; ++r) count[absorb.codes[r]] += 1.0;
    auto demean = [&](Eigen::VectorXd& v) {
      std::vector<double> mean(L, 0.0);
      for (std::size_t r = 0; r < n; ++r) mean[absorb.codes[r]] += v(r);
      for (int l = 0; l < L; ++l) mean[l] /= count[l];
      for (std::size_t r = 0; r < n; ++r) v(r) -= mean[absorb.codes[r]];
    };
    demean(design.y);
    for (auto& c : cols) demean(c);
  }

  const int k0 = static_cast<int>(cols.size());
  Eigen::MatrixXd X0(n, k0);
  for (int c = 0; c < k0; ++c) X0.col(c) = cols[c];

  // Rank check on the full Gram; later collinear columns are dropped.
  const Eigen::MatrixXd gram0 = X0.transpose() * X0;
  const RankResult rank = detect_rank(gram0, 1e-10);
  for (int d : rank.dropped) {
    if (d == 0) {
      throw std::runtime_error("coefficient of interest '" + spec.coef_var +
                               "' is collinear or degenerate in the design");
    }
    design.dropped_collinear.push_back(names[d]);
  }
  const int k = static_cast<int>(rank.kept.size());
  design.X.resize(n, k);
  design.colnames.resize(k);
  for (int c = 0; c < k; ++c) {
    design.X.col(c) = X0.col(rank.kept[c]);
    design.colnames[c] = names[rank.kept[c]];
  }
  design.j = 0;

  design.gram_blocks.resize(design.G);
  design.moment_blocks.resize(design.G);
  design.gram = Eigen::MatrixXd::Zero(k, k);
  design.moment = Eigen::VectorXd::Zero(k);
  for (int g = 0; g < design.G; ++g) {
    const Eigen::MatrixXd Xg = design.rows_of(g);
    const Eigen::VectorXd yg = design.y_of(g);
    design.gram_blocks[g] = Xg.transpose() * Xg;
    design.moment_blocks[g] = Xg.transpose() * yg;
    design.gram += design.gram_blocks[g];
    design.moment += design.moment_blocks[g];
  }
  return design;
}

}  // namespace summclust
