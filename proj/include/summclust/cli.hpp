#pragma once

#include <optional>
#include <string>
#include <vector>

#include "summclust/dataset.hpp"
#include "summclust/design.hpp"
#include "summclust/diagnostics.hpp"
#include "summclust/filter.hpp"
#include "summclust/jackknife.hpp"
#include "summclust/model_spec.hpp"
#include "summclust/ols.hpp"
#include "summclust/output.hpp"
#include "summclust/wcr_bootstrap.hpp"

namespace summclust {

struct AnalysisOptions {
  std::string data_path;
  ModelSpec spec;
  bool jackknife_flag = false;  // add the CV3J row
  bool table = false;
  bool svars = false;
  bool gstar = false;
  std::optional<double> rho;
  double level = 0.95;
  int bootstrap_B = 0;  // 0 = no bootstrap row
  bool bootstrap_ci = false;
  std::uint64_t seed = 0;
};

// Runs the whole pipeline: load, filter, nesting validation, design
// construction, OLS, CV1/CV3(/CV3J), diagnostics, and the optional effective
// cluster counts and bootstrap row. On an absorb/cluster nesting violation
// the partial-leverage, delete-one, and jackknife quantities are withheld
// and CV1 is still reported.
inline OutputBundle run_analysis(const AnalysisOptions& options) {
  const ModelSpec& spec = options.spec;

  std::vector<std::string> used;
  used.push_back(spec.yvar);
  used.push_back(spec.coef_var);
  for (const auto& x : spec.xvars) used.push_back(x);
  for (const auto& f : spec.fevars) used.push_back(f);
  if (spec.has_absorb()) used.push_back(spec.absorb);
  used.push_back(spec.cluster);
  if (!spec.sample_filter.empty()) {
    for (const auto& c : filter_columns(spec.sample_filter)) used.push_back(c);
  }

  Dataset data = load_csv(options.data_path, used);
  OutputBundle bundle;
  if (data.dropped_missing > 0) {
    bundle.warnings.push_back(std::to_string(data.dropped_missing) +
                              " observation(s) dropped due to missing values");
  }
  if (!spec.sample_filter.empty()) {
    data = apply_sample_filter(data, spec.sample_filter);
  }
  if (data.n_rows() == 0) throw std::runtime_error("no observations after filtering");

  bool nesting_ok = true;
  if (spec.has_absorb()) {
    const auto report = validate_absorb_nesting(data, spec);
    if (!report.ok) {
      nesting_ok = false;
      std::string msg = "absorb variable '" + spec.absorb +
                        "' is not nested within clusters (offending levels:";
      for (const auto& l : report.offending_levels) msg += " " + l;
      msg += "); partial leverage, delete-one estimates, CV3, and CV3J are not available";
      bundle.warnings.push_back(msg);
    }
  }

  const PreparedDesign design = build_design(data, spec, /*enforce_absorb_nesting=*/false);
  const FittedModel model = fit_ols(design);

  bundle.coef_name = spec.coef_var;
  bundle.cluster_name = spec.cluster;
  bundle.N = design.N();
  bundle.G = design.G;
  bundle.k = design.k();
  for (const auto& name : design.dropped_collinear) {
    bundle.warnings.push_back("dropped collinear column '" + name + "'");
  }

  const VarianceEstimate v1 = cv1(model, 0.0, options.level);
  auto push_row = [&](const VarianceEstimate& v) {
    RegressionRow row;
    row.label = cv_label(v.kind);
    row.coeff = model.beta(model.j);
    row.se = v.se_j;
    row.t = v.t_j;
    row.p = v.p_j;
    row.ci_lower = v.ci_lower_j;
    row.ci_upper = v.ci_upper_j;
    bundle.regression.push_back(row);
  };
  push_row(v1);

  bundle.cluster_labels = design.cluster_labels;
  bundle.ng = design.Ng;

  if (nesting_ok) {
    const JackknifeResult jack =
        jackknife(design, model, options.jackknife_flag, 0.0, options.level);
    push_row(jack.cv3);
    if (jack.cv3j) push_row(*jack.cv3j);
    for (int g = 0; g < design.G; ++g) {
      if (jack.zeroed[g]) {
        bundle.warnings.push_back(
            "coefficient of interest is not identified when cluster '" +
            design.cluster_labels[g] + "' is omitted; its delete-one estimate was set to 0");
      }
    }

    const ClusterDiagnostics diag =
        compute_cluster_diagnostics(design, model, jack.beta_del);
    bundle.ng_summary = diag.ng_summary;
    bundle.lev_summary = diag.lev_summary;
    bundle.partlev_summary = diag.partlev_summary;
    bundle.betanog_summary = diag.betanog_summary;
    bundle.lev.assign(diag.L.data(), diag.L.data() + design.G);
    bundle.partlev.assign(diag.Lpart.data(), diag.Lpart.data() + design.G);
    bundle.betanog.assign(diag.beta_del_j.data(), diag.beta_del_j.data() + design.G);

    if (options.svars) {
      bundle.with_alt_means = true;
      bundle.ng_means = diag.ng_means;
      bundle.lev_means = diag.lev_means;
      bundle.partlev_means = diag.partlev_means;
      bundle.betanog_means = diag.betanog_means;
    }
    if (options.table) bundle.with_table = true;

    if (options.gstar || options.rho) {
      const EffectiveClusters ec = effective_clusters(design, model, options.rho);
      GstarBlock block;
      block.gstar0 = ec.gstar0;
      block.gstar1 = ec.gstar1;
      block.gstar_rho = ec.gstar_rho;
      if (options.rho) block.rho = *options.rho;
      bundle.gstar = block;
    }

    if (options.bootstrap_B > 0) {
      BootstrapConfig bc;
      bc.B = options.bootstrap_B;
      bc.seed = options.seed;
      bc.level = 1.0 - options.level;
      const BootstrapResult boot = wcr_pvalue(design, model, bc);
      RegressionRow row;
      row.label = "WCR bootstrap";
      row.coeff = model.beta(model.j);
      row.p = boot.p_value;
      if (options.bootstrap_ci) {
        bc.ci = true;
        const auto ci = wcr_ci(design, model, bc);
        row.ci_lower = ci.first;
        row.ci_upper = ci.second;
      }
      bundle.regression.push_back(row);
    }
  } else {
    Eigen::VectorXd ng(design.G);
    for (int g = 0; g < design.G; ++g) ng(g) = design.Ng[g];
    bundle.ng_summary = summarize(ng);
    const Eigen::VectorXd lev = leverage(design, model);
    bundle.lev_summary = summarize(lev);
    bundle.lev.assign(lev.data(), lev.data() + design.G);
    if (options.table || options.svars || options.gstar || options.rho ||
        options.bootstrap_B > 0) {
      bundle.warnings.push_back(
          "per-cluster tables, alternative means, G*, and bootstrap output are "
          "suppressed because of the nesting violation");
    }
  }

  return bundle;
}

}  // namespace summclust
