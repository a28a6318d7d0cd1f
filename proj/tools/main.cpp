#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "summclust/cli.hpp"
#include "summclust/sim_harness.hpp"

namespace {

int thread_count_from_env() {
  const char* env = std::getenv("SUMMCLUST_THREADS");
  if (!env) return 0;
  const int n = std::atoi(env);
  return n > 0 ? n : 0;
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write to '" + out_path + "'");
  out << text;
}

int run_analysis_command(const summclust::AnalysisOptions& options,
                         const std::string& format, const std::string& out_path) {
  const summclust::OutputBundle bundle = summclust::run_analysis(options);
  if (format == "json") {
    write_output(summclust::export_json(bundle).dump(2) + "\n", out_path);
  } else if (format == "csv") {
    write_output(summclust::export_csv(bundle), out_path);
  } else {
    write_output(summclust::render_text(bundle), out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Cluster-level leverage, influence, and jackknife diagnostics for linear "
      "regression with one-way clustering"};
  app.require_subcommand(0, 1);

  summclust::AnalysisOptions options;
  std::string format = "text";
  std::string out_path;
  std::string xvar_csv, fevar_csv;
  double rho_value = -1.0;

  app.add_option("coef", options.spec.coef_var,
                 "Regressor whose coefficient is of interest");
  app.add_option("--data", options.data_path, "CSV file with the estimation sample");
  app.add_option("--y", options.spec.yvar, "Outcome variable");
  app.add_option("--cluster", options.spec.cluster, "Clustering variable");
  app.add_option("--xvar", xvar_csv, "Comma-separated ordinary regressors");
  app.add_option("--fevar", fevar_csv,
                 "Comma-separated factor variables, expanded to dummy sets");
  app.add_option("--absorb", options.spec.absorb,
                 "Fixed effect partialed out of y and X (must nest within clusters)");
  app.add_option("--sample", options.spec.sample_filter,
                 "Row filter, e.g. \"age>=25 & race==1\"");
  app.add_flag("--no-constant", "Suppress the constant term");
  app.add_flag("--jackknife", options.jackknife_flag, "Also report CV3J");
  app.add_flag("--table", options.table, "Print per-cluster statistics");
  app.add_flag("--svars", options.svars, "Print alternative sample means");
  app.add_flag("--gstar", options.gstar, "Print effective numbers of clusters");
  app.add_option("--rho", rho_value, "Effective clusters at this intra-cluster rho");
  app.add_option("--level", options.level, "Confidence level (default 0.95)");
  app.add_option("--bootstrap", options.bootstrap_B,
                 "Add a WCR bootstrap row with this many replications");
  app.add_flag("--bootstrap-ci", options.bootstrap_ci,
               "Invert the bootstrap test into a confidence interval");
  app.add_option("--seed", options.seed, "RNG seed for the bootstrap");
  app.add_option("--format", format, "Output format: text, json, or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--out", out_path, "Write output to this file instead of stdout");

  auto* sim = app.add_subcommand("sim", "Rejection-frequency experiments");
  summclust::BatchConfig batch;
  std::vector<double> pcs;
  std::vector<double> gamma_range;
  std::string sim_error_model = "equicorrelated";
  std::string sim_out;
  sim->add_option("--G", batch.base.G, "Number of clusters");
  sim->add_option("--N", batch.base.N, "Number of observations");
  sim->add_option("--gamma", batch.base.gamma, "Cluster-size imbalance");
  sim->add_option("--gamma-range", gamma_range,
                  "Draw gamma uniformly from [lo, hi], one draw per case")
      ->expected(2);
  sim->add_option("--pc", pcs, "Cluster-activation probabilities, cycled over cases");
  sim->add_option("--cases", batch.cases, "Number of cases (X matrices)");
  sim->add_option("--reps", batch.base.reps, "Outer replications per case");
  sim->add_option("--B", batch.base.B, "Bootstrap replications");
  sim->add_option("--level", batch.base.level, "Nominal test level");
  sim->add_option("--seed", batch.base.seed, "RNG seed");
  sim->add_option("--error-model", sim_error_model, "iid or equicorrelated")
      ->check(CLI::IsMember({"iid", "equicorrelated"}));
  sim->add_option("--rho-u", batch.base.rho_u, "Intra-cluster error correlation");
  sim->add_option("--out", sim_out, "Write the case CSV to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      if (!gamma_range.empty()) {
        batch.gamma_range = true;
        batch.gamma_lo = gamma_range[0];
        batch.gamma_hi = gamma_range[1];
      }
      batch.pcs = pcs;
      batch.threads = thread_count_from_env();
      batch.base.error_model = sim_error_model == "iid"
                                   ? summclust::SimConfig::ErrorModel::iid_normal
                                   : summclust::SimConfig::ErrorModel::equicorrelated_normal;
      const auto results = summclust::run_batch(batch);
      std::ostringstream csv;
      summclust::write_case_csv(csv, results);
      write_output(csv.str(), sim_out);
      return 0;
    }

    if (options.spec.coef_var.empty() || options.data_path.empty() ||
        options.spec.yvar.empty() || options.spec.cluster.empty()) {
      std::cerr << "error: coef, --data, --y, and --cluster are required\n";
      return 2;
    }
    options.spec.add_constant = app.count("--no-constant") == 0;
    auto split_csv = [](const std::string& s) {
      std::vector<std::string> out;
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
      }
      return out;
    };
    options.spec.xvars = split_csv(xvar_csv);
    options.spec.fevars = split_csv(fevar_csv);
    if (app.count("--rho") > 0) {
      if (rho_value < 0.0 || rho_value > 1.0) {
        std::cerr << "error: rho must be in [0,1]\n";
        return 2;
      }
      options.rho = rho_value;
    }
    return run_analysis_command(options, format, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
