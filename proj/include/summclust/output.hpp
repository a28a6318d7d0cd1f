#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "summclust/diagnostics.hpp"
#include "summclust/ols.hpp"

namespace summclust {

struct RegressionRow {
  std::string label;  // CV1 | CV3 | CV3J | WCR bootstrap
  std::optional<double> coeff;
  std::optional<double> se;
  std::optional<double> t;
  std::optional<double> p;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
};

struct GstarBlock {
  double gstar0 = 0.0;
  std::optional<double> gstar1;
  std::optional<double> gstar_rho;
  std::optional<double> rho;
};

struct OutputBundle {
  std::string coef_name;
  std::string cluster_name;
  int N = 0;
  int G = 0;
  int k = 0;

  std::vector<RegressionRow> regression;

  // Cluster variability; the partial-leverage and beta-no-g columns are
  // absent when absorb/cluster nesting failed.
  Summary ng_summary;
  Summary lev_summary;
  std::optional<Summary> partlev_summary;
  std::optional<Summary> betanog_summary;

  // Per-cluster table (populated when requested).
  bool with_table = false;
  std::vector<std::string> cluster_labels;
  std::vector<int> ng;
  std::vector<double> lev;
  std::vector<double> partlev;
  std::vector<double> betanog;

  // Alternative means (populated when requested).
  bool with_alt_means = false;
  AltMeans ng_means, lev_means, partlev_means, betanog_means;

  std::optional<GstarBlock> gstar;
  std::vector<std::string> warnings;
};

namespace render_detail {

inline std::string fixed(double v, int digits = 6) {
  if (std::isnan(v)) return ".";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string opt_fixed(const std::optional<double>& v, int digits = 6) {
  return v ? fixed(*v, digits) : std::string(".");
}

inline std::string pad(const std::string& s, int width) {
  if (static_cast<int>(s.size()) >= width) return s;
  return std::string(width - s.size(), ' ') + s;
}

inline void summary_rows(std::ostringstream& out, const char* label,
                         const std::vector<std::string>& cells) {
  out << pad(label, 10) << " |";
  for (const auto& c : cells) out << pad(c, 14);
  out << "\n";
}

}  // namespace render_detail

inline std::string render_text(const OutputBundle& bundle) {
  using render_detail::fixed;
  using render_detail::opt_fixed;
  using render_detail::pad;
  std::ostringstream out;

  out << "Cluster summary statistics for " << bundle.coef_name
      << " when clustered by " << bundle.cluster_name << ".\n";
  out << "There are " << bundle.N << " observations within " << bundle.G << " "
      << bundle.cluster_name << " clusters.\n\n";

  for (const auto& w : bundle.warnings) out << "Warning: " << w << "\n";
  if (!bundle.warnings.empty()) out << "\n";

  out << "Regression Output\n";
  out << pad("s.e.", 14) << " |" << pad("Coeff", 12) << pad("Sd. Err.", 12)
      << pad("t-stat", 12) << pad("P value", 12) << pad("CI-lower", 12)
      << pad("CI-upper", 12) << "\n";
  out << std::string(15, '-') << "+" << std::string(72, '-') << "\n";
  for (const auto& row : bundle.regression) {
    out << pad(row.label, 14) << " |" << pad(opt_fixed(row.coeff), 12)
        << pad(opt_fixed(row.se), 12) << pad(opt_fixed(row.t, 4), 12)
        << pad(opt_fixed(row.p, 4), 12) << pad(opt_fixed(row.ci_lower), 12)
        << pad(opt_fixed(row.ci_upper), 12) << "\n";
  }
  out << "\n";

  const bool have_part = bundle.partlev_summary.has_value();
  out << "Cluster Variability\n";
  out << pad("Statistic", 10) << " |" << pad("Ng", 14) << pad("Leverage", 14);
  if (have_part) out << pad("Partial L.", 14) << pad("beta no g", 14);
  out << "\n";
  out << std::string(11, '-') << "+" << std::string(have_part ? 56 : 28, '-') << "\n";
  auto stat_row = [&](const char* label, auto pick) {
    std::vector<std::string> cells;
    cells.push_back(fixed(pick(bundle.ng_summary), 2));
    cells.push_back(fixed(pick(bundle.lev_summary)));
    if (have_part) {
      cells.push_back(fixed(pick(*bundle.partlev_summary)));
      cells.push_back(fixed(pick(*bundle.betanog_summary)));
    }
    render_detail::summary_rows(out, label, cells);
  };
  stat_row("min", [](const Summary& s) { return s.min; });
  stat_row("q1", [](const Summary& s) { return s.q1; });
  stat_row("median", [](const Summary& s) { return s.median; });
  stat_row("mean", [](const Summary& s) { return s.mean; });
  stat_row("q3", [](const Summary& s) { return s.q3; });
  stat_row("max", [](const Summary& s) { return s.max; });
  {
    auto cv = [](const Summary& s) {
      return s.coefvar ? *s.coefvar : std::numeric_limits<double>::quiet_NaN();
    };
    std::vector<std::string> cells;
    cells.push_back(fixed(cv(bundle.ng_summary), 2));
    cells.push_back(fixed(cv(bundle.lev_summary)));
    if (have_part) {
      cells.push_back(fixed(cv(*bundle.partlev_summary)));
      cells.push_back(fixed(cv(*bundle.betanog_summary)));
    }
    render_detail::summary_rows(out, "coefvar", cells);
  }
  out << "\n";

  if (bundle.with_table) {
    const bool formatted = bundle.G <= 52;
    if (formatted) {
      out << "Cluster by Cluster Statistics\n";
      out << pad(bundle.cluster_name, 12) << " |" << pad("Ng", 8) << pad("Leverage", 14)
          << pad("Partial L.", 14) << pad("beta no g", 14) << "\n";
      out << std::string(13, '-') << "+" << std::string(50, '-') << "\n";
      for (int g = 0; g < bundle.G; ++g) {
        out << pad(bundle.cluster_labels[g], 12) << " |"
            << pad(std::to_string(bundle.ng[g]), 8) << pad(fixed(bundle.lev[g]), 14)
            << pad(fixed(bundle.partlev[g]), 14) << pad(fixed(bundle.betanog[g]), 14)
            << "\n";
      }
    } else {
      out << "Cluster by Cluster Statistics (unformatted: label Ng leverage "
             "partial_leverage beta_no_g)\n";
      for (int g = 0; g < bundle.G; ++g) {
        out << bundle.cluster_labels[g] << " " << bundle.ng[g] << " "
            << fixed(bundle.lev[g]) << " " << fixed(bundle.partlev[g]) << " "
            << fixed(bundle.betanog[g]) << "\n";
      }
    }
    out << "\n";
  }

  if (bundle.with_alt_means) {
    out << "Alternative Sample Means and Ratios to Arithmetic Mean\n";
    out << pad("", 16) << " |" << pad("Ng", 14) << pad("Leverage", 14)
        << pad("Partial L.", 14) << pad("beta no g", 14) << "\n";
    out << std::string(17, '-') << "+" << std::string(56, '-') << "\n";
    auto mean_row = [&](const char* label, auto pick) {
      out << pad(label, 16) << " |" << pad(opt_fixed(pick(bundle.ng_means), 3), 14)
          << pad(opt_fixed(pick(bundle.lev_means)), 14)
          << pad(opt_fixed(pick(bundle.partlev_means)), 14)
          << pad(opt_fixed(pick(bundle.betanog_means)), 14) << "\n";
    };
    mean_row("Harmonic Mean", [](const AltMeans& m) { return m.harmonic; });
    mean_row("Harmonic Ratio", [](const AltMeans& m) { return m.harmonic_ratio; });
    mean_row("Geometric Mean", [](const AltMeans& m) { return m.geometric; });
    mean_row("Geometric Ratio", [](const AltMeans& m) { return m.geometric_ratio; });
    mean_row("Quadratic Mean",
             [](const AltMeans& m) { return std::optional<double>(m.quadratic); });
    mean_row("Quadratic Ratio", [](const AltMeans& m) { return m.quadratic_ratio; });
    out << "\n";
  }

  if (bundle.gstar) {
    auto gstar_line = [&](const std::string& arg, double value) {
      char head[32];
      std::snprintf(head, sizeof(head), "G*(%s)", arg.c_str());
      char line[96];
      std::snprintf(line, sizeof(line), "%-8s=  %s\n", head, fixed(value, 3).c_str());
      out << line;
    };
    auto rho_label = [&]() {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", *bundle.gstar->rho);
      return std::string(buf);
    };
    out << "Effective Number of Clusters\n";
    out << std::string(29, '-') << "\n";
    gstar_line("0", bundle.gstar->gstar0);
    if (bundle.gstar->rho && bundle.gstar->gstar_rho) {
      gstar_line(rho_label(), *bundle.gstar->gstar_rho);
    } else if (bundle.gstar->rho) {
      out << "G*(" << rho_label()
          << ") cannot be computed with nested fixed effects\n";
    }
    if (bundle.gstar->gstar1) gstar_line("1", *bundle.gstar->gstar1);
    out << std::string(29, '-') << "\n";
  }

  return out.str();
}

namespace render_detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v || std::isnan(*v)) return nullptr;
  return *v;
}

inline void add_cv_keys(nlohmann::json* j, const std::string& prefix,
                        const RegressionRow& row) {
  (*j)[prefix + "se"] = opt_json(row.se);
  (*j)[prefix + "t"] = opt_json(row.t);
  (*j)[prefix + "p"] = opt_json(row.p);
  (*j)[prefix + "lci"] = opt_json(row.ci_lower);
  (*j)[prefix + "uci"] = opt_json(row.ci_upper);
}

}  // namespace render_detail

// Stored-results view: scalar keys beta, cv1se, cv1t, ... cv3J*, gstar*,
// plus the per-cluster arrays ng, leverage, partlev, betanog.
inline nlohmann::json export_json(const OutputBundle& bundle) {
  nlohmann::json j;
  j["coef"] = bundle.coef_name;
  j["cluster"] = bundle.cluster_name;
  j["N"] = bundle.N;
  j["G"] = bundle.G;
  j["k"] = bundle.k;
  for (const auto& row : bundle.regression) {
    if (row.coeff) j["beta"] = *row.coeff;
    if (row.label == "CV1") {
      render_detail::add_cv_keys(&j, "cv1", row);
    } else if (row.label == "CV3") {
      render_detail::add_cv_keys(&j, "cv3", row);
    } else if (row.label == "CV3J") {
      render_detail::add_cv_keys(&j, "cv3J", row);
    } else if (row.label == "WCR bootstrap") {
      j["wcrp"] = render_detail::opt_json(row.p);
      j["wcrlci"] = render_detail::opt_json(row.ci_lower);
      j["wcruci"] = render_detail::opt_json(row.ci_upper);
    }
  }
  if (bundle.gstar) {
    j["gstarzero"] = bundle.gstar->gstar0;
    j["gstarone"] = render_detail::opt_json(bundle.gstar->gstar1);
    j["gstarrho"] = render_detail::opt_json(bundle.gstar->gstar_rho);
  }
  j["ng"] = bundle.ng;
  if (!bundle.lev.empty()) j["leverage"] = bundle.lev;
  if (!bundle.partlev.empty()) j["partlev"] = bundle.partlev;
  if (!bundle.betanog.empty()) j["betanog"] = bundle.betanog;
  j["warnings"] = bundle.warnings;
  return j;
}

// Long-format CSV: name,index,value with full precision. Arrays carry a
// 1-based index; scalars leave it empty.
inline std::string export_csv(const OutputBundle& bundle) {
  std::ostringstream out;
  out << "name,index,value\n";
  char buf[64];
  auto scalar = [&](const std::string& name, const std::optional<double>& v) {
    if (!v || std::isnan(*v)) return;
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    out << name << ",," << buf << "\n";
  };
  const nlohmann::json j = export_json(bundle);
  for (const auto& [key, value] : j.items()) {
    if (value.is_number()) {
      scalar(key, value.get<double>());
    } else if (value.is_array() && key != "warnings") {
      int idx = 1;
      for (const auto& v : value) {
        std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
        out << key << "," << idx++ << "," << buf << "\n";
      }
    }
  }
  return out.str();
}

}  // namespace summclust
