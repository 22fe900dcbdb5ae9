#pragma once

#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "fedperi/evalstats/bootstrap.hpp"

namespace fedperi::evalstats {

struct Estimate {
  double point = std::numeric_limits<double>::quiet_NaN();
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
};

struct OutcomeReport {
  std::string outcome;
  bool defined = false;  // both classes present in the evaluated set
  std::size_t n = 0;
  std::size_t positives = 0;
  Estimate auroc;
  Estimate auprc;
  // AUROC p-value against a reference model, when one was compared.
  double p_vs_reference = std::numeric_limits<double>::quiet_NaN();
};

struct MetricReport {
  std::string model;  // e.g. "SCAFFOLD", "GNV Model"
  std::string site;   // site whose test records were scored
  std::size_t replicates = 0;
  double alpha = 0.05;
  std::size_t degenerate_resamples = 0;
  std::vector<OutcomeReport> outcomes;

  // Rows: model,site,outcome,metric,point,lo,hi
  std::string to_csv(bool header = true) const;
  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

// Point estimates plus joint-bootstrap percentile CIs for every outcome.
MetricReport evaluate_set(const ScoredSet& set, const BootstrapOptions& opts, std::string model);

// Fills p_vs_reference of `report` by a paired AUROC comparison.
void attach_p_values(MetricReport& report, const ScoredSet& model, const ScoredSet& reference,
                     const BootstrapOptions& opts);

const std::string& outcome_label(std::size_t k);
// "0.92 (0.91-0.93)"; "n/a" when undefined.
std::string format_estimate(const Estimate& e);
// "0.89 (0.003)"
std::string format_mean_sd(double mean, double sd);
std::string format_fixed(double v, int decimals);

// Markdown table with one row per (outcome, model) and one column per site,
// cells "AUROC (lo-hi)" with a trailing "^a" when p_vs_reference < 0.05.
// Missing (model, site) pairs print "-".
std::string markdown_table(const std::vector<MetricReport>& reports, const std::vector<std::string>& models,
                           const std::vector<std::string>& sites, const std::string& title);

}  // namespace fedperi::evalstats
