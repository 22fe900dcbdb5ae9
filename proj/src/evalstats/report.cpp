#include "fedperi/evalstats/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/stats.hpp"

namespace fedperi::evalstats {

namespace {

nlohmann::json number(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

double read_number(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

nlohmann::json estimate_json(const Estimate& e) {
  return {{"point", number(e.point)}, {"lo", number(e.lo)}, {"hi", number(e.hi)}};
}

Estimate estimate_from(const nlohmann::json& j) {
  return {read_number(j.at("point")), read_number(j.at("lo")), read_number(j.at("hi"))};
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

const std::string& outcome_label(std::size_t k) {
  static const std::array<std::string, preprocess::kNumOutcomes> labels = {
      "Prolonged ICU stay",
      "Prolonged mechanical ventilation",
      "Neurological complications, including delirium",
      "Cardiovascular complication",
      "Acute kidney injury",
      "Venous thromboembolism",
      "Sepsis",
      "Wound complications",
      "Hospital mortality",
  };
  if (k >= labels.size()) throw ContractError("outcome_label: index out of range");
  return labels[k];
}

std::string format_fixed(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string format_estimate(const Estimate& e) {
  if (std::isnan(e.point)) return "n/a";
  return format_fixed(e.point, 2) + " (" + format_fixed(e.lo, 2) + "-" + format_fixed(e.hi, 2) + ")";
}

std::string format_mean_sd(double mean, double sd) {
  if (std::isnan(mean)) return "n/a";
  return format_fixed(mean, 2) + " (" + format_fixed(sd, 3) + ")";
}

MetricReport evaluate_set(const ScoredSet& set, const BootstrapOptions& opts, std::string model) {
  set.validate();
  MetricReport r;
  r.model = std::move(model);
  r.site = set.site;
  r.replicates = opts.replicates;
  r.alpha = opts.alpha;
  const std::size_t k = set.n_outcomes;
  const ReplicateMatrix m = bootstrap_replicates(set, opts);
  r.degenerate_resamples = m.degenerate;

  for (std::size_t j = 0; j < k; ++j) {
    OutcomeReport o;
    o.outcome = j < preprocess::kNumOutcomes ? preprocess::outcome_names()[j] : std::to_string(j);
    const auto scores = set.score_column(j);
    const auto labels = set.label_column(j);
    o.n = labels.size();
    o.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
    o.defined = o.positives > 0 && o.positives < o.n;
    if (o.defined) {
      o.auroc.point = auroc(scores, labels);
      o.auprc.point = auprc(scores, labels);
      for (int metric = 0; metric < 2; ++metric) {
        std::vector<double> v(m.replicates);
        for (std::size_t b = 0; b < m.replicates; ++b) v[b] = m.at(b, static_cast<std::size_t>(metric) * k + j);
        std::sort(v.begin(), v.end());
        Estimate& e = metric == 0 ? o.auroc : o.auprc;
        e.lo = percentile_sorted(v, opts.alpha / 2.0);
        e.hi = percentile_sorted(v, 1.0 - opts.alpha / 2.0);
      }
    }
    r.outcomes.push_back(std::move(o));
  }
  return r;
}

void attach_p_values(MetricReport& report, const ScoredSet& model, const ScoredSet& reference,
                     const BootstrapOptions& opts) {
  const auto p = compare_models(model, reference, Metric::Auroc, opts);
  if (p.size() != report.outcomes.size()) throw ContractError("attach_p_values: outcome count mismatch");
  for (std::size_t j = 0; j < p.size(); ++j) report.outcomes[j].p_vs_reference = p[j];
}

std::string MetricReport::to_csv(bool header) const {
  std::ostringstream out;
  if (header) out << "model,site,outcome,metric,point,lo,hi\n";
  for (const OutcomeReport& o : outcomes) {
    for (int metric = 0; metric < 2; ++metric) {
      const Estimate& e = metric == 0 ? o.auroc : o.auprc;
      out << model << ',' << site << ',' << o.outcome << ',' << (metric == 0 ? "auroc" : "auprc") << ','
          << csv_number(e.point) << ',' << csv_number(e.lo) << ',' << csv_number(e.hi) << '\n';
    }
  }
  return out.str();
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json outs = nlohmann::json::array();
  for (const OutcomeReport& o : outcomes)
    outs.push_back({{"outcome", o.outcome},
                    {"defined", o.defined},
                    {"n", o.n},
                    {"positives", o.positives},
                    {"auroc", estimate_json(o.auroc)},
                    {"auprc", estimate_json(o.auprc)},
                    {"p_vs_reference", number(o.p_vs_reference)}});
  return {{"model", model},
          {"site", site},
          {"replicates", replicates},
          {"alpha", alpha},
          {"degenerate_resamples", degenerate_resamples},
          {"outcomes", outs}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  try {
    j.at("model").get_to(r.model);
    j.at("site").get_to(r.site);
    j.at("replicates").get_to(r.replicates);
    j.at("alpha").get_to(r.alpha);
    j.at("degenerate_resamples").get_to(r.degenerate_resamples);
    for (const auto& o : j.at("outcomes")) {
      OutcomeReport x;
      o.at("outcome").get_to(x.outcome);
      o.at("defined").get_to(x.defined);
      o.at("n").get_to(x.n);
      o.at("positives").get_to(x.positives);
      x.auroc = estimate_from(o.at("auroc"));
      x.auprc = estimate_from(o.at("auprc"));
      x.p_vs_reference = read_number(o.at("p_vs_reference"));
      r.outcomes.push_back(std::move(x));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric report: ") + e.what());
  }
  return r;
}

std::string markdown_table(const std::vector<MetricReport>& reports, const std::vector<std::string>& models,
                           const std::vector<std::string>& sites, const std::string& title) {
  auto find = [&](const std::string& model, const std::string& site) -> const MetricReport* {
    for (const MetricReport& r : reports)
      if (r.model == model && r.site == site) return &r;
    return nullptr;
  };
  std::size_t k = 0;
  for (const MetricReport& r : reports) k = std::max(k, r.outcomes.size());

  std::ostringstream out;
  if (!title.empty()) out << "### " << title << "\n\n";
  out << "| Outcome | Model |";
  for (const std::string& s : sites) out << ' ' << s << " test data |";
  out << "\n|---|---|";
  for (std::size_t i = 0; i < sites.size(); ++i) out << "---|";
  out << '\n';
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
      out << "| " << (mi == 0 ? outcome_label(j) : std::string()) << " | " << models[mi] << " |";
      for (const std::string& s : sites) {
        const MetricReport* r = find(models[mi], s);
        if (r == nullptr || j >= r->outcomes.size()) {
          out << " - |";
          continue;
        }
        const OutcomeReport& o = r->outcomes[j];
        out << ' ' << format_estimate(o.auroc);
        if (o.p_vs_reference < 0.05) out << " ^a";
        out << " |";
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace fedperi::evalstats
