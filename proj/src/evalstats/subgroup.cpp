#include "fedperi/evalstats/subgroup.hpp"

#include <cmath>
#include <limits>
#include <iostream>
#include <sstream>

#include "fedperi/common/errors.hpp"

namespace fedperi::evalstats {

std::string to_string(Partition p) {
  switch (p) {
    case Partition::Sex: return "sex";
    case Partition::Race: return "race";
    case Partition::Age: return "age";
  }
  return "?";
}

Partition partition_from_string(const std::string& s) {
  if (s == "sex") return Partition::Sex;
  if (s == "race") return Partition::Race;
  if (s == "age") return Partition::Age;
  throw ConfigError("unknown subgroup partition '" + s + "'");
}

std::array<std::string, 2> stratum_names(Partition p) {
  switch (p) {
    case Partition::Sex: return {"Female", "Male"};
    case Partition::Race: return {"African American", "Non-African American"};
    case Partition::Age: return {"Age <= 65", "Age > 65"};
  }
  return {"?", "?"};
}

std::array<std::vector<std::size_t>, 2> stratify(const ScoredSet& set, Partition p) {
  if (set.subgroups.size() != set.size()) throw ContractError("stratify: scored set carries no subgroups");
  std::array<std::vector<std::size_t>, 2> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const preprocess::Subgroup& g = set.subgroups[i];
    bool first = false;
    switch (p) {
      case Partition::Sex: first = g.sex == preprocess::Sex::Female; break;
      case Partition::Race: first = g.race == preprocess::Race::AfricanAmerican; break;
      case Partition::Age: first = g.age_years <= 65.0; break;
    }
    out[first ? 0 : 1].push_back(i);
  }
  return out;
}

SubgroupResult subgroup_eval(const ScoredSet& set, Partition p, const BootstrapOptions& opts,
                             const std::string& model) {
  SubgroupResult res;
  res.partition = p;
  res.p_values.assign(set.n_outcomes, std::numeric_limits<double>::quiet_NaN());
  const auto names = stratum_names(p);
  const auto rows = stratify(set, p);
  std::array<ScoredSet, 2> parts;
  for (int s = 0; s < 2; ++s) {
    res.strata[s].stratum = names[s];
    if (rows[s].empty()) {
      res.strata[s].skipped = true;
      res.warnings.push_back("stratum '" + names[s] + "' is empty; skipped");
      continue;
    }
    parts[s] = set.subset(rows[s]);
    try {
      res.strata[s].report = evaluate_set(parts[s], opts, model);
      for (const OutcomeReport& o : res.strata[s].report.outcomes)
        if (!o.defined) res.warnings.push_back("stratum '" + names[s] + "': outcome " + o.outcome + " is single-class");
    } catch (const InstabilityError& e) {
      res.strata[s].skipped = true;
      res.warnings.push_back("stratum '" + names[s] + "' skipped: " + e.what());
    }
  }
  if (!res.strata[0].skipped && !res.strata[1].skipped) res.p_values = compare_independent(parts[0], parts[1], Metric::Auroc, opts);
  for (const std::string& w : res.warnings) std::cerr << "warning: subgroup " << to_string(p) << ": " << w << '\n';
  return res;
}

std::string SubgroupResult::to_csv() const {
  std::ostringstream out;
  out << "partition,stratum,outcome,point,lo,hi,p_value\n";
  for (const StratumReport& s : strata) {
    if (s.skipped) continue;
    for (std::size_t j = 0; j < s.report.outcomes.size(); ++j) {
      const OutcomeReport& o = s.report.outcomes[j];
      out << to_string(partition) << ',' << s.stratum << ',' << o.outcome << ',';
      if (o.defined)
        out << format_fixed(o.auroc.point, 6) << ',' << format_fixed(o.auroc.lo, 6) << ',' << format_fixed(o.auroc.hi, 6);
      else
        out << ",,";
      out << ',' << (std::isnan(p_values[j]) ? std::string() : format_fixed(p_values[j], 6)) << '\n';
    }
  }
  return out.str();
}

nlohmann::json SubgroupResult::to_json() const {
  nlohmann::json strata_json = nlohmann::json::array();
  for (const StratumReport& s : strata)
    strata_json.push_back({{"stratum", s.stratum}, {"skipped", s.skipped}, {"report", s.report.to_json()}});
  nlohmann::json p = nlohmann::json::array();
  for (double v : p_values) p.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  return {{"partition", to_string(partition)}, {"strata", strata_json}, {"p_values", p}, {"warnings", warnings}};
}

SubgroupResult SubgroupResult::from_json(const nlohmann::json& j) {
  SubgroupResult r;
  try {
    r.partition = partition_from_string(j.at("partition").get<std::string>());
    const auto& strata = j.at("strata");
    if (strata.size() != 2) throw FormatError("subgroup result: expected two strata");
    for (std::size_t s = 0; s < 2; ++s) {
      strata[s].at("stratum").get_to(r.strata[s].stratum);
      strata[s].at("skipped").get_to(r.strata[s].skipped);
      r.strata[s].report = MetricReport::from_json(strata[s].at("report"));
    }
    for (const auto& v : j.at("p_values"))
      r.p_values.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    j.at("warnings").get_to(r.warnings);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("subgroup result: ") + e.what());
  }
  return r;
}

}  // namespace fedperi::evalstats
