#pragma once

#include <array>
#include <string>
#include <vector>

#include "fedperi/evalstats/report.hpp"

namespace fedperi::evalstats {

enum class Partition { Sex, Race, Age };

std::string to_string(Partition p);
Partition partition_from_string(const std::string& s);
// Names of the two strata, e.g. {"Age <= 65", "Age > 65"}.
std::array<std::string, 2> stratum_names(Partition p);

// Row indices of each stratum. Age exactly 65 belongs to the first stratum.
std::array<std::vector<std::size_t>, 2> stratify(const ScoredSet& set, Partition p);

struct StratumReport {
  std::string stratum;
  bool skipped = false;
  MetricReport report;
};

struct SubgroupResult {
  Partition partition = Partition::Sex;
  std::array<StratumReport, 2> strata;
  // Unpaired bootstrap AUROC p-value per outcome; NaN when either stratum
  // cannot be evaluated.
  std::vector<double> p_values;
  std::vector<std::string> warnings;

  std::string to_csv() const;
  nlohmann::json to_json() const;
  static SubgroupResult from_json(const nlohmann::json& j);
};

SubgroupResult subgroup_eval(const ScoredSet& set, Partition p, const BootstrapOptions& opts,
                             const std::string& model);

}  // namespace fedperi::evalstats
