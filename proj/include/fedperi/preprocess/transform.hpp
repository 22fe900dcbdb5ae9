#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedperi/common/rng.hpp"
#include "fedperi/preprocess/record.hpp"

namespace fedperi::preprocess {

// Training-cohort statistics of one continuous feature, computed from observed
// values only. Percentiles use linear interpolation between closest ranks.
struct ContinuousStats {
  double p0_5 = 0, p1 = 0, p5 = 0, p95 = 0, p99 = 0, p99_5 = 0;
  double median = 0, mean = 0, std = 0;
  bool degenerate = false;  // std == 0

  friend bool operator==(const ContinuousStats&, const ContinuousStats&) = default;
};

struct ChannelStats {
  double median = 0, mean = 0, std = 0;
  bool observed = false;  // at least one training observation

  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

// Everything learned from a training partition. Applying it never looks at
// any other partition.
struct FittedTransform {
  std::string scope;  // site name, or "pooled" for central learning
  std::uint64_t seed = 0;
  std::vector<ContinuousStats> continuous;
  std::vector<ChannelStats> channels;
  // Per high-cardinality feature: vocabulary id -> id used by the model.
  // Categories never observed in training map to the reserved id 0.
  std::vector<std::vector<std::uint32_t>> vocabulary;

  friend bool operator==(const FittedTransform&, const FittedTransform&) = default;

  nlohmann::json to_json() const;
  static FittedTransform from_json(const nlohmann::json& j);
};

// Fits on `train`. Throws FitError naming any continuous feature without a
// single observed value.
FittedTransform fit(std::span<const Record> train, const FeatureSchema& schema, std::string scope,
                    std::uint64_t seed);

// Replaces a value above p99 with a uniform draw in [p95, p99.5] and a value
// below p1 with a uniform draw in [p0.5, p5]; interior values pass unchanged.
double winsorize_outliers(double value, const ContinuousStats& stats, KeyedRng& rng);

// Stream used for the winsorization draw of one (record, feature) cell.
KeyedRng winsorize_stream(std::uint64_t seed, std::string_view site, std::int64_t record_id,
                          std::size_t feature);

// Dense preoperative inputs of one record before standardization.
struct ImputedFeatures {
  std::vector<double> continuous;           // winsorized, or train median when missing
  std::vector<double> continuous_presence;  // 1 observed, 0 imputed
  std::vector<double> binary;               // missing -> 0
  std::vector<double> binary_presence;
  std::vector<std::size_t> categorical;  // model ids; missing/unseen -> 0
};

ImputedFeatures impute_and_flag(const Record& record, const FeatureSchema& schema,
                                const FittedTransform& transform);

// z = (x - mean) / std per continuous feature; degenerate features map to 0.
std::vector<double> standardize(std::span<const double> values, const FittedTransform& transform);

void save_transform(const FittedTransform& transform, const std::string& path);
FittedTransform load_transform(const std::string& path);

}  // namespace fedperi::preprocess
