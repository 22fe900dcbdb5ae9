#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fedperi::preprocess {

inline constexpr std::size_t kNumOutcomes = 9;

// Canonical outcome order used for label columns and model heads.
inline const std::array<std::string, kNumOutcomes>& outcome_names() {
  static const std::array<std::string, kNumOutcomes> names = {
      "prolonged_icu_stay",
      "prolonged_mechanical_ventilation",
      "neurological_delirium",
      "cardiovascular",
      "acute_kidney_injury",
      "venous_thromboembolism",
      "sepsis",
      "wound",
      "hospital_mortality",
  };
  return names;
}

struct ContinuousFeature {
  std::string name;
  std::string unit;
};

// High-cardinality categorical feature. Id 0 is reserved for missing or
// unseen values; category k of `categories` has id k + 1.
struct CategoricalFeature {
  std::string name;
  std::vector<std::string> categories;

  std::size_t vocab_size() const { return categories.size() + 1; }
  // 0 when the label is not in the vocabulary.
  std::size_t id_of(std::string_view label) const;
};

struct ChannelSpec {
  std::string name;
  std::string unit;
};

struct FeatureSchema {
  std::vector<ContinuousFeature> continuous;
  std::vector<std::string> binary;
  std::vector<CategoricalFeature> high_cardinality;
  std::vector<ChannelSpec> timeseries_channels;
  std::vector<std::string> outcomes;

  // Throws ContractError on duplicate names, bad vocabularies or an outcome
  // list other than the canonical nine.
  void validate() const;

  // Width of the binary model branch: binary values, then presence flags for
  // every continuous feature, then presence flags for every binary feature.
  std::size_t binary_branch_width() const { return 2 * binary.size() + continuous.size(); }
  std::vector<std::size_t> vocab_sizes() const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);
};

void save_schema(const FeatureSchema& schema, const std::string& path);
FeatureSchema load_schema(const std::string& path);

}  // namespace fedperi::preprocess
