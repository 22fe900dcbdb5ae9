#include "fedperi/preprocess/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "fedperi/common/errors.hpp"

namespace fedperi::preprocess {

using nlohmann::json;

std::size_t CategoricalFeature::id_of(std::string_view label) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i] == label) return i + 1;
  return 0;
}

void FeatureSchema::validate() const {
  std::set<std::string> seen;
  auto claim = [&](const std::string& name) {
    if (name.empty()) throw ContractError("schema contains an empty feature name");
    if (name.find(',') != std::string::npos)
      throw ContractError("schema name contains a comma: " + name);
    if (!seen.insert(name).second) throw ContractError("duplicate schema name: " + name);
  };
  for (const auto& f : continuous) claim(f.name);
  for (const auto& f : binary) claim(f);
  for (const auto& f : high_cardinality) {
    claim(f.name);
    std::set<std::string> cats;
    for (const auto& c : f.categories) {
      if (c.empty() || c.find(',') != std::string::npos)
        throw ContractError("invalid category label in " + f.name);
      if (!cats.insert(c).second) throw ContractError("duplicate category '" + c + "' in " + f.name);
    }
  }
  for (const auto& c : timeseries_channels) claim(c.name);
  for (const auto& o : outcomes) claim(o);
  const auto& canon = outcome_names();
  if (outcomes.size() != kNumOutcomes || !std::equal(outcomes.begin(), outcomes.end(), canon.begin()))
    throw ContractError("schema must list the nine canonical outcomes in canonical order");
}

std::vector<std::size_t> FeatureSchema::vocab_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& f : high_cardinality) out.push_back(f.vocab_size());
  return out;
}

json FeatureSchema::to_json() const {
  json j;
  j["continuous"] = json::array();
  for (const auto& f : continuous) j["continuous"].push_back({{"name", f.name}, {"unit", f.unit}});
  j["binary"] = binary;
  j["high_cardinality"] = json::array();
  for (const auto& f : high_cardinality)
    j["high_cardinality"].push_back({{"name", f.name}, {"vocabulary", f.categories}});
  j["timeseries_channels"] = json::array();
  for (const auto& c : timeseries_channels)
    j["timeseries_channels"].push_back({{"name", c.name}, {"unit", c.unit}});
  j["outcomes"] = outcomes;
  return j;
}

FeatureSchema FeatureSchema::from_json(const json& j) {
  FeatureSchema s;
  try {
    for (const auto& f : j.at("continuous"))
      s.continuous.push_back({f.at("name").get<std::string>(), f.value("unit", std::string{})});
    s.binary = j.at("binary").get<std::vector<std::string>>();
    for (const auto& f : j.at("high_cardinality"))
      s.high_cardinality.push_back(
          {f.at("name").get<std::string>(), f.at("vocabulary").get<std::vector<std::string>>()});
    for (const auto& c : j.at("timeseries_channels"))
      s.timeseries_channels.push_back({c.at("name").get<std::string>(), c.value("unit", std::string{})});
    s.outcomes = j.at("outcomes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed schema JSON: ") + e.what());
  }
  s.validate();
  return s;
}

void save_schema(const FeatureSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << schema.to_json().dump(2) << '\n';
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  try {
    return FeatureSchema::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError("schema " + path + ": " + e.what());
  }
}

}  // namespace fedperi::preprocess
