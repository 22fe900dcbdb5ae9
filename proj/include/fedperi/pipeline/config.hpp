#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "fedperi/fedproto/plan.hpp"
#include "fedperi/riskmodel/config.hpp"
#include "fedperi/synthgen/site_spec.hpp"

namespace fedperi::pipeline {

// Proximal weight FedProx gets when the config sets no mu.
inline constexpr double kDefaultFedProxMu = 0.01;

struct EvaluationSettings {
  std::size_t replicates = 1000;
  double alpha = 0.05;
  bool subgroups = true;
  bool downsampling = true;
  std::size_t downsample_repeats = 10;
  fedproto::Paradigm downsample_paradigm = fedproto::Paradigm::Scaffold;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "runs";
  synthgen::WorldSpec world;
  std::vector<synthgen::SiteSpec> sites;
  riskmodel::Variant variant = riskmodel::Variant::Preoperative;
  std::vector<fedproto::Paradigm> paradigms = {fedproto::Paradigm::Local, fedproto::Paradigm::Central,
                                               fedproto::Paradigm::Scaffold};
  // Shared plan fields; `overrides` holds per-paradigm replacements keyed by
  // paradigm name.
  nlohmann::json train = nlohmann::json::object();
  std::map<std::string, nlohmann::json> overrides;
  EvaluationSettings evaluation;

  // Throws ConfigError.
  void validate() const;
  fedproto::TrainPlan plan_for(fedproto::Paradigm p) const;
  // First federated paradigm in `paradigms`, if any.
  std::optional<fedproto::Paradigm> federated_paradigm() const;

  nlohmann::json to_json() const;
  // Site and world seeds missing from `j` are derived from the experiment
  // seed; `seed_override` replaces the experiment seed before derivation.
  static ExperimentConfig from_json(const nlohmann::json& j, std::optional<std::uint64_t> seed_override = {});
};

// Two default sites with shift on, preoperative variant, local / central /
// SCAFFOLD.
ExperimentConfig default_config(std::uint64_t seed = 7);

// TOML, or JSON when the file name ends in ".json". Parse errors are
// ConfigErrors naming the file.
nlohmann::json read_config_file(const std::string& path);
ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = {});

}  // namespace fedperi::pipeline
