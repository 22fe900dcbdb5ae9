#include "fedperi/pipeline/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"
#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"

namespace fedperi::pipeline {

using nlohmann::json;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Keys of `allowed` (a default-constructed value's JSON) are the only ones
// accepted in `given`.
void reject_unknown(const json& given, const json& allowed, const std::string& where) {
  if (!given.is_object()) throw ConfigError("config: " + where + " must be a table");
  for (const auto& [key, value] : given.items())
    if (!allowed.contains(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
}

}  // namespace

void ExperimentConfig::validate() const {
  world.validate();
  if (sites.empty()) throw ConfigError("config: at least one site is required");
  std::set<std::string> names;
  for (const auto& s : sites) {
    s.validate(world);
    if (!names.insert(s.name).second) throw ConfigError("config: duplicate site name " + s.name);
  }
  if (paradigms.empty()) throw ConfigError("config: no paradigm selected");
  for (fedproto::Paradigm p : paradigms) plan_for(p);
  if (evaluation.replicates < 10) throw ConfigError("config: evaluation.replicates must be >= 10");
  if (!(evaluation.alpha > 0.0 && evaluation.alpha < 1.0)) throw ConfigError("config: evaluation.alpha in (0, 1)");
  if (evaluation.downsampling) {
    if (evaluation.downsample_repeats < 1) throw ConfigError("config: evaluation.downsample_repeats must be >= 1");
    if (sites.size() < 2) throw ConfigError("config: downsampling needs at least two sites");
    if (!fedproto::is_federated(evaluation.downsample_paradigm) &&
        evaluation.downsample_paradigm != fedproto::Paradigm::Central)
      throw ConfigError("config: downsample paradigm must be central or federated");
  }
  if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
}

fedproto::TrainPlan ExperimentConfig::plan_for(fedproto::Paradigm p) const {
  json j = train;
  const auto it = overrides.find(fedproto::to_string(p));
  if (it != overrides.end()) j.merge_patch(it->second);
  j["paradigm"] = fedproto::to_string(p);
  j["seed"] = seed;
  try {
    return fedproto::TrainPlan::from_json(j);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("train plan: ") + e.what());
  }
}

std::optional<fedproto::Paradigm> ExperimentConfig::federated_paradigm() const {
  for (fedproto::Paradigm p : paradigms)
    if (fedproto::is_federated(p)) return p;
  return std::nullopt;
}

json ExperimentConfig::to_json() const {
  json site_list = json::array();
  for (const auto& s : sites) site_list.push_back(s.to_json());
  json paradigm_list = json::array();
  for (auto p : paradigms) paradigm_list.push_back(fedproto::to_string(p));
  json train_json = train;
  for (const auto& [name, o] : overrides) train_json[name] = o;
  return {{"seed", seed},
          {"output_dir", output_dir},
          {"variant", riskmodel::to_string(variant)},
          {"paradigms", paradigm_list},
          {"world", world.to_json()},
          {"sites", site_list},
          {"train", train_json},
          {"evaluation",
           {{"replicates", evaluation.replicates},
            {"alpha", evaluation.alpha},
            {"subgroups", evaluation.subgroups},
            {"downsampling", evaluation.downsampling},
            {"downsample_repeats", evaluation.downsample_repeats},
            {"downsample_paradigm", fedproto::to_string(evaluation.downsample_paradigm)}}}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, std::optional<std::uint64_t> seed_override) {
  if (!j.is_object()) throw ConfigError("config: top level must be a table");
  static const std::set<std::string> known = {"seed",  "output_dir", "variant", "paradigms", "world",
                                              "sites", "shift",      "train",   "evaluation"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");

  ExperimentConfig c;
  try {
    c.seed = seed_override ? *seed_override : j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("variant")) c.variant = riskmodel::variant_from_string(j.at("variant").get<std::string>());

    json world = j.value("world", json::object());
    reject_unknown(world, synthgen::WorldSpec{}.to_json(), "world");
    if (!world.contains("seed") || seed_override) world["seed"] = c.seed;
    c.world = synthgen::WorldSpec::from_json(world);

    if (j.contains("sites")) {
      const json site_keys = synthgen::SiteSpec{}.to_json();
      for (const auto& s : j.at("sites")) {
        reject_unknown(s, site_keys, "sites");
        if (s.contains("missingness")) reject_unknown(s.at("missingness"), site_keys.at("missingness"), "sites.missingness");
        synthgen::SiteSpec spec = synthgen::SiteSpec::from_json(s);
        if (!s.contains("seed") || seed_override) spec.seed = synthgen::site_seed(c.seed, spec.name);
        c.sites.push_back(std::move(spec));
      }
    } else {
      c.sites = synthgen::default_sites(c.seed, j.value("shift", true));
    }

    if (j.contains("paradigms")) {
      c.paradigms.clear();
      for (const auto& p : j.at("paradigms")) c.paradigms.push_back(fedproto::paradigm_from_string(p.get<std::string>()));
    }

    if (j.contains("train")) {
      const json plan_keys = fedproto::TrainPlan{}.to_json();
      if (!j.at("train").is_object()) throw ConfigError("config: train must be a table");
      for (const auto& [key, value] : j.at("train").items()) {
        if (value.is_object()) {
          reject_unknown(value, plan_keys, "train." + key);
          c.overrides[fedproto::to_string(fedproto::paradigm_from_string(key))] = value;
        } else if (!plan_keys.contains(key)) {
          throw ConfigError("config: unknown key '" + key + "' in train");
        } else if (key == "paradigm" || key == "seed")
          throw ConfigError("config: train." + key + " is set by the experiment, not the plan");
        else
          c.train[key] = value;
      }
    }

    if (!c.train.contains("mu") && !c.overrides.count("fedprox")) c.overrides["fedprox"] = {{"mu", kDefaultFedProxMu}};

    if (j.contains("evaluation")) {
      const json& e = j.at("evaluation");
      reject_unknown(e,
                     {{"replicates", 0}, {"alpha", 0}, {"subgroups", 0}, {"downsampling", 0},
                      {"downsample_repeats", 0}, {"downsample_paradigm", 0}},
                     "evaluation");
      c.evaluation.replicates = e.value("replicates", c.evaluation.replicates);
      c.evaluation.alpha = e.value("alpha", c.evaluation.alpha);
      c.evaluation.subgroups = e.value("subgroups", c.evaluation.subgroups);
      c.evaluation.downsampling = e.value("downsampling", c.evaluation.downsampling);
      c.evaluation.downsample_repeats = e.value("downsample_repeats", c.evaluation.downsample_repeats);
      if (e.contains("downsample_paradigm"))
        c.evaluation.downsample_paradigm = fedproto::paradigm_from_string(e.at("downsample_paradigm").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig default_config(std::uint64_t seed) { return ExperimentConfig::from_json(json::object(), seed); }

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  if (ends_with(path, ".json")) {
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  try {
    const toml::table table = toml::parse(in, path);
    std::ostringstream out;
    out << toml::json_formatter{table};
    return json::parse(out.str());
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  return ExperimentConfig::from_json(read_config_file(path), seed_override);
}

}  // namespace fedperi::pipeline
