#include "fedperi/fedproto/plan.hpp"

#include <cmath>

#include "fedperi/common/errors.hpp"

namespace fedperi::fedproto {

std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::Local: return "local";
    case Paradigm::Central: return "central";
    case Paradigm::FedAvg: return "fedavg";
    case Paradigm::FedProx: return "fedprox";
    case Paradigm::Scaffold: return "scaffold";
  }
  return "?";
}

Paradigm paradigm_from_string(const std::string& s) {
  if (s == "local") return Paradigm::Local;
  if (s == "central") return Paradigm::Central;
  if (s == "fedavg") return Paradigm::FedAvg;
  if (s == "fedprox") return Paradigm::FedProx;
  if (s == "scaffold") return Paradigm::Scaffold;
  throw ConfigError("unknown paradigm '" + s + "' (expected local, central, fedavg, fedprox or scaffold)");
}

bool is_federated(Paradigm p) {
  return p == Paradigm::FedAvg || p == Paradigm::FedProx || p == Paradigm::Scaffold;
}

void TrainPlan::validate() const {
  if (rounds < 1 || local_epochs < 1 || batch_size < 1)
    throw ContractError("train plan: rounds, local epochs and batch size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ContractError("train plan: learning rate must be positive");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ContractError("train plan: mu must be >= 0");
}

nlohmann::json TrainPlan::to_json() const {
  return {{"paradigm", to_string(paradigm)}, {"rounds", rounds},      {"local_epochs", local_epochs},
          {"batch_size", batch_size},        {"learning_rate", learning_rate}, {"mu", mu},
          {"seed", seed}};
}

TrainPlan TrainPlan::from_json(const nlohmann::json& j) {
  TrainPlan p;
  try {
    p.paradigm = paradigm_from_string(j.at("paradigm").get<std::string>());
    p.rounds = j.value("rounds", p.rounds);
    p.local_epochs = j.value("local_epochs", p.local_epochs);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.mu = j.value("mu", p.mu);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train plan: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace fedperi::fedproto
