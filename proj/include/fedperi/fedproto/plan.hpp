#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace fedperi::fedproto {

enum class Paradigm { Local, Central, FedAvg, FedProx, Scaffold };

std::string to_string(Paradigm p);
Paradigm paradigm_from_string(const std::string& s);
bool is_federated(Paradigm p);

struct TrainPlan {
  Paradigm paradigm = Paradigm::FedAvg;
  std::size_t rounds = 30;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double mu = 0.0;  // proximal coefficient; read only by FedProx
  std::uint64_t seed = 0;

  // Throws ContractError on R, E, B < 1, eta <= 0 or mu < 0.
  void validate() const;
  // mu as seen by the optimizer: zero unless the paradigm is FedProx.
  double effective_mu() const { return paradigm == Paradigm::FedProx ? mu : 0.0; }

  nlohmann::json to_json() const;
  static TrainPlan from_json(const nlohmann::json& j);
};

}  // namespace fedperi::fedproto
