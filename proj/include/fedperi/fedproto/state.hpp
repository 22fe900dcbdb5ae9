#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedperi/preprocess/dataset.hpp"

namespace fedperi::fedproto {

// One site's partitions, already transformed.
struct SiteData {
  std::string site;
  preprocess::Dataset train;
  preprocess::Dataset validation;
  preprocess::Dataset test;
};

struct ClientState {
  std::string site;
  std::vector<double> params;   // y, flat
  std::size_t n_samples = 0;
  std::vector<double> control;  // c_i; empty unless SCAFFOLD
};

struct ServerState {
  std::vector<double> x;
  std::vector<double> control;  // c; empty unless SCAFFOLD
  std::size_t round = 0;
};

// What a client sends back after local training.
struct ClientUpdate {
  std::string site;
  std::vector<double> y;
  std::size_t n = 0;
  std::vector<double> delta_control;  // empty unless SCAFFOLD
  double train_loss = 0.0;            // mean minibatch loss over the local steps
  std::size_t steps = 0;
};

}  // namespace fedperi::fedproto
