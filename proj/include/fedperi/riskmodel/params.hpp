#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedperi/autodiff/tensor.hpp"
#include "fedperi/riskmodel/config.hpp"

namespace fedperi::riskmodel {

// Named parameter tensors. The flat view concatenates tensors in name order
// (std::map iteration order), so every client sharing a config agrees on it.
struct ModelParams {
  std::map<std::string, ad::Tensor> tensors;

  std::size_t size() const;
  std::vector<double> flatten() const;
  // Overwrites every tensor from `flat`, keeping shapes. Throws
  // DimensionError when the length is not size().
  void unflatten(std::span<const double> flat);

  const ad::Tensor& at(const std::string& name) const;
  ad::Tensor& at(const std::string& name);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Every parameter shape for `config`, all zero.
ModelParams zero_params(const ModelConfig& config);

// Xavier-uniform weights, zero biases, N(0, 0.01) embedding tables. Each
// tensor draws from its own stream keyed by (seed, "init", name).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Name helpers shared by the model and tests.
std::string dense_name(const std::string& block, std::size_t layer, const char* part);
std::string embedding_name(std::size_t feature);
std::string head_name(std::size_t outcome, std::size_t layer, const char* part);

}  // namespace fedperi::riskmodel
