#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "fedperi/preprocess/dataset.hpp"

namespace fedperi::riskmodel {

enum class Variant { Preoperative, Postoperative };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::Preoperative;

  // Input widths, taken from the dataset.
  std::size_t n_continuous = 0;
  std::size_t n_binary = 0;  // binary branch width including presence flags
  std::vector<std::size_t> vocab_sizes;
  std::size_t n_channels = 0;

  std::vector<std::size_t> continuous_hidden{64, 32};
  std::vector<std::size_t> binary_hidden{32};
  std::size_t embedding_dim = 8;
  std::size_t categorical_hidden = 16;
  std::size_t fusion_dim = 64;
  std::size_t gru_hidden = 32;
  std::size_t attention_dim = 32;
  std::size_t head_dim = 16;
  std::size_t n_outcomes = preprocess::kNumOutcomes;

  // Throws ContractError when a dimension is zero or n_outcomes != 9.
  void validate() const;

  bool uses_series() const { return variant == Variant::Postoperative; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Default desk-scale architecture sized to `dims`.
ModelConfig config_for(const preprocess::DatasetDims& dims, std::vector<std::size_t> vocab_sizes,
                       Variant variant);

}  // namespace fedperi::riskmodel
