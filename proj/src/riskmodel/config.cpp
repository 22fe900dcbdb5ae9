#include "fedperi/riskmodel/config.hpp"

#include "fedperi/common/errors.hpp"

namespace fedperi::riskmodel {

std::string to_string(Variant v) { return v == Variant::Preoperative ? "preoperative" : "postoperative"; }

Variant variant_from_string(const std::string& s) {
  if (s == "preoperative" || s == "preop") return Variant::Preoperative;
  if (s == "postoperative" || s == "postop") return Variant::Postoperative;
  throw ConfigError("unknown model variant '" + s + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ContractError(std::string("model config: ") + what + " must be >= 1");
  };
  positive(n_continuous, "n_continuous");
  positive(n_binary, "n_binary");
  for (std::size_t v : vocab_sizes) positive(v, "vocabulary size");
  if (continuous_hidden.empty() || binary_hidden.empty())
    throw ContractError("model config: dense stacks need at least one layer");
  for (std::size_t v : continuous_hidden) positive(v, "continuous hidden size");
  for (std::size_t v : binary_hidden) positive(v, "binary hidden size");
  positive(embedding_dim, "embedding_dim");
  positive(categorical_hidden, "categorical_hidden");
  positive(fusion_dim, "fusion_dim");
  positive(head_dim, "head_dim");
  if (variant == Variant::Postoperative) {
    positive(n_channels, "n_channels");
    positive(gru_hidden, "gru_hidden");
    positive(attention_dim, "attention_dim");
  }
  if (n_outcomes != preprocess::kNumOutcomes)
    throw ContractError("model config: n_outcomes must be " + std::to_string(preprocess::kNumOutcomes));
}

nlohmann::json ModelConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"n_continuous", n_continuous},
          {"n_binary", n_binary},
          {"vocab_sizes", vocab_sizes},
          {"n_channels", n_channels},
          {"continuous_hidden", continuous_hidden},
          {"binary_hidden", binary_hidden},
          {"embedding_dim", embedding_dim},
          {"categorical_hidden", categorical_hidden},
          {"fusion_dim", fusion_dim},
          {"gru_hidden", gru_hidden},
          {"attention_dim", attention_dim},
          {"head_dim", head_dim},
          {"n_outcomes", n_outcomes}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    j.at("n_continuous").get_to(c.n_continuous);
    j.at("n_binary").get_to(c.n_binary);
    j.at("vocab_sizes").get_to(c.vocab_sizes);
    j.at("n_channels").get_to(c.n_channels);
    j.at("continuous_hidden").get_to(c.continuous_hidden);
    j.at("binary_hidden").get_to(c.binary_hidden);
    j.at("embedding_dim").get_to(c.embedding_dim);
    j.at("categorical_hidden").get_to(c.categorical_hidden);
    j.at("fusion_dim").get_to(c.fusion_dim);
    j.at("gru_hidden").get_to(c.gru_hidden);
    j.at("attention_dim").get_to(c.attention_dim);
    j.at("head_dim").get_to(c.head_dim);
    j.at("n_outcomes").get_to(c.n_outcomes);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig config_for(const preprocess::DatasetDims& dims, std::vector<std::size_t> vocab_sizes,
                       Variant variant) {
  if (vocab_sizes.size() != dims.categorical)
    throw DimensionError("config_for: vocabulary count disagrees with dataset");
  ModelConfig c;
  c.variant = variant;
  c.n_continuous = dims.continuous;
  c.n_binary = dims.binary;
  c.vocab_sizes = std::move(vocab_sizes);
  c.n_channels = dims.channels;
  c.validate();
  return c;
}

}  // namespace fedperi::riskmodel
