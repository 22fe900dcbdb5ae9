#include "fedperi/riskmodel/params.hpp"

#include <cmath>
#include <cstdio>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"

namespace fedperi::riskmodel {

using ad::Tensor;

std::size_t ModelParams::size() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (const auto& [name, t] : tensors) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != size())
    throw DimensionError("unflatten: expected " + std::to_string(size()) + " values, got " +
                         std::to_string(flat.size()));
  std::size_t off = 0;
  for (auto& [name, t] : tensors) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + t.size()), t.values().begin());
    off += t.size();
  }
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

std::string dense_name(const std::string& block, std::size_t layer, const char* part) {
  return block + "." + std::to_string(layer) + "." + part;
}

std::string embedding_name(std::size_t feature) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "categorical.embedding.%02zu", feature);
  return buf;
}

std::string head_name(std::size_t outcome, std::size_t layer, const char* part) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "head.%zu.%zu.%s", outcome, layer, part);
  return buf;
}

namespace {

enum class Kind { Weight, Bias, Embedding };

struct Slot {
  ad::Shape shape;
  Kind kind;
};

void add_dense(std::map<std::string, Slot>& out, const std::string& block, std::size_t layer, std::size_t in,
               std::size_t width) {
  out[dense_name(block, layer, "w")] = {{in, width}, Kind::Weight};
  out[dense_name(block, layer, "b")] = {{1, width}, Kind::Bias};
}

std::size_t add_stack(std::map<std::string, Slot>& out, const std::string& block, std::size_t in,
                      const std::vector<std::size_t>& widths) {
  for (std::size_t l = 0; l < widths.size(); ++l) {
    add_dense(out, block, l, in, widths[l]);
    in = widths[l];
  }
  return in;
}

void add_gru(std::map<std::string, Slot>& out, const std::string& prefix, std::size_t f, std::size_t h) {
  for (const char* gate : {"z", "r", "h"}) {
    out[prefix + ".w_" + gate] = {{f, h}, Kind::Weight};
    out[prefix + ".u_" + gate] = {{h, h}, Kind::Weight};
    out[prefix + ".b_" + gate] = {{1, h}, Kind::Bias};
  }
}

std::map<std::string, Slot> layout(const ModelConfig& c) {
  c.validate();
  std::map<std::string, Slot> out;
  std::size_t fused_in = add_stack(out, "continuous", c.n_continuous, c.continuous_hidden);
  fused_in += add_stack(out, "binary", c.n_binary, c.binary_hidden);
  if (!c.vocab_sizes.empty()) {
    for (std::size_t i = 0; i < c.vocab_sizes.size(); ++i)
      out[embedding_name(i)] = {{c.vocab_sizes[i], c.embedding_dim}, Kind::Embedding};
    add_dense(out, "categorical", 0, c.vocab_sizes.size() * c.embedding_dim, c.categorical_hidden);
    fused_in += c.categorical_hidden;
  }
  add_dense(out, "fusion", 0, fused_in, c.fusion_dim);

  if (c.variant == Variant::Postoperative) {
    const std::size_t f = 2 * c.n_channels;
    add_gru(out, "gru.forward", f, c.gru_hidden);
    add_gru(out, "gru.backward", f, c.gru_hidden);
    out["attention.w"] = {{2 * c.gru_hidden, c.attention_dim}, Kind::Weight};
    out["attention.b"] = {{1, c.attention_dim}, Kind::Bias};
    out["attention.v"] = {{c.attention_dim, 1}, Kind::Weight};
    add_dense(out, "combine", 0, c.fusion_dim + 2 * c.gru_hidden, c.fusion_dim);
  }

  for (std::size_t k = 0; k < c.n_outcomes; ++k) {
    out[head_name(k, 0, "w")] = {{c.fusion_dim, c.head_dim}, Kind::Weight};
    out[head_name(k, 0, "b")] = {{1, c.head_dim}, Kind::Bias};
    out[head_name(k, 1, "w")] = {{c.head_dim, 1}, Kind::Weight};
    out[head_name(k, 1, "b")] = {{1, 1}, Kind::Bias};
  }
  return out;
}

}  // namespace

ModelParams zero_params(const ModelConfig& config) {
  ModelParams p;
  for (const auto& [name, slot] : layout(config)) p.tensors.emplace(name, Tensor(slot.shape));
  return p;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p;
  for (const auto& [name, slot] : layout(config)) {
    Tensor t(slot.shape);
    KeyedRng rng(seed, "init", {fnv1a(name)});
    if (slot.kind == Kind::Weight) {
      const double fan = static_cast<double>(slot.shape[0] + slot.shape[1]);
      const double limit = std::sqrt(6.0 / fan);
      for (double& v : t.values()) v = rng.uniform(-limit, limit);
    } else if (slot.kind == Kind::Embedding) {
      for (double& v : t.values()) v = rng.normal(0.0, 0.01);
    }
    p.tensors.emplace(name, std::move(t));
  }
  return p;
}

}  // namespace fedperi::riskmodel
