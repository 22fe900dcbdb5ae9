#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedperi/autodiff/layers.hpp"
#include "fedperi/preprocess/dataset.hpp"
#include "fedperi/riskmodel/config.hpp"
#include "fedperi/riskmodel/params.hpp"

namespace fedperi::riskmodel {

// Model inputs of a minibatch, stacked row-wise. Series are zero-padded to
// the longest record; mask[t] marks rows whose series covers step t.
struct Batch {
  std::size_t size = 0;
  ad::Tensor continuous;                           // [B x n_continuous]
  ad::Tensor binary;                               // [B x n_binary]
  std::vector<std::vector<std::size_t>> categorical;  // per feature, B ids
  std::vector<ad::Tensor> steps;                   // T x [B x 2C]
  std::vector<ad::Tensor> mask;                    // T x [B x 1]
  ad::Tensor labels;                               // [B x 9]
};

Batch make_batch(const preprocess::Dataset& data, std::span<const std::size_t> indices,
                 const ModelConfig& config);
Batch make_batch(const preprocess::Dataset& data, const ModelConfig& config);

// Parameters placed on a tape.
using ParamVars = std::map<std::string, ad::Var>;
ParamVars bind_params(ad::Tape& tape, const ModelParams& params, bool requires_grad = true);

// [B x fusion]: three input branches fused through a tanh layer.
ad::Var forward_preop(const ParamVars& p, const ModelConfig& config, const Batch& batch);

struct IntraopOutput {
  ad::Var latent;     // [B x 2h]
  ad::Var attention;  // [B x T], rows sum to 1 over unmasked steps
};
// Masked bidirectional GRU with additive attention pooling.
IntraopOutput forward_intraop(const ParamVars& p, const ModelConfig& config, const Batch& batch);

// [B x 9] risk scores in (0, 1).
ad::Var forward(const ParamVars& p, const ModelConfig& config, const Batch& batch);

// Mean over the batch of the mean binary cross-entropy over the nine heads.
ad::Var loss(const ParamVars& p, const ModelConfig& config, const Batch& batch);

ad::Tensor predict(const ModelParams& params, const ModelConfig& config, const Batch& batch);
// Scores for a whole dataset, evaluated in chunks. Row i belongs to example i.
ad::Tensor predict_dataset(const ModelParams& params, const ModelConfig& config,
                           const preprocess::Dataset& data, std::size_t chunk = 512);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // flat, canonical order
};
LossGrad loss_and_grad(const ModelParams& params, const ModelConfig& config, const Batch& batch);

}  // namespace fedperi::riskmodel
