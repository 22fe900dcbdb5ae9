#include "fedperi/riskmodel/model.hpp"

#include <algorithm>
#include <numeric>

#include "fedperi/common/errors.hpp"

namespace fedperi::riskmodel {

using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

// Additive score offset that removes padded steps from the attention softmax.
// exp(-1e4) underflows to exactly zero.
constexpr double kMaskOffset = -1e4;

Var param(const ParamVars& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw ContractError("parameter '" + name + "' is not bound");
  return it->second;
}

Var dense_stack(const ParamVars& p, const std::string& block, Var x, std::size_t layers) {
  for (std::size_t l = 0; l < layers; ++l)
    x = ad::tanh(ad::dense(x, param(p, dense_name(block, l, "w")), param(p, dense_name(block, l, "b"))));
  return x;
}

ad::GruWeights gru_weights(const ParamVars& p, const std::string& prefix) {
  return {param(p, prefix + ".w_z"), param(p, prefix + ".u_z"), param(p, prefix + ".b_z"),
          param(p, prefix + ".w_r"), param(p, prefix + ".u_r"), param(p, prefix + ".b_r"),
          param(p, prefix + ".w_h"), param(p, prefix + ".u_h"), param(p, prefix + ".b_h")};
}

Tape& tape_of(const ParamVars& p) {
  if (p.empty()) throw ContractError("no parameters bound");
  return p.begin()->second.tape();
}

}  // namespace

Batch make_batch(const preprocess::Dataset& data, std::span<const std::size_t> indices,
                 const ModelConfig& config) {
  if (indices.empty()) throw ContractError("make_batch: empty batch");
  if (data.dims.continuous != config.n_continuous || data.dims.binary != config.n_binary ||
      data.dims.categorical != config.vocab_sizes.size())
    throw DimensionError("make_batch: dataset dimensions disagree with model config");
  const std::size_t B = indices.size();
  Batch b;
  b.size = B;
  b.continuous = Tensor::zeros(B, config.n_continuous);
  b.binary = Tensor::zeros(B, config.n_binary);
  b.categorical.assign(config.vocab_sizes.size(), std::vector<std::size_t>(B));
  b.labels = Tensor::zeros(B, config.n_outcomes);
  std::size_t max_steps = 0;
  for (std::size_t r = 0; r < B; ++r) {
    if (indices[r] >= data.size()) throw ContractError("make_batch: index out of range");
    const preprocess::Example& ex = data.examples[indices[r]];
    std::copy(ex.continuous.begin(), ex.continuous.end(), b.continuous.values().begin() + r * config.n_continuous);
    std::copy(ex.binary.begin(), ex.binary.end(), b.binary.values().begin() + r * config.n_binary);
    for (std::size_t f = 0; f < ex.categorical.size(); ++f) b.categorical[f][r] = ex.categorical[f];
    for (std::size_t k = 0; k < config.n_outcomes; ++k) b.labels.at(r, k) = ex.labels[k];
    max_steps = std::max(max_steps, ex.steps);
  }
  if (!config.uses_series()) return b;

  if (!data.has_series || data.dims.channels != config.n_channels)
    throw DimensionError("make_batch: postoperative model needs series with matching channels");
  const std::size_t width = 2 * config.n_channels;
  b.steps.assign(max_steps, Tensor::zeros(B, width));
  b.mask.assign(max_steps, Tensor::zeros(B, 1));
  for (std::size_t r = 0; r < B; ++r) {
    const preprocess::Example& ex = data.examples[indices[r]];
    if (ex.steps == 0) throw ContractError("postoperative model: record has an empty series");
    for (std::size_t t = 0; t < ex.steps; ++t) {
      std::copy_n(ex.series.begin() + static_cast<std::ptrdiff_t>(t * width), width,
                  b.steps[t].values().begin() + static_cast<std::ptrdiff_t>(r * width));
      b.mask[t][r] = 1.0;
    }
  }
  return b;
}

Batch make_batch(const preprocess::Dataset& data, const ModelConfig& config) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch(data, all, config);
}

ParamVars bind_params(Tape& tape, const ModelParams& params, bool requires_grad) {
  ParamVars out;
  for (const auto& [name, t] : params.tensors) out.emplace(name, tape.leaf(t, requires_grad));
  return out;
}

Var forward_preop(const ParamVars& p, const ModelConfig& c, const Batch& batch) {
  Tape& tape = tape_of(p);
  std::vector<Var> parts;
  parts.push_back(dense_stack(p, "continuous", tape.constant(batch.continuous), c.continuous_hidden.size()));
  parts.push_back(dense_stack(p, "binary", tape.constant(batch.binary), c.binary_hidden.size()));
  if (!c.vocab_sizes.empty()) {
    std::vector<Var> embedded;
    for (std::size_t f = 0; f < c.vocab_sizes.size(); ++f)
      embedded.push_back(ad::gather_rows(param(p, embedding_name(f)), batch.categorical[f]));
    parts.push_back(dense_stack(p, "categorical", ad::concat_cols(embedded), 1));
  }
  return dense_stack(p, "fusion", ad::concat_cols(parts), 1);
}

IntraopOutput forward_intraop(const ParamVars& p, const ModelConfig& c, const Batch& batch) {
  const std::size_t T = batch.steps.size();
  if (T == 0) throw ContractError("forward_intraop: series has no steps");
  Tape& tape = tape_of(p);
  const std::size_t B = batch.size;

  // Masked update h_t = m * h' + (1 - m) * h is exact for m in {0, 1}, so a
  // record's states do not depend on how long its batch neighbours are.
  std::vector<Var> x(T), m(T), keep(T);
  std::vector<bool> padded(T);
  for (std::size_t t = 0; t < T; ++t) {
    x[t] = tape.constant(batch.steps[t]);
    padded[t] = std::any_of(batch.mask[t].values().begin(), batch.mask[t].values().end(),
                            [](double v) { return v == 0.0; });
    if (!padded[t]) continue;
    Tensor inv = batch.mask[t];
    for (double& v : inv.values()) v = 1.0 - v;
    m[t] = tape.constant(batch.mask[t]);
    keep[t] = tape.constant(std::move(inv));
  }

  auto run = [&](const ad::GruWeights& w, bool reverse) {
    std::vector<Var> states(T);
    Var h = tape.constant(Tensor::zeros(B, c.gru_hidden));
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t t = reverse ? T - 1 - i : i;
      Var next = ad::gru_cell(x[t], h, w);
      h = padded[t] ? ad::add(ad::scale_rows(next, m[t]), ad::scale_rows(h, keep[t])) : next;
      states[t] = h;
    }
    return states;
  };
  const std::vector<Var> fwd = run(gru_weights(p, "gru.forward"), false);
  const std::vector<Var> bwd = run(gru_weights(p, "gru.backward"), true);

  const Var aw = param(p, "attention.w"), ab = param(p, "attention.b"), av = param(p, "attention.v");
  std::vector<Var> states(T), scores(T);
  for (std::size_t t = 0; t < T; ++t) {
    states[t] = ad::concat_cols(std::vector<Var>{fwd[t], bwd[t]});
    Var e = ad::matmul(ad::tanh(ad::dense(states[t], aw, ab)), av);
    if (padded[t]) {
      Tensor offset = batch.mask[t];
      for (double& v : offset.values()) v = v == 0.0 ? kMaskOffset : 0.0;
      e = ad::add(e, tape.constant(std::move(offset)));
    }
    scores[t] = e;
  }
  Var alpha = ad::softmax(ad::concat_cols(scores));
  Var latent = ad::scale_rows(states[0], ad::column(alpha, 0));
  for (std::size_t t = 1; t < T; ++t) latent = ad::add(latent, ad::scale_rows(states[t], ad::column(alpha, t)));
  return {latent, alpha};
}

Var forward(const ParamVars& p, const ModelConfig& c, const Batch& batch) {
  Var latent = forward_preop(p, c, batch);
  if (c.uses_series()) {
    IntraopOutput intra = forward_intraop(p, c, batch);
    latent = ad::dense(ad::concat_cols(std::vector<Var>{latent, intra.latent}), param(p, "combine.0.w"),
                       param(p, "combine.0.b"));
  }
  std::vector<Var> logits;
  logits.reserve(c.n_outcomes);
  for (std::size_t k = 0; k < c.n_outcomes; ++k) {
    Var h = ad::tanh(ad::dense(latent, param(p, head_name(k, 0, "w")), param(p, head_name(k, 0, "b"))));
    logits.push_back(ad::dense(h, param(p, head_name(k, 1, "w")), param(p, head_name(k, 1, "b"))));
  }
  return ad::sigmoid(ad::concat_cols(logits));
}

Var loss(const ParamVars& p, const ModelConfig& c, const Batch& batch) {
  Var pred = forward(p, c, batch);
  return ad::bce_loss(pred, tape_of(p).constant(batch.labels));
}

Tensor predict(const ModelParams& params, const ModelConfig& c, const Batch& batch) {
  Tape tape;
  ParamVars p = bind_params(tape, params, false);
  return forward(p, c, batch).value();
}

Tensor predict_dataset(const ModelParams& params, const ModelConfig& c, const preprocess::Dataset& data,
                       std::size_t chunk) {
  if (data.empty()) throw ContractError("predict_dataset: empty dataset");
  chunk = std::max<std::size_t>(chunk, 1);
  Tensor out = Tensor::zeros(data.size(), c.n_outcomes);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor scores = predict(params, c, make_batch(data, idx, c));
    std::copy(scores.values().begin(), scores.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(start * c.n_outcomes));
  }
  return out;
}

LossGrad loss_and_grad(const ModelParams& params, const ModelConfig& c, const Batch& batch) {
  Tape tape;
  ParamVars p = bind_params(tape, params, true);
  Var l = loss(p, c, batch);
  tape.backward(l);
  LossGrad out;
  out.loss = l.value()[0];
  out.grad.reserve(params.size());
  for (const auto& [name, v] : p) {
    const Tensor g = tape.grad(v);
    out.grad.insert(out.grad.end(), g.values().begin(), g.values().end());
  }
  return out;
}

}  // namespace fedperi::riskmodel
