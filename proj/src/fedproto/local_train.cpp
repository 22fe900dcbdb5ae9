#include "fedperi/fedproto/local_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"

namespace fedperi::fedproto {

BatchSequence::BatchSequence(std::uint64_t seed, const std::string& site, std::size_t n, std::size_t batch_size)
    : seed_(seed), site_key_(fnv1a(site)), n_(n), batch_size_(batch_size) {
  if (n == 0) throw ClientError("site " + site + " has no training records");
  if (batch_size == 0) throw ContractError("batch size must be >= 1");
  per_epoch_ = (n + batch_size - 1) / batch_size;
}

std::span<const std::size_t> BatchSequence::batch(std::uint64_t t) {
  const std::uint64_t q = t / per_epoch_;
  const std::size_t j = static_cast<std::size_t>(t % per_epoch_);
  if (q != cached_) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    KeyedRng rng(seed_, "minibatch", {site_key_, q});
    for (std::size_t i = n_; i > 1; --i) std::swap(perm_[i - 1], perm_[rng.below(i)]);
    cached_ = q;
  }
  const std::size_t start = j * batch_size_;
  const std::size_t len = std::min(batch_size_, n_ - start);
  return {perm_.data() + start, len};
}

namespace {

[[noreturn]] void diverged(const std::string& site, std::size_t round, const std::string& detail) {
  throw DivergenceError("divergence at round " + std::to_string(round) + ", site " + site + ": " + detail);
}

bool all_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return d == 0.0; });
}

}  // namespace

ClientUpdate local_train(const ClientState& client, const ServerState& server, const TrainPlan& plan,
                         const preprocess::Dataset& train, const riskmodel::ModelConfig& config) {
  plan.validate();
  if (train.empty()) throw ClientError("site " + client.site + " has no training records");
  const std::size_t P = server.x.size();
  const bool scaffold = plan.paradigm == Paradigm::Scaffold;
  if (scaffold && (client.control.size() != P || server.control.size() != P))
    throw ProtocolError("SCAFFOLD control variates must have length " + std::to_string(P));

  riskmodel::ModelParams params = riskmodel::zero_params(config);
  if (params.size() != P) throw ProtocolError("global parameter length disagrees with model config");

  // Correction c - c_i is constant within a round.
  std::vector<double> correction;
  if (scaffold) {
    correction.resize(P);
    for (std::size_t i = 0; i < P; ++i) correction[i] = server.control[i] - client.control[i];
    if (all_zero(correction)) correction.clear();
  }
  const double mu = plan.effective_mu();
  const double eta = plan.learning_rate;

  BatchSequence seq(plan.seed, client.site, train.size(), plan.batch_size);
  const std::uint64_t K = plan.local_epochs * seq.batches_per_epoch();
  const std::uint64_t first = server.round * K;

  ClientUpdate out;
  out.site = client.site;
  out.n = train.size();
  std::vector<double> y = server.x;
  double loss_total = 0.0;
  for (std::uint64_t s = 0; s < K; ++s) {
    params.unflatten(y);
    riskmodel::LossGrad lg;
    try {
      lg = riskmodel::loss_and_grad(params, config, riskmodel::make_batch(train, seq.batch(first + s), config));
    } catch (const DivergenceError& e) {
      diverged(client.site, server.round, e.what());
    }
    std::vector<double>& g = lg.grad;
    if (mu != 0.0)
      for (std::size_t i = 0; i < P; ++i) g[i] += mu * (y[i] - server.x[i]);
    if (!correction.empty())
      for (std::size_t i = 0; i < P; ++i) g[i] += correction[i];
    for (std::size_t i = 0; i < P; ++i) {
      if (!std::isfinite(g[i])) diverged(client.site, server.round, "non-finite gradient");
      y[i] -= eta * g[i];
    }
    loss_total += lg.loss;
  }
  out.steps = K;
  out.train_loss = loss_total / static_cast<double>(K);

  if (scaffold) {
    // c_i+ = c_i - c + (x - y) / (K eta); delta = c_i+ - c_i.
    const double denom = static_cast<double>(K) * eta;
    out.delta_control.resize(P);
    for (std::size_t i = 0; i < P; ++i) {
      const double updated = client.control[i] - server.control[i] + (server.x[i] - y[i]) / denom;
      out.delta_control[i] = updated - client.control[i];
    }
  }
  out.y = std::move(y);
  return out;
}

ClientUpdate central_train(const ServerState& server, const TrainPlan& plan,
                           std::span<const preprocess::Dataset* const> sites, const riskmodel::ModelConfig& config) {
  plan.validate();
  if (sites.empty()) throw ClientError("central learning needs at least one site");
  std::vector<BatchSequence> seqs;
  std::size_t total = 0, per_epoch = 0;
  for (const preprocess::Dataset* d : sites) {
    seqs.emplace_back(plan.seed, d->site, d->size(), plan.batch_size);
    total += d->size();
    per_epoch = std::max(per_epoch, seqs.back().batches_per_epoch());
  }
  std::vector<double> weight(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) weight[s] = static_cast<double>(sites[s]->size()) / static_cast<double>(total);

  riskmodel::ModelParams params = riskmodel::zero_params(config);
  const std::size_t P = params.size();
  if (server.x.size() != P) throw ProtocolError("global parameter length disagrees with model config");
  const std::uint64_t K = plan.local_epochs * per_epoch;
  const std::uint64_t first = server.round * K;

  ClientUpdate out;
  out.site = "pooled";
  out.n = total;
  std::vector<double> y = server.x;
  std::vector<double> g(P);
  double loss_total = 0.0;
  for (std::uint64_t step = 0; step < K; ++step) {
    params.unflatten(y);
    double loss = 0.0;
    for (std::size_t s = 0; s < sites.size(); ++s) {
      riskmodel::LossGrad lg;
      try {
        lg = riskmodel::loss_and_grad(params, config,
                                      riskmodel::make_batch(*sites[s], seqs[s].batch(first + step), config));
      } catch (const DivergenceError& e) {
        diverged(sites[s]->site, server.round, e.what());
      }
      if (s == 0) {
        for (std::size_t i = 0; i < P; ++i) g[i] = weight[s] * lg.grad[i];
        loss = weight[s] * lg.loss;
      } else {
        for (std::size_t i = 0; i < P; ++i) g[i] += weight[s] * lg.grad[i];
        loss += weight[s] * lg.loss;
      }
    }
    for (std::size_t i = 0; i < P; ++i) {
      if (!std::isfinite(g[i])) diverged("pooled", server.round, "non-finite gradient");
      y[i] -= plan.learning_rate * g[i];
    }
    loss_total += loss;
  }
  out.steps = K;
  out.train_loss = loss_total / static_cast<double>(K);
  out.y = std::move(y);
  return out;
}

}  // namespace fedperi::fedproto
