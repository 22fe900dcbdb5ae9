#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedperi/fedproto/plan.hpp"
#include "fedperi/fedproto/state.hpp"
#include "fedperi/riskmodel/model.hpp"

namespace fedperi::fedproto {

// Minibatch index sequence of one site: permutation q of [0, n) comes from
// the stream keyed by (seed, "minibatch", fnv1a(site), q) and is cut into
// ceil(n / B) batches, the last one partial. Batch t of the sequence is
// batch t mod ceil(n/B) of permutation t div ceil(n/B), so local epochs,
// rounds and paradigms all index the same stream.
class BatchSequence {
 public:
  BatchSequence(std::uint64_t seed, const std::string& site, std::size_t n, std::size_t batch_size);

  std::size_t batches_per_epoch() const { return per_epoch_; }
  std::span<const std::size_t> batch(std::uint64_t t);

 private:
  std::uint64_t seed_;
  std::uint64_t site_key_;
  std::size_t n_;
  std::size_t batch_size_;
  std::size_t per_epoch_;
  std::uint64_t cached_ = UINT64_MAX;
  std::vector<std::size_t> perm_;
};

// K = E * ceil(n / B) SGD steps from y0 = x.
//   fedavg:   y <- y - eta * g(y)
//   fedprox:  y <- y - eta * (g(y) + mu (y - x))
//   scaffold: y <- y - eta * (g(y) - c_i + c), then
//             c_i+ = c_i - c + (x - y) / (K eta), returned as delta = c_i+ - c_i
// Throws ClientError on empty data and DivergenceError (naming round and
// site) on a non-finite loss or gradient.
ClientUpdate local_train(const ClientState& client, const ServerState& server, const TrainPlan& plan,
                         const preprocess::Dataset& train, const riskmodel::ModelConfig& config);

// One round (E epochs) of central learning on several sites pooled. Each
// step draws one minibatch from every site's own sequence and descends on
// sum_s (n_s / N) * loss_s; an epoch is ceil(max_s n_s / B) steps and smaller
// sites wrap into their next permutation.
ClientUpdate central_train(const ServerState& server, const TrainPlan& plan,
                           std::span<const preprocess::Dataset* const> sites, const riskmodel::ModelConfig& config);

}  // namespace fedperi::fedproto
