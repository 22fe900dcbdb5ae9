#pragma once

#include <span>

#include "fedperi/fedproto/plan.hpp"
#include "fedperi/fedproto/state.hpp"

namespace fedperi::fedproto {

// Sample-size weighted mean of the client models, summed in the given order:
// x+ = sum_k (n_k / N) y_k. SCAFFOLD uses the same update (server learning
// rate 1 makes x + sum_k w_k (y_k - x) the same mean) and additionally
// c+ = c + (1 / total_clients) sum_k delta_k.
// Throws ProtocolError on an empty update list or a length mismatch.
ServerState aggregate(const ServerState& server, std::span<const ClientUpdate> updates, Paradigm paradigm,
                      std::size_t total_clients);

}  // namespace fedperi::fedproto
