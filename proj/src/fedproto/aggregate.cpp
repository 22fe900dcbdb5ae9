#include "fedperi/fedproto/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include "fedperi/common/errors.hpp"

namespace fedperi::fedproto {

ServerState aggregate(const ServerState& server, std::span<const ClientUpdate> updates, Paradigm paradigm,
                      std::size_t total_clients) {
  if (updates.empty()) throw ProtocolError("aggregate: no client updates");
  const std::size_t P = server.x.size();
  std::size_t total = 0;
  for (const ClientUpdate& u : updates) {
    if (u.y.size() != P)
      throw ProtocolError("aggregate: site " + u.site + " sent " + std::to_string(u.y.size()) +
                          " parameters, expected " + std::to_string(P));
    if (u.n == 0) throw ProtocolError("aggregate: site " + u.site + " reports zero samples");
    total += u.n;
  }

  ServerState next;
  next.round = server.round + 1;
  next.x.resize(P);
  const double N = static_cast<double>(total);
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const double w = static_cast<double>(updates[k].n) / N;
    const std::vector<double>& y = updates[k].y;
    if (k == 0)
      for (std::size_t i = 0; i < P; ++i) next.x[i] = w * y[i];
    else
      for (std::size_t i = 0; i < P; ++i) next.x[i] += w * y[i];
  }
  // The weights sum to one only up to rounding, which can carry the mean an
  // ulp outside [min_k y_k, max_k y_k]; pull it back onto the hull.
  if (updates.size() > 1)
    for (std::size_t i = 0; i < P; ++i) {
      double lo = updates[0].y[i], hi = lo;
      for (const ClientUpdate& u : updates) {
        lo = std::min(lo, u.y[i]);
        hi = std::max(hi, u.y[i]);
      }
      next.x[i] = std::clamp(next.x[i], lo, hi);
    }

  if (paradigm == Paradigm::Scaffold) {
    if (server.control.size() != P) throw ProtocolError("aggregate: server control variate has wrong length");
    if (total_clients < updates.size()) throw ProtocolError("aggregate: more updates than clients");
    next.control = server.control;
    std::vector<double> sum(P, 0.0);
    for (const ClientUpdate& u : updates) {
      if (u.delta_control.size() != P)
        throw ProtocolError("aggregate: site " + u.site + " sent a control update of wrong length");
      for (std::size_t i = 0; i < P; ++i) sum[i] += u.delta_control[i];
    }
    const double inv = 1.0 / static_cast<double>(total_clients);
    for (std::size_t i = 0; i < P; ++i) next.control[i] += inv * sum[i];
  }
  for (double v : next.x)
    if (!std::isfinite(v)) throw DivergenceError("aggregate: non-finite global parameter after round " +
                                                 std::to_string(next.round));
  return next;
}

}  // namespace fedperi::fedproto
