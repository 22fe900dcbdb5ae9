#include "fedperi/evalstats/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"
#include "fedperi/common/stats.hpp"
#include "fedperi/common/threads.hpp"

namespace fedperi::evalstats {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kMaxAttempts = 10000;

// Per-outcome columns and descending orders, computed once per set.
struct Prepared {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<std::uint8_t>> labels;
  std::vector<std::vector<std::uint32_t>> orders;
  std::vector<bool> evaluated;

  explicit Prepared(const ScoredSet& set) : n(set.size()), k(set.n_outcomes) {
    set.validate();
    if (n == 0) throw UndefinedMetricError("bootstrap over an empty set");
    for (std::size_t j = 0; j < k; ++j) {
      scores.push_back(set.score_column(j));
      labels.push_back(set.label_column(j));
      orders.push_back(descending_order(scores.back()));
      const auto pos = std::count(labels.back().begin(), labels.back().end(), std::uint8_t{1});
      evaluated.push_back(pos > 0 && static_cast<std::size_t>(pos) < n);
    }
  }

  // AUROC then AUPRC per outcome; false when an evaluated outcome is single-class.
  bool metrics(std::span<const std::uint32_t> w, double* row) const {
    for (std::size_t j = 0; j < k; ++j) {
      if (!evaluated[j]) {
        row[j] = row[k + j] = kNaN;
        continue;
      }
      const double roc = auroc_weighted(orders[j], scores[j], labels[j], w);
      if (std::isnan(roc)) return false;
      row[j] = roc;
      row[k + j] = auprc_weighted(orders[j], scores[j], labels[j], w);
    }
    return true;
  }
};

// Accepted draw for replicate b; returns the number of rejected attempts.
std::uint64_t draw(const Prepared& p, std::uint64_t seed, std::uint64_t stream, std::uint64_t b, double* row) {
  for (std::uint64_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto w = resample_counts(p.n, seed, stream, b, attempt);
    if (p.metrics(w, row)) return attempt;
  }
  throw InstabilityError("bootstrap: replicate " + std::to_string(b) + " never drew both classes");
}

void check(const BootstrapOptions& opts) {
  if (opts.replicates < 1) throw ContractError("bootstrap: need at least one replicate");
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ContractError("bootstrap: alpha must lie in (0, 1)");
}

void check_degeneracy(const ReplicateMatrix& m) {
  if (m.degenerate > m.replicates)
    throw InstabilityError("bootstrap: " + std::to_string(m.degenerate) + " degenerate resamples against " +
                           std::to_string(m.replicates) + " accepted");
}

}  // namespace

std::vector<std::uint32_t> resample_counts(std::size_t n, std::uint64_t seed, std::uint64_t stream,
                                           std::uint64_t replicate, std::uint64_t attempt) {
  KeyedRng rng(seed, "bootstrap", {stream, replicate, attempt});
  std::vector<std::uint32_t> w(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++w[rng.below(n)];
  return w;
}

ReplicateMatrix bootstrap_replicates_serial(const ScoredSet& set, const BootstrapOptions& opts,
                                            std::uint64_t stream) {
  check(opts);
  const Prepared p(set);
  ReplicateMatrix m{opts.replicates, 2 * p.k, std::vector<double>(opts.replicates * 2 * p.k), 0};
  for (std::size_t b = 0; b < opts.replicates; ++b)
    m.degenerate += draw(p, opts.seed, stream, b, &m.values[b * m.width]);
  check_degeneracy(m);
  return m;
}

ReplicateMatrix bootstrap_replicates_omp(const ScoredSet& set, const BootstrapOptions& opts,
                                         std::uint64_t stream) {
  check(opts);
  const Prepared p(set);
  ReplicateMatrix m{opts.replicates, 2 * p.k, std::vector<double>(opts.replicates * 2 * p.k), 0};
  std::vector<std::uint64_t> rejected(opts.replicates, 0);
  const auto B = static_cast<std::int64_t>(opts.replicates);
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < B; ++b) {
    try {
      rejected[b] = draw(p, opts.seed, stream, static_cast<std::uint64_t>(b), &m.values[b * m.width]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (std::uint64_t r : rejected) m.degenerate += r;
  check_degeneracy(m);
  return m;
}

ReplicateMatrix bootstrap_replicates(const ScoredSet& set, const BootstrapOptions& opts, std::uint64_t stream) {
  return configured_threads() > 1 ? bootstrap_replicates_omp(set, opts, stream)
                                  : bootstrap_replicates_serial(set, opts, stream);
}

Interval bootstrap_ci(Metric metric, std::size_t outcome, const ScoredSet& set, const BootstrapOptions& opts) {
  if (outcome >= set.n_outcomes) throw ContractError("bootstrap_ci: outcome index out of range");
  const ReplicateMatrix m = bootstrap_replicates(set, opts);
  const std::size_t j = (metric == Metric::Auroc ? 0 : set.n_outcomes) + outcome;
  std::vector<double> v(m.replicates);
  for (std::size_t b = 0; b < m.replicates; ++b) v[b] = m.at(b, j);
  if (std::isnan(v[0])) throw UndefinedMetricError("bootstrap_ci: metric undefined on this set");
  std::sort(v.begin(), v.end());
  return {percentile_sorted(v, opts.alpha / 2.0), percentile_sorted(v, 1.0 - opts.alpha / 2.0)};
}

double bootstrap_p_value(const std::vector<double>& deltas) {
  if (deltas.empty()) throw ContractError("bootstrap_p_value: no replicates");
  double le = 0.0, ge = 0.0;
  for (double d : deltas) {
    if (d <= 0.0) le += 1.0;
    if (d >= 0.0) ge += 1.0;
  }
  const double denom = static_cast<double>(deltas.size()) + 1.0;
  return std::min(1.0, 2.0 * std::min((le + 1.0) / denom, (ge + 1.0) / denom));
}

namespace {

std::vector<double> p_values(const ReplicateMatrix& a, const ReplicateMatrix& b, std::size_t k, Metric metric) {
  const std::size_t off = metric == Metric::Auroc ? 0 : k;
  std::vector<double> out(k, kNaN);
  for (std::size_t j = 0; j < k; ++j) {
    if (std::isnan(a.at(0, off + j)) || std::isnan(b.at(0, off + j))) continue;
    std::vector<double> d(a.replicates);
    for (std::size_t r = 0; r < a.replicates; ++r) d[r] = a.at(r, off + j) - b.at(r, off + j);
    out[j] = bootstrap_p_value(d);
  }
  return out;
}

}  // namespace

std::vector<double> compare_models(const ScoredSet& a, const ScoredSet& b, Metric metric,
                                   const BootstrapOptions& opts) {
  if (a.n_outcomes != b.n_outcomes || a.labels != b.labels)
    throw ContractError("compare_models: models must be scored on the same records");
  // Same stream for both sides: every replicate resamples identical records.
  // Degeneracy depends only on labels, so both sides accept the same draws.
  const ReplicateMatrix ma = bootstrap_replicates(a, opts, 0);
  const ReplicateMatrix mb = bootstrap_replicates(b, opts, 0);
  return p_values(ma, mb, a.n_outcomes, metric);
}

std::vector<double> compare_independent(const ScoredSet& a, const ScoredSet& b, Metric metric,
                                        const BootstrapOptions& opts) {
  if (a.n_outcomes != b.n_outcomes) throw ContractError("compare_independent: outcome counts differ");
  const ReplicateMatrix ma = bootstrap_replicates(a, opts, 1);
  const ReplicateMatrix mb = bootstrap_replicates(b, opts, 2);
  return p_values(ma, mb, a.n_outcomes, metric);
}

}  // namespace fedperi::evalstats
