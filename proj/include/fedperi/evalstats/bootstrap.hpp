#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fedperi/evalstats/metrics.hpp"

namespace fedperi::evalstats {

enum class Metric { Auroc, Auprc };

struct BootstrapOptions {
  std::size_t replicates = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
};

struct Interval {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
};

// Record-level multiplicities of one resample, drawn from the stream keyed
// by (seed, "bootstrap", stream, replicate, attempt).
std::vector<std::uint32_t> resample_counts(std::size_t n, std::uint64_t seed, std::uint64_t stream,
                                           std::uint64_t replicate, std::uint64_t attempt);

// Replicate matrix of a joint resampling: row b holds AUROC then AUPRC for
// each outcome (2K values). Outcomes undefined on the full set are NaN and do
// not count towards degeneracy. A resample that leaves an evaluated outcome
// single-class is redrawn; more redraws than accepted replicates is an
// InstabilityError.
struct ReplicateMatrix {
  std::size_t replicates = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::size_t degenerate = 0;

  double at(std::size_t b, std::size_t j) const { return values[b * width + j]; }
};

ReplicateMatrix bootstrap_replicates_serial(const ScoredSet& set, const BootstrapOptions& opts,
                                            std::uint64_t stream = 0);
ReplicateMatrix bootstrap_replicates_omp(const ScoredSet& set, const BootstrapOptions& opts,
                                         std::uint64_t stream = 0);
ReplicateMatrix bootstrap_replicates(const ScoredSet& set, const BootstrapOptions& opts,
                                     std::uint64_t stream = 0);

// Percentile interval [alpha/2, 1 - alpha/2] of one metric of one outcome.
Interval bootstrap_ci(Metric metric, std::size_t outcome, const ScoredSet& set, const BootstrapOptions& opts);

// Two-sided bootstrap p-value from replicate differences:
// min(1, 2 * min((#{d <= 0} + 1) / (B + 1), (#{d >= 0} + 1) / (B + 1))).
double bootstrap_p_value(const std::vector<double>& deltas);

// Paired comparison of two models scored on the same records. One p-value per
// outcome; NaN where the metric is undefined.
std::vector<double> compare_models(const ScoredSet& a, const ScoredSet& b, Metric metric,
                                   const BootstrapOptions& opts);

// Comparison of one model across two independent record sets (strata).
std::vector<double> compare_independent(const ScoredSet& a, const ScoredSet& b, Metric metric,
                                        const BootstrapOptions& opts);

}  // namespace fedperi::evalstats
