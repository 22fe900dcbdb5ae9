#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedperi/preprocess/record.hpp"

namespace fedperi::evalstats {

// Scores and labels of one model on one record set, row-major n x K.
struct ScoredSet {
  std::string site;
  std::size_t n_outcomes = preprocess::kNumOutcomes;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  std::vector<preprocess::Subgroup> subgroups;

  std::size_t size() const { return n_outcomes == 0 ? 0 : scores.size() / n_outcomes; }
  std::vector<double> score_column(std::size_t k) const;
  std::vector<std::uint8_t> label_column(std::size_t k) const;
  // Throws ContractError when sizes disagree or a score is not finite.
  void validate() const;
  // Records selected by `rows`, in that order.
  ScoredSet subset(std::span<const std::size_t> rows) const;
};

// Concordance probability with ties credited 1/2, via midrank sums.
// Throws UndefinedMetricError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Average precision. Equal scores form a single cut. Throws
// UndefinedMetricError when there are no positives.
double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Indices sorted by descending score; ties keep index order.
std::vector<std::uint32_t> descending_order(std::span<const double> scores);

// Metrics over a multiset given by integer multiplicities, sweeping a
// precomputed descending order. Used by the bootstrap so a resample never
// has to be sorted again. Both return NaN when the weighted set lacks a
// class the metric needs.
double auroc_weighted(std::span<const std::uint32_t> order, std::span<const double> scores,
                      std::span<const std::uint8_t> labels, std::span<const std::uint32_t> weights);
double auprc_weighted(std::span<const std::uint32_t> order, std::span<const double> scores,
                      std::span<const std::uint8_t> labels, std::span<const std::uint32_t> weights);

}  // namespace fedperi::evalstats
