#include "fedperi/evalstats/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedperi/common/errors.hpp"

namespace fedperi::evalstats {

std::vector<double> ScoredSet::score_column(std::size_t k) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores[i * n_outcomes + k];
  return out;
}

std::vector<std::uint8_t> ScoredSet::label_column(std::size_t k) const {
  std::vector<std::uint8_t> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels[i * n_outcomes + k];
  return out;
}

void ScoredSet::validate() const {
  if (n_outcomes == 0 || scores.size() % n_outcomes != 0 || labels.size() != scores.size())
    throw ContractError("scored set: score and label arrays disagree");
  if (!subgroups.empty() && subgroups.size() != size())
    throw ContractError("scored set: subgroup count disagrees with record count");
  for (double s : scores)
    if (!std::isfinite(s)) throw ContractError("scored set: non-finite score");
  for (std::uint8_t y : labels)
    if (y > 1) throw ContractError("scored set: labels must be 0 or 1");
}

ScoredSet ScoredSet::subset(std::span<const std::size_t> rows) const {
  ScoredSet out;
  out.site = site;
  out.n_outcomes = n_outcomes;
  out.scores.reserve(rows.size() * n_outcomes);
  out.labels.reserve(rows.size() * n_outcomes);
  for (std::size_t r : rows) {
    if (r >= size()) throw ContractError("scored set: subset row out of range");
    for (std::size_t k = 0; k < n_outcomes; ++k) {
      out.scores.push_back(scores[r * n_outcomes + k]);
      out.labels.push_back(labels[r * n_outcomes + k]);
    }
    if (!subgroups.empty()) out.subgroups.push_back(subgroups[r]);
  }
  return out;
}

namespace {

void check_sizes(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("metric: score and label lengths differ");
}

}  // namespace

std::vector<std::uint32_t> descending_order(std::span<const double> scores) {
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  return order;
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_sizes(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] < scores[b]; });

  // Midranks: a tie group spanning ranks i+1..j gets (i + 1 + j) / 2.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t q = i; q < j; ++q)
      if (labels[order[q]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetricError("AUROC needs both classes");
  const double p = static_cast<double>(n_pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_sizes(scores, labels);
  const auto order = descending_order(scores);
  std::vector<std::uint32_t> ones(scores.size(), 1);
  const double ap = auprc_weighted(order, scores, labels, ones);
  if (std::isnan(ap)) throw UndefinedMetricError("AUPRC needs at least one positive");
  return ap;
}

double auroc_weighted(std::span<const std::uint32_t> order, std::span<const double> scores,
                      std::span<const std::uint8_t> labels, std::span<const std::uint32_t> weights) {
  // Sweep from the lowest score up: each positive earns the negatives below
  // it plus half of the negatives tied with it.
  double neg_below = 0.0, credit = 0.0, n_pos = 0.0;
  const std::size_t n = order.size();
  for (std::size_t e = n; e > 0;) {
    std::size_t s = e;
    const double v = scores[order[e - 1]];
    while (s > 0 && scores[order[s - 1]] == v) --s;
    double pos = 0.0, neg = 0.0;
    for (std::size_t q = s; q < e; ++q) {
      const double w = weights[order[q]];
      if (labels[order[q]]) pos += w;
      else neg += w;
    }
    credit += pos * (neg_below + 0.5 * neg);
    neg_below += neg;
    n_pos += pos;
    e = s;
  }
  if (n_pos == 0.0 || neg_below == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return credit / (n_pos * neg_below);
}

double auprc_weighted(std::span<const std::uint32_t> order, std::span<const double> scores,
                      std::span<const std::uint8_t> labels, std::span<const std::uint32_t> weights) {
  double total_pos = 0.0;
  for (std::uint32_t i : order)
    if (labels[i]) total_pos += weights[i];
  if (total_pos == 0.0) return std::numeric_limits<double>::quiet_NaN();

  double tp = 0.0, fp = 0.0, ap = 0.0;
  const std::size_t n = order.size();
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    const double v = scores[order[s]];
    double pos = 0.0;
    while (e < n && scores[order[e]] == v) {
      const double w = weights[order[e]];
      if (labels[order[e]]) pos += w;
      else fp += w;
      ++e;
    }
    tp += pos;
    if (pos > 0.0) ap += (tp / (tp + fp)) * (pos / total_pos);
    s = e;
  }
  return ap;
}

}  // namespace fedperi::evalstats
