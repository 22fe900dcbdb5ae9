#include "fedperi/evalstats/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedperi/common/errors.hpp"

namespace fedperi::evalstats {

namespace {

constexpr int kMaxIterations = 1000;
constexpr double kEps = 1e-16;

double gamma_p_series(double a, double x) {
  double term = 1.0 / a, sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) throw StatTestError("gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi2_sf(double x, double dof) {
  if (!(dof > 0.0)) throw StatTestError("chi2_sf: degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(dof / 2.0, x / 2.0);
}

TestResult chi2_test(const std::vector<std::vector<double>>& table) {
  const std::size_t r = table.size();
  if (r < 2) throw StatTestError("chi2_test: need at least two rows");
  const std::size_t k = table[0].size();
  if (k < 2) throw StatTestError("chi2_test: need at least two columns");
  std::vector<double> row(r, 0.0), col(k, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (table[i].size() != k) throw StatTestError("chi2_test: ragged table");
    for (std::size_t j = 0; j < k; ++j) {
      const double v = table[i][j];
      if (!(v >= 0.0) || !std::isfinite(v)) throw StatTestError("chi2_test: counts must be finite and >= 0");
      row[i] += v;
      col[j] += v;
      total += v;
    }
  }
  for (double v : row)
    if (v == 0.0) throw StatTestError("chi2_test: a row total is zero");
  for (double v : col)
    if (v == 0.0) throw StatTestError("chi2_test: a column total is zero");

  double stat = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double expected = row[i] * col[j] / total;
      const double diff = table[i][j] - expected;
      stat += diff * diff / expected;
    }
  const double dof = static_cast<double>((r - 1) * (k - 1));
  return {stat, dof, chi2_sf(stat, dof)};
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  std::size_t non_empty = 0;
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].empty()) ++non_empty;
    for (double v : groups[g]) {
      if (!std::isfinite(v)) throw StatTestError("kruskal_wallis: non-finite observation");
      all.emplace_back(v, g);
    }
  }
  if (non_empty < 2) throw StatTestError("kruskal_wallis: need at least two non-empty groups");
  std::sort(all.begin(), all.end());

  const std::size_t n = all.size();
  std::vector<double> rank_sum(groups.size(), 0.0);
  double ties = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double midrank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t q = i; q < j; ++q) rank_sum[all[q].second] += midrank;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double N = static_cast<double>(n);
  const double correction = 1.0 - ties / (N * N * N - N);
  if (correction <= 0.0) throw StatTestError("kruskal_wallis: all observations are tied");

  double h = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    if (!groups[g].empty()) h += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
  h = (12.0 / (N * (N + 1.0)) * h - 3.0 * (N + 1.0)) / correction;
  h = std::max(h, 0.0);
  const double dof = static_cast<double>(non_empty - 1);
  return {h, dof, chi2_sf(h, dof)};
}

std::vector<double> bonferroni(std::span<const double> p_values, std::size_t m) {
  if (m < 1) throw ContractError("bonferroni: m must be >= 1");
  std::vector<double> out(p_values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(1.0, p_values[i] * static_cast<double>(m));
  return out;
}

}  // namespace fedperi::evalstats
