#include "fedperi/common/stats.hpp"

#include <algorithm>
#include <cmath>

#include "fedperi/common/errors.hpp"

namespace fedperi {

double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractError("percentile of empty sample");
  if (q < 0.0 || q > 1.0) throw ContractError("percentile level outside [0, 1]");
  const double pos = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, q);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw ContractError("mean of empty sample");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double population_variance(std::span<const double> values) {
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size() - 1));
}

}  // namespace fedperi
