#pragma once

#include <span>
#include <vector>

namespace fedperi {

// Percentile of an ascending-sorted sample by linear interpolation between
// closest ranks: position (n - 1) * q. q in [0, 1].
double percentile_sorted(std::span<const double> sorted, double q);

// Sorts a copy and calls percentile_sorted.
double percentile(std::vector<double> values, double q);

double mean(std::span<const double> values);

// Population variance (divides by n).
double population_variance(std::span<const double> values);

// Sample standard deviation (divides by n - 1); 0 for fewer than two values.
double sample_stddev(std::span<const double> values);

}  // namespace fedperi
