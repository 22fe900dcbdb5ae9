#pragma once

#include <span>
#include <vector>

namespace fedperi::evalstats {

struct TestResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

// Regularized upper incomplete gamma Q(a, x), by series below a + 1 and
// Lentz's continued fraction above.
double gamma_q(double a, double x);
// Survival function of the chi-square distribution.
double chi2_sf(double x, double dof);

// Pearson chi-square test of independence on an r x k table of counts
// (rows given as equal-length vectors). A table with a zero row or column
// total, or fewer than two rows or columns, is a StatTestError.
TestResult chi2_test(const std::vector<std::vector<double>>& table);

// Kruskal-Wallis H with midranks and the tie correction. Needs at least two
// non-empty groups and not all values tied.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// min(1, p * m) elementwise.
std::vector<double> bonferroni(std::span<const double> p_values, std::size_t m);

}  // namespace fedperi::evalstats
