#include "fedperi/preprocess/split.hpp"

#include <algorithm>

#include "fedperi/common/errors.hpp"

namespace fedperi::preprocess {

CohortSplit chronological_split(Cohort cohort) {
  const std::size_t n = cohort.size();
  if (n < 10) throw SplitError("chronological split needs at least 10 records, got " + std::to_string(n));
  const std::size_t n_train = 63 * n / 100;
  const std::size_t n_val = 7 * n / 100;
  if (n_val == 0)
    throw SplitError("chronological split of " + std::to_string(n) + " records leaves validation empty");

  std::stable_sort(cohort.begin(), cohort.end(), [](const Record& a, const Record& b) {
    if (a.surgery_time != b.surgery_time) return a.surgery_time < b.surgery_time;
    return a.id < b.id;
  });

  CohortSplit out;
  auto first = std::make_move_iterator(cohort.begin());
  out.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(first + static_cast<std::ptrdiff_t>(n_train),
                        first + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(cohort.end()));
  return out;
}

}  // namespace fedperi::preprocess
