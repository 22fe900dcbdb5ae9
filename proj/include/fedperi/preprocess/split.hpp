#pragma once

#include "fedperi/preprocess/record.hpp"

namespace fedperi::preprocess {

struct CohortSplit {
  Cohort train;
  Cohort validation;
  Cohort test;
};

// Sorts by (surgery_time, record id) and cuts floor(0.63 n) / floor(0.07 n) /
// remainder. Fewer than 10 records, or a split leaving validation empty, is a
// SplitError.
CohortSplit chronological_split(Cohort cohort);

}  // namespace fedperi::preprocess
