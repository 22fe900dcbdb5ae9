#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedperi/preprocess/schema.hpp"

namespace fedperi::preprocess {

enum class Sex { Female, Male };
enum class Race { AfricanAmerican, NonAfricanAmerican };

struct Subgroup {
  Sex sex = Sex::Female;
  Race race = Race::NonAfricanAmerican;
  double age_years = 18.0;
};

struct TimePoint {
  int minute = 0;
  double value = 0.0;
};

// One raw surgery as it leaves the source system: missing values are empty
// optionals, categorical values are labels, time series are sparse.
struct Record {
  std::int64_t id = 0;
  std::string site;
  std::int64_t surgery_time = 0;  // seconds since the Unix epoch
  int duration_minutes = 1;
  std::vector<std::optional<double>> continuous;
  std::vector<std::optional<bool>> binary;
  std::vector<std::optional<std::string>> categorical;
  std::vector<std::vector<TimePoint>> timeseries;  // one list per channel
  std::array<bool, kNumOutcomes> labels{};
  Subgroup subgroup;
};

using Cohort = std::vector<Record>;

// Throws ContractError when the record disagrees with the schema, has
// non-increasing minute offsets, or describes a patient younger than 18.
void validate_record(const Record& record, const FeatureSchema& schema);

}  // namespace fedperi::preprocess
