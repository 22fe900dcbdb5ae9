#pragma once

#include <string>

#include "fedperi/preprocess/record.hpp"

// Cohort file format:
//   tabular CSV   record_id,site,surgery_time,duration_min,sex,race,age_years,
//                 <continuous...>,<binary...>,<high-cardinality...>,<outcomes...>
//                 empty cell = missing; binary and outcome cells are 0/1;
//                 sex is F/M; race is AA/non-AA.
//   time series   long form: record_id,channel,minute,value
//   schema        JSON (see FeatureSchema::to_json)
// Doubles are written in shortest round-trip form, so write/read is exact.
namespace fedperi::preprocess {

void write_cohort(const Cohort& cohort, const FeatureSchema& schema, const std::string& tabular_path,
                  const std::string& timeseries_path);

Cohort read_cohort(const FeatureSchema& schema, const std::string& tabular_path,
                   const std::string& timeseries_path);

std::string format_double(double v);

}  // namespace fedperi::preprocess
