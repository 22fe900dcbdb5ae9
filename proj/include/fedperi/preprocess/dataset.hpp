#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedperi/preprocess/record.hpp"
#include "fedperi/preprocess/transform.hpp"

namespace fedperi::preprocess {

// One record after the fitted transform. This type is distinct from Record
// so that a transform can never be applied twice.
struct Example {
  std::int64_t record_id = 0;
  std::vector<double> continuous;        // z-scored
  std::vector<double> binary;            // binary values, continuous presence, binary presence
  std::vector<std::size_t> categorical;  // model vocabulary ids
  std::size_t steps = 0;                 // series length in minutes (0 when absent)
  std::vector<double> series;            // steps x (2 * channels): z-scored values then presence
  std::array<double, kNumOutcomes> labels{};
  Subgroup subgroup;
};

struct DatasetDims {
  std::size_t continuous = 0;
  std::size_t binary = 0;
  std::size_t categorical = 0;
  std::size_t channels = 0;

  friend bool operator==(const DatasetDims&, const DatasetDims&) = default;
};

struct Dataset {
  std::string site;
  DatasetDims dims;
  bool has_series = false;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

DatasetDims dims_for(const FeatureSchema& schema);

Example transform_record(const Record& record, const FeatureSchema& schema, const FittedTransform& transform,
                         bool include_series);

Dataset transform_cohort(std::span<const Record> records, const FeatureSchema& schema,
                         const FittedTransform& transform, std::string site, bool include_series);

// Concatenation in argument order (central learning's pooled view).
Dataset concat_datasets(std::span<const Dataset> parts, std::string site);

// Binary container "FPSD": magic, u32 version, then little-endian fields.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace fedperi::preprocess
