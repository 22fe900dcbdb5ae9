#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace fedperi::evalstats {

// Sorted subset of [0, n) of size `target`, drawn without replacement from
// the stream keyed by (seed, "downsample", repeat).
std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t target, std::uint64_t seed,
                                            std::size_t repeat);

// Retrains on the given subset of the larger site's training records and
// returns test AUROC per site per outcome (site x K).
using RepeatFn =
    std::function<std::vector<std::vector<double>>(std::size_t repeat, const std::vector<std::size_t>& subset)>;

struct DownsampleResult {
  std::vector<std::string> sites;
  std::size_t repeats = 0;
  std::vector<std::vector<double>> full;  // AUROC of the model trained at raw size (may be empty)
  std::vector<std::vector<double>> mean;  // site x K
  std::vector<std::vector<double>> sd;    // sample SD; 0 for a single repeat
  std::vector<std::vector<std::vector<double>>> per_repeat;

  std::string to_markdown() const;
  std::string to_csv() const;
  nlohmann::json to_json() const;
  static DownsampleResult from_json(const nlohmann::json& j);
};

// Runs `repeats` retrainings on subsets of size `target_n` of the larger
// site's `larger_n` training records. Errors are rethrown tagged with the
// repeat index.
DownsampleResult downsample_experiment(std::vector<std::string> sites, std::size_t larger_n, std::size_t target_n,
                                       std::size_t repeats, std::uint64_t seed, const RepeatFn& run);

}  // namespace fedperi::evalstats
