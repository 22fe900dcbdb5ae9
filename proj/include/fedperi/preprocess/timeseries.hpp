#pragma once

#include <optional>
#include <span>
#include <vector>

#include "fedperi/preprocess/record.hpp"
#include "fedperi/preprocess/transform.hpp"

namespace fedperi::preprocess {

struct ResampledSeries {
  std::vector<double> values;    // one per minute, length == duration
  std::vector<double> presence;  // 1 at originally observed minutes
};

// Places observations on the one-minute grid [0, duration). Interior gaps are
// linearly interpolated, leading and trailing gaps take the nearest observed
// value, and a channel with no observation inside the grid becomes the
// training median. Duplicate or decreasing minutes are a contract error.
ResampledSeries resample_timeseries(std::span<const TimePoint> channel, int duration,
                                    const ChannelStats& stats);

// Lab observation: day offset relative to surgery (always negative).
struct LabObservation {
  int day = -1;
  double value = 0.0;
};

enum class LabWindow {
  Recent,     // [-7, 0): within seven days before surgery
  Historical  // [-365, -8]: eight to 365 days before surgery
};

struct LabSummary {
  std::size_t count = 0;
  std::optional<double> mean, variance, min, max;  // empty when count == 0
};

// Count, mean, population variance, min and max over the observations that
// fall in the window.
LabSummary lab_summary(std::span<const LabObservation> observations, LabWindow window);

}  // namespace fedperi::preprocess
