#include "fedperi/preprocess/timeseries.hpp"

#include <algorithm>

#include "fedperi/common/errors.hpp"

namespace fedperi::preprocess {

ResampledSeries resample_timeseries(std::span<const TimePoint> channel, int duration,
                                    const ChannelStats& stats) {
  if (duration < 1) throw ContractError("resample_timeseries: duration must be >= 1");
  for (std::size_t i = 1; i < channel.size(); ++i)
    if (channel[i].minute <= channel[i - 1].minute)
      throw ContractError("resample_timeseries: duplicate or unordered minute " +
                          std::to_string(channel[i].minute));

  const auto n = static_cast<std::size_t>(duration);
  ResampledSeries out{std::vector<double>(n, stats.median), std::vector<double>(n, 0.0)};

  std::vector<TimePoint> inside;
  for (const TimePoint& p : channel)
    if (p.minute >= 0 && p.minute < duration) inside.push_back(p);
  if (inside.empty()) return out;

  for (const TimePoint& p : inside) {
    out.values[static_cast<std::size_t>(p.minute)] = p.value;
    out.presence[static_cast<std::size_t>(p.minute)] = 1.0;
  }
  const int first = inside.front().minute;
  const int last = inside.back().minute;
  for (int m = 0; m < first; ++m) out.values[static_cast<std::size_t>(m)] = inside.front().value;
  for (int m = last + 1; m < duration; ++m) out.values[static_cast<std::size_t>(m)] = inside.back().value;
  for (std::size_t k = 1; k < inside.size(); ++k) {
    const TimePoint& a = inside[k - 1];
    const TimePoint& b = inside[k];
    const double span = static_cast<double>(b.minute - a.minute);
    for (int m = a.minute + 1; m < b.minute; ++m) {
      const double w = static_cast<double>(m - a.minute) / span;
      out.values[static_cast<std::size_t>(m)] = a.value + w * (b.value - a.value);
    }
  }
  return out;
}

LabSummary lab_summary(std::span<const LabObservation> observations, LabWindow window) {
  const int lo = window == LabWindow::Recent ? -7 : -365;
  const int hi = window == LabWindow::Recent ? -1 : -8;
  std::vector<double> vals;
  for (const LabObservation& o : observations) {
    if (o.day >= 0) throw ContractError("lab_summary: day offsets must be negative");
    if (o.day >= lo && o.day <= hi) vals.push_back(o.value);
  }
  LabSummary s;
  s.count = vals.size();
  if (vals.empty()) return s;
  double total = 0.0;
  for (double v : vals) total += v;
  const double m = total / static_cast<double>(vals.size());
  double ss = 0.0;
  for (double v : vals) ss += (v - m) * (v - m);
  s.mean = m;
  s.variance = ss / static_cast<double>(vals.size());
  s.min = *std::min_element(vals.begin(), vals.end());
  s.max = *std::max_element(vals.begin(), vals.end());
  return s;
}

}  // namespace fedperi::preprocess
