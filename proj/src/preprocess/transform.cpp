#include "fedperi/preprocess/transform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/stats.hpp"

namespace fedperi::preprocess {

using nlohmann::json;

namespace {

ContinuousStats summarize(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  ContinuousStats s;
  s.p0_5 = percentile_sorted(values, 0.005);
  s.p1 = percentile_sorted(values, 0.01);
  s.p5 = percentile_sorted(values, 0.05);
  s.p95 = percentile_sorted(values, 0.95);
  s.p99 = percentile_sorted(values, 0.99);
  s.p99_5 = percentile_sorted(values, 0.995);
  s.median = percentile_sorted(values, 0.5);
  s.mean = fedperi::mean(values);
  s.std = std::sqrt(population_variance(values));
  s.degenerate = s.std == 0.0;
  return s;
}

}  // namespace

FittedTransform fit(std::span<const Record> train, const FeatureSchema& schema, std::string scope,
                    std::uint64_t seed) {
  if (train.empty()) throw FitError("cannot fit a transform on an empty training cohort");
  FittedTransform t;
  t.scope = std::move(scope);
  t.seed = seed;

  for (std::size_t f = 0; f < schema.continuous.size(); ++f) {
    std::vector<double> observed;
    observed.reserve(train.size());
    for (const Record& r : train)
      if (r.continuous[f]) observed.push_back(*r.continuous[f]);
    if (observed.empty())
      throw FitError("continuous feature '" + schema.continuous[f].name +
                     "' has no observed training values");
    t.continuous.push_back(summarize(std::move(observed)));
  }

  for (std::size_t c = 0; c < schema.timeseries_channels.size(); ++c) {
    std::vector<double> observed;
    for (const Record& r : train)
      for (const TimePoint& p : r.timeseries[c]) observed.push_back(p.value);
    ChannelStats cs;
    if (!observed.empty()) {
      const ContinuousStats s = summarize(std::move(observed));
      cs = {s.median, s.mean, s.std, true};
    }
    t.channels.push_back(cs);
  }

  for (const auto& feature : schema.high_cardinality) {
    std::vector<std::uint32_t> map(feature.vocab_size(), 0);
    std::vector<bool> seen(feature.vocab_size(), false);
    const std::size_t f = static_cast<std::size_t>(&feature - schema.high_cardinality.data());
    for (const Record& r : train)
      if (r.categorical[f]) seen[feature.id_of(*r.categorical[f])] = true;
    for (std::size_t id = 1; id < map.size(); ++id)
      if (seen[id]) map[id] = static_cast<std::uint32_t>(id);
    t.vocabulary.push_back(std::move(map));
  }
  return t;
}

double winsorize_outliers(double value, const ContinuousStats& s, KeyedRng& rng) {
  if (value > s.p99) return rng.uniform(s.p95, s.p99_5);
  if (value < s.p1) return rng.uniform(s.p0_5, s.p5);
  return value;
}

KeyedRng winsorize_stream(std::uint64_t seed, std::string_view site, std::int64_t record_id,
                          std::size_t feature) {
  return KeyedRng(seed, "preprocess",
                  {fnv1a(site), static_cast<std::uint64_t>(record_id), static_cast<std::uint64_t>(feature)});
}

ImputedFeatures impute_and_flag(const Record& r, const FeatureSchema& schema, const FittedTransform& t) {
  ImputedFeatures out;
  const std::size_t nc = schema.continuous.size();
  out.continuous.resize(nc);
  out.continuous_presence.resize(nc);
  for (std::size_t f = 0; f < nc; ++f) {
    if (r.continuous[f]) {
      KeyedRng rng = winsorize_stream(t.seed, r.site, r.id, f);
      out.continuous[f] = winsorize_outliers(*r.continuous[f], t.continuous[f], rng);
      out.continuous_presence[f] = 1.0;
    } else {
      out.continuous[f] = t.continuous[f].median;
      out.continuous_presence[f] = 0.0;
    }
  }
  for (const auto& v : r.binary) {
    out.binary.push_back(v && *v ? 1.0 : 0.0);
    out.binary_presence.push_back(v ? 1.0 : 0.0);
  }
  for (std::size_t f = 0; f < schema.high_cardinality.size(); ++f) {
    std::size_t id = 0;
    if (r.categorical[f]) id = t.vocabulary[f][schema.high_cardinality[f].id_of(*r.categorical[f])];
    out.categorical.push_back(id);
  }
  return out;
}

std::vector<double> standardize(std::span<const double> values, const FittedTransform& t) {
  if (values.size() != t.continuous.size())
    throw DimensionError("standardize: vector length does not match the transform");
  std::vector<double> z(values.size());
  for (std::size_t f = 0; f < values.size(); ++f) {
    const ContinuousStats& s = t.continuous[f];
    z[f] = s.degenerate ? 0.0 : (values[f] - s.mean) / s.std;
  }
  return z;
}

json FittedTransform::to_json() const {
  json j;
  j["scope"] = scope;
  j["seed"] = seed;
  j["continuous"] = json::array();
  for (const auto& s : continuous)
    j["continuous"].push_back({{"p0_5", s.p0_5},
                               {"p1", s.p1},
                               {"p5", s.p5},
                               {"p95", s.p95},
                               {"p99", s.p99},
                               {"p99_5", s.p99_5},
                               {"median", s.median},
                               {"mean", s.mean},
                               {"std", s.std},
                               {"degenerate", s.degenerate}});
  j["channels"] = json::array();
  for (const auto& c : channels)
    j["channels"].push_back({{"median", c.median}, {"mean", c.mean}, {"std", c.std}, {"observed", c.observed}});
  j["vocabulary"] = vocabulary;
  return j;
}

FittedTransform FittedTransform::from_json(const json& j) {
  FittedTransform t;
  try {
    t.scope = j.at("scope").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("continuous"))
      t.continuous.push_back({s.at("p0_5").get<double>(), s.at("p1").get<double>(), s.at("p5").get<double>(),
                              s.at("p95").get<double>(), s.at("p99").get<double>(),
                              s.at("p99_5").get<double>(), s.at("median").get<double>(),
                              s.at("mean").get<double>(), s.at("std").get<double>(),
                              s.at("degenerate").get<bool>()});
    for (const auto& c : j.at("channels"))
      t.channels.push_back({c.at("median").get<double>(), c.at("mean").get<double>(),
                            c.at("std").get<double>(), c.at("observed").get<bool>()});
    t.vocabulary = j.at("vocabulary").get<std::vector<std::vector<std::uint32_t>>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed transform JSON: ") + e.what());
  }
  return t;
}

void save_transform(const FittedTransform& transform, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << transform.to_json().dump(2) << '\n';
}

FittedTransform load_transform(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  try {
    return FittedTransform::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace fedperi::preprocess
