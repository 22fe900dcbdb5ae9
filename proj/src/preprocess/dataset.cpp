#include "fedperi/preprocess/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fedperi/common/errors.hpp"
#include "fedperi/preprocess/timeseries.hpp"

namespace fedperi::preprocess {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

DatasetDims dims_for(const FeatureSchema& schema) {
  return {schema.continuous.size(), schema.binary_branch_width(), schema.high_cardinality.size(),
          schema.timeseries_channels.size()};
}

Example transform_record(const Record& r, const FeatureSchema& schema, const FittedTransform& t,
                         bool include_series) {
  Example ex;
  ex.record_id = r.id;
  ImputedFeatures imp = impute_and_flag(r, schema, t);
  ex.continuous = standardize(imp.continuous, t);
  ex.binary = std::move(imp.binary);
  ex.binary.insert(ex.binary.end(), imp.continuous_presence.begin(), imp.continuous_presence.end());
  ex.binary.insert(ex.binary.end(), imp.binary_presence.begin(), imp.binary_presence.end());
  ex.categorical = std::move(imp.categorical);
  for (std::size_t k = 0; k < kNumOutcomes; ++k) ex.labels[k] = r.labels[k] ? 1.0 : 0.0;
  ex.subgroup = r.subgroup;

  if (include_series) {
    const std::size_t channels = schema.timeseries_channels.size();
    const auto steps = static_cast<std::size_t>(r.duration_minutes);
    const std::size_t width = 2 * channels;
    ex.steps = steps;
    ex.series.assign(steps * width, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      const ChannelStats& cs = t.channels[c];
      const ResampledSeries rs = resample_timeseries(r.timeseries[c], r.duration_minutes, cs);
      for (std::size_t s = 0; s < steps; ++s) {
        ex.series[s * width + c] = cs.std > 0.0 ? (rs.values[s] - cs.mean) / cs.std : 0.0;
        ex.series[s * width + channels + c] = rs.presence[s];
      }
    }
  }
  return ex;
}

Dataset transform_cohort(std::span<const Record> records, const FeatureSchema& schema,
                         const FittedTransform& t, std::string site, bool include_series) {
  Dataset d;
  d.site = std::move(site);
  d.dims = dims_for(schema);
  d.has_series = include_series;
  d.examples.reserve(records.size());
  for (const Record& r : records) d.examples.push_back(transform_record(r, schema, t, include_series));
  return d;
}

Dataset concat_datasets(std::span<const Dataset> parts, std::string site) {
  if (parts.empty()) throw ContractError("concat_datasets of nothing");
  Dataset d;
  d.site = std::move(site);
  d.dims = parts[0].dims;
  d.has_series = parts[0].has_series;
  for (const Dataset& p : parts) {
    if (!(p.dims == d.dims) || p.has_series != d.has_series)
      throw DimensionError("concat_datasets: incompatible datasets");
    d.examples.insert(d.examples.end(), p.examples.begin(), p.examples.end());
  }
  return d;
}

namespace {

constexpr char kMagic[4] = {'F', 'P', 'S', 'D'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw FormatError("cannot write " + path);
  }
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const std::vector<double>& v) {
    pod<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw FormatError("write failed for " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot read " + path);
  }
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 20)) throw FormatError(path_ + ": implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  std::vector<double> doubles() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ull << 32)) throw FormatError(path_ + ": implausible array length");
    std::vector<double> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }
  void raw(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    check();
  }

 private:
  void check() {
    if (!in_) throw FormatError(path_ + ": truncated file");
  }
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  Writer w(path);
  w.raw(kMagic, 4);
  w.pod(kVersion);
  w.str(d.site);
  w.pod<std::uint64_t>(d.dims.continuous);
  w.pod<std::uint64_t>(d.dims.binary);
  w.pod<std::uint64_t>(d.dims.categorical);
  w.pod<std::uint64_t>(d.dims.channels);
  w.pod<std::uint8_t>(d.has_series ? 1 : 0);
  w.pod<std::uint64_t>(d.examples.size());
  for (const Example& ex : d.examples) {
    w.pod<std::int64_t>(ex.record_id);
    w.doubles(ex.continuous);
    w.doubles(ex.binary);
    w.pod<std::uint64_t>(ex.categorical.size());
    for (std::size_t id : ex.categorical) w.pod<std::uint64_t>(id);
    w.pod<std::uint64_t>(ex.steps);
    w.doubles(ex.series);
    for (double y : ex.labels) w.pod(y);
    w.pod<std::uint8_t>(ex.subgroup.sex == Sex::Female ? 0 : 1);
    w.pod<std::uint8_t>(ex.subgroup.race == Race::AfricanAmerican ? 0 : 1);
    w.pod(ex.subgroup.age_years);
  }
  w.finish();
}

Dataset load_dataset(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path + ": not an FPSD dataset");
  if (r.pod<std::uint32_t>() != kVersion) throw FormatError(path + ": unsupported dataset version");
  Dataset d;
  d.site = r.str();
  d.dims.continuous = r.pod<std::uint64_t>();
  d.dims.binary = r.pod<std::uint64_t>();
  d.dims.categorical = r.pod<std::uint64_t>();
  d.dims.channels = r.pod<std::uint64_t>();
  d.has_series = r.pod<std::uint8_t>() != 0;
  const auto n = r.pod<std::uint64_t>();
  d.examples.resize(n);
  for (Example& ex : d.examples) {
    ex.record_id = r.pod<std::int64_t>();
    ex.continuous = r.doubles();
    ex.binary = r.doubles();
    ex.categorical.resize(r.pod<std::uint64_t>());
    for (std::size_t& id : ex.categorical) id = r.pod<std::uint64_t>();
    ex.steps = r.pod<std::uint64_t>();
    ex.series = r.doubles();
    for (double& y : ex.labels) y = r.pod<double>();
    ex.subgroup.sex = r.pod<std::uint8_t>() == 0 ? Sex::Female : Sex::Male;
    ex.subgroup.race = r.pod<std::uint8_t>() == 0 ? Race::AfricanAmerican : Race::NonAfricanAmerican;
    ex.subgroup.age_years = r.pod<double>();
    if (ex.continuous.size() != d.dims.continuous || ex.binary.size() != d.dims.binary ||
        ex.categorical.size() != d.dims.categorical)
      throw FormatError(path + ": example dimensions disagree with header");
  }
  return d;
}

}  // namespace fedperi::preprocess
