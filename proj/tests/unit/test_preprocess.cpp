#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fedperi/common/errors.hpp"
#include "fedperi/preprocess/cohort_io.hpp"
#include "fedperi/preprocess/dataset.hpp"
#include "fedperi/preprocess/split.hpp"
#include "fedperi/preprocess/timeseries.hpp"
#include "fedperi/preprocess/transform.hpp"
#include "fixtures.hpp"

using namespace fedperi;
using namespace fedperi::preprocess;

namespace {

struct TinyCohort {
  FeatureSchema schema;
  Cohort cohort;
};

TinyCohort tiny_cohort(std::size_t n = 400) {
  const auto world = fixture::tiny_world();
  const auto model = synthgen::make_generator(world, fixture::tiny_site("A", n, 11));
  return {synthgen::make_schema(world), synthgen::generate_site(model)};
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fedperi_pre_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool same_record(const Record& a, const Record& b) {
  if (a.id != b.id || a.site != b.site || a.surgery_time != b.surgery_time ||
      a.duration_minutes != b.duration_minutes || a.continuous != b.continuous || a.binary != b.binary ||
      a.categorical != b.categorical || a.labels != b.labels || a.subgroup.sex != b.subgroup.sex ||
      a.subgroup.race != b.subgroup.race || a.subgroup.age_years != b.subgroup.age_years)
    return false;
  if (a.timeseries.size() != b.timeseries.size()) return false;
  for (std::size_t c = 0; c < a.timeseries.size(); ++c) {
    if (a.timeseries[c].size() != b.timeseries[c].size()) return false;
    for (std::size_t i = 0; i < a.timeseries[c].size(); ++i)
      if (a.timeseries[c][i].minute != b.timeseries[c][i].minute ||
          a.timeseries[c][i].value != b.timeseries[c][i].value)
        return false;
  }
  return true;
}

bool same_example(const Example& a, const Example& b) {
  return a.record_id == b.record_id && a.continuous == b.continuous && a.binary == b.binary &&
         a.categorical == b.categorical && a.steps == b.steps && a.series == b.series && a.labels == b.labels &&
         a.subgroup.sex == b.subgroup.sex && a.subgroup.race == b.subgroup.race &&
         a.subgroup.age_years == b.subgroup.age_years;
}

}  // namespace

TEST_CASE("chronological split sizes and order") {
  for (std::size_t n : {15, 29, 99, 400, 1001}) {
    Cohort c(n);
    for (std::size_t i = 0; i < n; ++i) {
      c[i].id = static_cast<std::int64_t>(i);
      c[i].surgery_time = static_cast<std::int64_t>((i * 7919) % 97);  // with ties
    }
    const auto s = chronological_split(c);
    CHECK(s.train.size() == static_cast<std::size_t>(std::floor(0.63 * n)));
    CHECK(s.validation.size() == static_cast<std::size_t>(std::floor(0.07 * n)));
    CHECK(s.train.size() + s.validation.size() + s.test.size() == n);

    Cohort all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    for (std::size_t i = 1; i < all.size(); ++i) {
      const auto key = [](const Record& r) { return std::pair(r.surgery_time, r.id); };
      CHECK(key(all[i - 1]) < key(all[i]));
    }

    std::mt19937 shuffle_rng(static_cast<unsigned>(n));
    std::shuffle(c.begin(), c.end(), shuffle_rng);
    const auto s2 = chronological_split(c);
    REQUIRE(s2.test.size() == s.test.size());
    for (std::size_t i = 0; i < s.test.size(); ++i) CHECK(s2.test[i].id == s.test[i].id);
  }
  CHECK_THROWS_AS(chronological_split(Cohort(9)), SplitError);
  CHECK_THROWS_AS(chronological_split(Cohort(14)), SplitError);
}

TEST_CASE("winsorization keeps values inside the fitted tails") {
  auto [schema, cohort] = tiny_cohort(600);
  const auto split = chronological_split(cohort);
  const auto t = fit(split.train, schema, "A", 5);
  std::size_t replaced = 0;
  for (const Cohort* part : {&split.train, &split.test})
    for (const Record& r : *part) {
      const auto f = impute_and_flag(r, schema, t);
      for (std::size_t j = 0; j < f.continuous.size(); ++j) {
        CHECK(f.continuous[j] >= t.continuous[j].p0_5);
        CHECK(f.continuous[j] <= t.continuous[j].p99_5);
        if (r.continuous[j] && *r.continuous[j] != f.continuous[j]) ++replaced;
      }
    }
  CHECK(replaced > 0);

  ContinuousStats s{0.0, 1.0, 2.0, 8.0, 9.0, 10.0, 5.0, 5.0, 2.0, false};
  KeyedRng rng(1);
  CHECK(winsorize_outliers(5.0, s, rng) == 5.0);
  CHECK(winsorize_outliers(9.0, s, rng) == 9.0);
  CHECK(winsorize_outliers(1.0, s, rng) == 1.0);
  for (int i = 0; i < 200; ++i) {
    const double hi = winsorize_outliers(1e9, s, rng);
    CHECK((hi >= 8.0 && hi <= 10.0));
    const double lo = winsorize_outliers(-1e9, s, rng);
    CHECK((lo >= 0.0 && lo <= 2.0));
  }
}

TEST_CASE("the transform ignores validation and test records") {
  auto [schema, cohort] = tiny_cohort(500);
  const auto base = fit(chronological_split(cohort).train, schema, "A", 5);
  const auto test_ids = [&] {
    std::vector<std::int64_t> ids;
    for (const Record& r : chronological_split(cohort).test) ids.push_back(r.id);
    for (const Record& r : chronological_split(cohort).validation) ids.push_back(r.id);
    return ids;
  }();
  for (Record& r : cohort) {
    if (std::find(test_ids.begin(), test_ids.end(), r.id) == test_ids.end()) continue;
    for (auto& v : r.continuous) v = v ? std::optional<double>(*v * 1000.0 + 17.0) : std::optional<double>(3.0);
    for (auto& c : r.categorical) c = "never_seen";
    for (auto& ch : r.timeseries)
      for (auto& p : ch) p.value = -p.value * 50.0;
  }
  const auto perturbed = fit(chronological_split(cohort).train, schema, "A", 5);
  CHECK(perturbed == base);
  CHECK(perturbed.to_json().dump() == base.to_json().dump());
}

TEST_CASE("time series resampling") {
  const ChannelStats stats{7.5, 7.0, 1.0, true};
  const std::vector<TimePoint> forced{{0, 1.0}, {2, 3.0}};
  const auto r = resample_timeseries(forced, 3, stats);
  CHECK(r.values == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(r.presence == std::vector<double>{1.0, 0.0, 1.0});

  const auto edges = resample_timeseries(std::vector<TimePoint>{{2, 4.0}, {4, 8.0}}, 7, stats);
  CHECK(edges.values == std::vector<double>{4.0, 4.0, 4.0, 6.0, 8.0, 8.0, 8.0});

  const auto empty = resample_timeseries(std::vector<TimePoint>{}, 4, stats);
  CHECK(empty.values == std::vector<double>(4, 7.5));
  CHECK(empty.presence == std::vector<double>(4, 0.0));

  CHECK_THROWS_AS(resample_timeseries(std::vector<TimePoint>{{3, 1.0}, {3, 2.0}}, 5, stats), ContractError);
  CHECK_THROWS_AS(resample_timeseries(std::vector<TimePoint>{{3, 1.0}, {1, 2.0}}, 5, stats), ContractError);
}

TEST_CASE("lab window summaries") {
  const std::vector<LabObservation> obs{{-1, 2.0}, {-7, 4.0}, {-8, 10.0}, {-365, 20.0}, {-366, 99.0}, {-30, 0.0}};
  const auto recent = lab_summary(obs, LabWindow::Recent);
  CHECK(recent.count == 2);
  CHECK(*recent.mean == 3.0);
  CHECK(*recent.variance == 1.0);
  CHECK(*recent.min == 2.0);
  CHECK(*recent.max == 4.0);
  const auto hist = lab_summary(obs, LabWindow::Historical);
  CHECK(hist.count == 3);
  CHECK(*hist.mean == 10.0);
  CHECK(*hist.variance == doctest::Approx(200.0 / 3.0));
  CHECK(*hist.min == 0.0);
  CHECK(*hist.max == 20.0);
  const auto none = lab_summary(std::vector<LabObservation>{{-400, 1.0}}, LabWindow::Recent);
  CHECK(none.count == 0);
  CHECK_FALSE(none.mean.has_value());
}

TEST_CASE("imputation, flags and vocabulary mapping") {
  auto [schema, cohort] = tiny_cohort(300);
  const auto split = chronological_split(cohort);
  const auto t = fit(split.train, schema, "A", 5);

  Record r = split.test.front();
  r.continuous[0].reset();
  r.binary[0].reset();
  r.categorical[0] = "not_a_category";
  const auto f = impute_and_flag(r, schema, t);
  CHECK(f.continuous[0] == t.continuous[0].median);
  CHECK(f.continuous_presence[0] == 0.0);
  CHECK(f.binary[0] == 0.0);
  CHECK(f.binary_presence[0] == 0.0);
  CHECK(f.categorical[0] == 0);

  FittedTransform flat = t;
  flat.continuous[1].degenerate = true;
  flat.continuous[1].std = 0.0;
  const auto z = standardize(f.continuous, flat);
  CHECK(z[1] == 0.0);
  CHECK_THROWS_AS(standardize(std::vector<double>{1.0}, t), DimensionError);

  Cohort missing = split.train;
  for (Record& m : missing) m.continuous[2].reset();
  CHECK_THROWS_AS(fit(missing, schema, "A", 5), FitError);
  CHECK_THROWS_AS(fit(Cohort{}, schema, "A", 5), FitError);
}

TEST_CASE("cohort, schema, transform and dataset files round trip exactly") {
  auto [schema, cohort] = tiny_cohort(200);
  const auto dir = scratch("io");
  write_cohort(cohort, schema, (dir / "a.csv").string(), (dir / "a_series.csv").string());
  const Cohort back = read_cohort(schema, (dir / "a.csv").string(), (dir / "a_series.csv").string());
  REQUIRE(back.size() == cohort.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(same_record(back[i], cohort[i]));

  save_schema(schema, (dir / "schema.json").string());
  CHECK(load_schema((dir / "schema.json").string()).to_json() == schema.to_json());

  const auto split = chronological_split(cohort);
  const auto t = fit(split.train, schema, "A", 5);
  save_transform(t, (dir / "t.json").string());
  CHECK(load_transform((dir / "t.json").string()) == t);

  const Dataset d = transform_cohort(split.train, schema, t, "A", true);
  save_dataset(d, (dir / "d.fpsd").string());
  const Dataset e = load_dataset((dir / "d.fpsd").string());
  CHECK(e.site == d.site);
  CHECK(e.dims == d.dims);
  CHECK(e.has_series == d.has_series);
  REQUIRE(e.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(same_example(e.examples[i], d.examples[i]));

  std::ofstream(dir / "bad.fpsd") << "nope";
  CHECK_THROWS_AS(load_dataset((dir / "bad.fpsd").string()), FormatError);
  CHECK(format_double(0.1) == "0.1");
  std::filesystem::remove_all(dir);
}

TEST_CASE("transformed examples have the declared layout") {
  auto [schema, cohort] = tiny_cohort(200);
  const auto split = chronological_split(cohort);
  const auto t = fit(split.train, schema, "A", 5);
  const auto dims = dims_for(schema);
  CHECK(dims.binary == schema.binary_branch_width());
  const Dataset d = transform_cohort(split.validation, schema, t, "A", true);
  for (const Example& e : d.examples) {
    CHECK(e.continuous.size() == dims.continuous);
    CHECK(e.binary.size() == dims.binary);
    CHECK(e.categorical.size() == dims.categorical);
    CHECK(e.series.size() == e.steps * 2 * dims.channels);
  }
  const Dataset pre = transform_cohort(split.validation, schema, t, "A", false);
  CHECK_FALSE(pre.has_series);
  const std::vector<Dataset> parts{d, d};
  CHECK(concat_datasets(parts, "pooled").size() == 2 * d.size());
}
