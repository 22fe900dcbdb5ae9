#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "fedperi/common/errors.hpp"
#include "fedperi/preprocess/split.hpp"
#include "fedperi/preprocess/transform.hpp"
#include "fedperi/synthgen/generator.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fedperi;
using namespace fedperi::synthgen;
using preprocess::Cohort;

namespace {

const std::vector<SiteSpec>& sites() {
  static const auto s = default_sites(7, true);
  return s;
}

const Cohort& default_cohort(std::size_t i) {
  static const Cohort a = generate_site(make_generator(default_world(7), sites()[0]));
  static const Cohort b = generate_site(make_generator(default_world(7), sites()[1]));
  return i == 0 ? a : b;
}

// Imputed, standardized continuous and binary values of each record.
std::vector<std::vector<double>> design(std::span<const preprocess::Record> records,
                                        const preprocess::FeatureSchema& schema,
                                        const preprocess::FittedTransform& t) {
  std::vector<std::vector<double>> x;
  for (const auto& r : records) {
    const auto f = preprocess::impute_and_flag(r, schema, t);
    auto row = preprocess::standardize(f.continuous, t);
    row.insert(row.end(), f.binary.begin(), f.binary.end());
    x.push_back(std::move(row));
  }
  return x;
}

}  // namespace

TEST_CASE("identical specs give identical cohorts regardless of threads") {
  const auto world = fixture::tiny_world();
  const auto model = make_generator(world, fixture::tiny_site("A", 300, 5));
  ::setenv("FEDPERISIM_THREADS", "1", 1);
  const Cohort a = generate_site(model);
  ::setenv("FEDPERISIM_THREADS", "4", 1);
  const Cohort b = generate_site(make_generator(world, fixture::tiny_site("A", 300, 5)));
  ::unsetenv("FEDPERISIM_THREADS");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].surgery_time == b[i].surgery_time);
    CHECK(a[i].continuous == b[i].continuous);
    CHECK(a[i].binary == b[i].binary);
    CHECK(a[i].categorical == b[i].categorical);
    CHECK(a[i].labels == b[i].labels);
    for (std::size_t c = 0; c < a[i].timeseries.size(); ++c) {
      REQUIRE(a[i].timeseries[c].size() == b[i].timeseries[c].size());
      for (std::size_t t = 0; t < a[i].timeseries[c].size(); ++t)
        CHECK(a[i].timeseries[c][t].value == b[i].timeseries[c][t].value);
    }
  }
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].surgery_time <= a[i].surgery_time);

  const Cohort other = generate_site(make_generator(world, fixture::tiny_site("A", 300, 6)));
  CHECK(other[0].continuous != a[0].continuous);
}

TEST_CASE("records are valid and zero missingness leaves everything present") {
  const auto world = fixture::tiny_world();
  auto spec = fixture::tiny_site("A", 200, 5);
  spec.missingness = {0.0, 0.0, 0.0, 0.0};
  spec.min_minutes = 30;
  spec.max_minutes = 90;
  spec.sample_interval = 5;
  const auto model = make_generator(world, spec);
  for (const auto& r : generate_site(model)) {
    preprocess::validate_record(r, model.schema);
    for (std::size_t j = 0; j < world.n_base_continuous; ++j) CHECK(r.continuous[j].has_value());
    for (const auto& b : r.binary) CHECK(b.has_value());
    for (const auto& c : r.categorical) CHECK(c.has_value());
    for (const auto& ch : r.timeseries) CHECK_FALSE(ch.empty());
    CHECK(r.subgroup.age_years >= 18.0);
  }
}

TEST_CASE("intercept calibration") {
  const auto world = fixture::tiny_world();
  SiteSpec spec = fixture::tiny_site("A", 200, 5);
  spec.african_american_fraction = 0.0;
  spec.age_mean = 55.0;
  spec.target_prevalences.fill(0.5);
  GeneratorModel m = make_generator(world, spec);
  for (double a : m.intercepts) CHECK(std::abs(a) < 0.1);

  SiteSpec low = spec, high = spec;
  low.target_prevalences.fill(0.1);
  high.target_prevalences.fill(0.3);
  const auto ml = make_generator(world, low), mh = make_generator(world, high);
  for (std::size_t k = 0; k < preprocess::kNumOutcomes; ++k) {
    CHECK(ml.intercepts[k] < mh.intercepts[k]);
    CHECK(std::abs(expected_prevalence(ml, k, ml.intercepts[k]) - 0.1) <= 0.005);
    CHECK(expected_prevalence(mh, k, mh.intercepts[k] - 0.5) < expected_prevalence(mh, k, mh.intercepts[k]));
  }

  // Saturated scores make the prevalence a multiple of 1/7 whatever the
  // intercept, so 0.3 cannot be reached.
  SiteSpec saturated = spec;
  saturated.target_prevalences[0] = 0.3;
  GeneratorModel broken = build_model(world, saturated);
  for (double& u : broken.outcome_u[0]) u *= 1e6;
  CHECK_THROWS_AS(calibrate_intercepts(broken, 7), CalibrationError);

  SiteSpec bad = spec;
  bad.target_prevalences[3] = 0.7;
  CHECK_THROWS_AS(bad.validate(world), ConfigError);
  bad = spec;
  bad.n_records = 99;
  CHECK_THROWS_AS(bad.validate(world), ConfigError);
  CHECK(SiteSpec::from_json(spec.to_json()).to_json() == spec.to_json());
  CHECK(WorldSpec::from_json(world.to_json()).to_json() == world.to_json());
}

TEST_CASE("default sites hit their target prevalences") {
  for (std::size_t s = 0; s < 2; ++s) {
    CAPTURE(sites()[s].name);
    const auto realized = realized_prevalence(default_cohort(s));
    for (std::size_t k = 0; k < preprocess::kNumOutcomes; ++k)
      CHECK(std::abs(realized[k] - sites()[s].target_prevalences[k]) <= 0.01);
    CHECK(realized[8] >= 0.015);
    CHECK(realized[8] <= 0.025);
  }
  CHECK(std::abs(realized_prevalence(default_cohort(0))[0] - 0.29) <= 0.01);
  CHECK(std::abs(realized_prevalence(default_cohort(1))[0] - 0.24) <= 0.01);
}

TEST_CASE("outcomes are learnable from the features") {
  const auto schema = make_schema(default_world(7));
  const auto split = preprocess::chronological_split(default_cohort(0));
  const auto t = preprocess::fit(split.train, schema, "GNV", 7);
  const auto train = design(split.train, schema, t);
  const auto test = design(split.test, schema, t);
  for (std::size_t k = 0; k < preprocess::kNumOutcomes; ++k) {
    std::vector<std::uint8_t> ytr, yte;
    for (const auto& r : split.train) ytr.push_back(r.labels[k]);
    for (const auto& r : split.test) yte.push_back(r.labels[k]);
    const auto w = oracle::fit_logistic(train, ytr, 1e-3, 10);
    std::vector<double> scores;
    for (const auto& x : test) scores.push_back(oracle::logistic_score(w, x));
    const double auc = oracle::auroc_pairs(scores, yte);
    CAPTURE(k);
    CAPTURE(auc);
    CHECK(auc >= 0.75);
  }
}

TEST_CASE("a domain classifier separates the shifted sites") {
  const auto schema = make_schema(default_world(7));
  const std::size_t per_site = 3000;
  std::vector<preprocess::Record> pooled;
  std::vector<std::uint8_t> y;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 0; i < per_site; ++i) {
      pooled.push_back(default_cohort(s)[i * (default_cohort(s).size() / per_site)]);
      y.push_back(static_cast<std::uint8_t>(s));
    }
  const auto t = preprocess::fit(pooled, schema, "pooled", 7);
  const auto x = design(pooled, schema, t);
  std::vector<std::vector<double>> xtr, xte;
  std::vector<std::uint8_t> ytr, yte;
  for (std::size_t i = 0; i < x.size(); ++i) {
    (i % 2 ? xte : xtr).push_back(x[i]);
    (i % 2 ? yte : ytr).push_back(y[i]);
  }
  const auto w = oracle::fit_logistic(xtr, ytr, 1e-3, 10);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xte.size(); ++i)
    if ((oracle::logistic_score(w, xte[i]) > 0.0) == (yte[i] == 1)) ++correct;
  const double accuracy = static_cast<double>(correct) / static_cast<double>(xte.size());
  CAPTURE(accuracy);
  CHECK(accuracy >= 0.7);
}
