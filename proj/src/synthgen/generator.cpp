#include "fedperi/synthgen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"
#include "fedperi/common/threads.hpp"
#include "fedperi/preprocess/timeseries.hpp"

namespace fedperi::synthgen {

namespace {

using preprocess::kNumOutcomes;

struct ChannelDefault {
  const char* name;
  const char* unit;
  double base;
  double sd;
};

constexpr ChannelDefault kChannels[] = {
    {"systolic_bp", "mmHg", 120.0, 15.0},  {"diastolic_bp", "mmHg", 70.0, 10.0},
    {"mean_arterial_pressure", "mmHg", 85.0, 10.0}, {"heart_rate", "bpm", 75.0, 12.0},
    {"temperature", "C", 36.5, 0.4},       {"etco2", "mmHg", 35.0, 4.0},
    {"spo2", "%", 98.0, 1.5},              {"peak_inspiratory_pressure", "cmH2O", 20.0, 4.0},
    {"respiratory_rate", "1/min", 14.0, 3.0}, {"minimum_alveolar_concentration", "MAC", 0.9, 0.2},
};

struct LabDefault {
  const char* name;
  const char* unit;
  double center;
  double spread;
};

constexpr LabDefault kLabs[] = {
    {"creatinine", "mg/dL", 1.0, 0.3},
    {"hemoglobin", "g/dL", 13.0, 1.8},
};

constexpr const char* kCategorical[] = {"attending_surgeon", "primary_procedure", "residence_zip"};
constexpr const char* kLabStats[] = {"count", "mean", "variance", "min", "max"};

std::string numbered(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02zu", prefix, i);
  return buf;
}

std::string category_label(const std::string& feature, std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03zu", k);
  return feature + buf;
}

std::vector<double> unit_vector(KeyedRng& rng, std::size_t n) {
  std::vector<double> v(n);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// Unit vector supported on `active` randomly chosen coordinates.
std::vector<double> sparse_unit(KeyedRng& rng, std::size_t n, std::size_t active) {
  std::vector<double> v(n, 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < active; ++i) {
    const std::size_t j = rng.below(n);
    const double w = rng.normal();
    v[j] += w;
  }
  for (double x : v) norm += x * x;
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Latent draw_latent(KeyedRng& rng, const GeneratorModel& m) {
  const SiteSpec& s = m.site;
  Latent l;
  double age = rng.normal(s.age_mean, s.age_sd);
  for (int tries = 0; tries < 100 && (age < 18.0 || age > 95.0); ++tries) age = rng.normal(s.age_mean, s.age_sd);
  l.age = std::clamp(age, 18.0, 95.0);
  l.female = rng.bernoulli(s.female_fraction);
  l.african_american = rng.bernoulli(s.african_american_fraction);
  const std::size_t L = m.world.n_latent;
  l.u.resize(L);
  for (std::size_t i = 0; i < L; ++i) l.u[i] = m.latent_mean[i] + rng.normal();
  l.u[0] = m.latent_mean[0] + 0.6 * (l.age - 55.0) / 17.0 + 0.8 * (l.u[0] - m.latent_mean[0]);
  l.u[1] += l.female ? -0.3 : 0.3;
  l.u[2] += l.african_american ? 0.4 : 0.0;
  l.v.resize(m.world.n_intraop_latent);
  for (std::size_t i = 0; i < l.v.size(); ++i) l.v[i] = 0.3 * l.u[i % L] + std::sqrt(1.0 - 0.09) * rng.normal();
  return l;
}

}  // namespace

preprocess::FeatureSchema make_schema(const WorldSpec& world) {
  world.validate();
  preprocess::FeatureSchema s;
  s.continuous.push_back({"age_years", "years"});
  for (std::size_t j = 1; j < world.n_base_continuous; ++j) s.continuous.push_back({numbered("preop_measure", j), "au"});
  for (std::size_t l = 0; l < world.n_labs; ++l) {
    const std::string lab = l < std::size(kLabs) ? kLabs[l].name : numbered("lab", l);
    const std::string unit = l < std::size(kLabs) ? kLabs[l].unit : "au";
    for (const char* window : {"recent", "historical"})
      for (const char* stat : kLabStats)
        s.continuous.push_back({lab + "_" + window + "_" + stat, std::string(stat) == "count" ? "n" : unit});
  }
  s.binary.push_back("sex_male");
  s.binary.push_back("race_african_american");
  for (std::size_t j = 2; j < world.n_binary; ++j) s.binary.push_back(numbered("comorbidity", j - 1));
  for (std::size_t c = 0; c < world.n_categorical; ++c) {
    preprocess::CategoricalFeature f;
    f.name = c < std::size(kCategorical) ? kCategorical[c] : numbered("category", c);
    for (std::size_t k = 0; k < world.vocab_size; ++k) f.categories.push_back(category_label(f.name, k));
    s.high_cardinality.push_back(std::move(f));
  }
  for (std::size_t c = 0; c < world.n_channels; ++c) {
    if (c < std::size(kChannels))
      s.timeseries_channels.push_back({kChannels[c].name, kChannels[c].unit});
    else
      s.timeseries_channels.push_back({numbered("channel", c), "au"});
  }
  s.outcomes.assign(preprocess::outcome_names().begin(), preprocess::outcome_names().end());
  s.validate();
  return s;
}

GeneratorModel build_model(const WorldSpec& world, const SiteSpec& site) {
  world.validate();
  site.validate(world);
  GeneratorModel m;
  m.world = world;
  m.site = site;
  m.schema = make_schema(world);
  const std::size_t L = world.n_latent;
  const std::size_t Lv = world.n_intraop_latent;
  const std::uint64_t site_id = fnv1a(site.name);

  KeyedRng shared(world.seed, "generator.world");
  KeyedRng local(world.seed, "generator.site", {site_id});

  m.latent_mean.assign(L, 0.0);
  if (site.covariate_shift > 0.0) {
    const auto dir = unit_vector(local, L);
    for (std::size_t i = 0; i < L; ++i) m.latent_mean[i] = 0.6 * site.covariate_shift * dir[i];
  }

  const std::size_t nb = world.n_base_continuous;
  m.continuous_loading.resize(nb);
  m.continuous_center.resize(nb);
  m.continuous_spread.resize(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    m.continuous_loading[j] = sparse_unit(shared, L, 2);
    m.continuous_center[j] = std::round(shared.uniform(10.0, 200.0));
    m.continuous_spread[j] = m.continuous_center[j] * shared.uniform(0.05, 0.3);
  }
  m.mean_shift = site.mean_shift;
  m.scale_shift = site.scale_shift;
  if (m.mean_shift.empty()) {
    m.mean_shift.resize(nb);
    for (double& x : m.mean_shift) x = site.covariate_shift * local.normal();
  }
  if (m.scale_shift.empty()) {
    m.scale_shift.resize(nb);
    for (double& x : m.scale_shift) x = site.covariate_shift * local.uniform(-0.3, 0.3);
  }
  m.mean_shift[0] = 0.0;
  m.scale_shift[0] = 0.0;

  m.lab_loading.resize(world.n_labs);
  m.lab_center.resize(world.n_labs);
  m.lab_spread.resize(world.n_labs);
  for (std::size_t l = 0; l < world.n_labs; ++l) {
    m.lab_loading[l] = sparse_unit(shared, L, 2);
    m.lab_center[l] = l < std::size(kLabs) ? kLabs[l].center : 10.0;
    m.lab_spread[l] = l < std::size(kLabs) ? kLabs[l].spread : 2.0;
  }

  m.binary_loading.resize(world.n_binary);
  m.binary_threshold.assign(world.n_binary, 0.0);
  for (std::size_t j = 2; j < world.n_binary; ++j) {
    m.binary_loading[j] = sparse_unit(shared, L, 2);
    m.binary_threshold[j] = shared.normal(1.0, 0.5) + 0.3 * site.covariate_shift * local.normal();
  }

  m.categorical_loading.resize(world.n_categorical);
  m.categorical_allowed.resize(world.n_categorical);
  for (std::size_t c = 0; c < world.n_categorical; ++c) {
    m.categorical_loading[c] = sparse_unit(shared, L, 2);
    std::vector<std::size_t> idx(world.vocab_size);
    std::iota(idx.begin(), idx.end(), 0);
    KeyedRng perm(world.seed, "generator.vocabulary", {site_id, c});
    std::shuffle(idx.begin(), idx.end(), perm);
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(site.category_coverage * static_cast<double>(world.vocab_size))));
    idx.resize(std::min(keep, idx.size()));
    std::sort(idx.begin(), idx.end());
    m.categorical_allowed[c] = std::move(idx);
  }

  const std::size_t C = world.n_channels;
  m.channel_base.resize(C);
  m.channel_sd.resize(C);
  m.channel_loading_u.resize(C);
  m.channel_loading_v.resize(C);
  m.channel_drift.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    m.channel_base[c] = c < std::size(kChannels) ? kChannels[c].base : 50.0;
    m.channel_sd[c] = c < std::size(kChannels) ? kChannels[c].sd : 5.0;
    m.channel_loading_u[c] = unit_vector(shared, L);
    m.channel_loading_v[c] = unit_vector(shared, Lv);
    m.channel_drift[c] = unit_vector(shared, Lv);
  }

  const auto common = unit_vector(shared, L);
  const double tc = world.task_correlation;
  for (std::size_t k = 0; k < kNumOutcomes; ++k) {
    const auto own = unit_vector(shared, L);
    std::vector<double> w(L);
    double norm = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      w[i] = tc * common[i] + std::sqrt(1.0 - tc * tc) * own[i];
      norm += w[i] * w[i];
    }
    norm = std::sqrt(norm);
    for (double& x : w) x /= norm;
    if (site.concept_shift > 0.0) {
      KeyedRng shift(world.seed, "generator.concept", {site_id, k});
      const auto delta = unit_vector(shift, L);
      for (std::size_t i = 0; i < L; ++i) w[i] += site.concept_shift * delta[i];
    }
    for (double& x : w) x *= world.signal;
    m.outcome_u[k] = std::move(w);
    auto q = unit_vector(shared, Lv);
    for (double& x : q) x *= world.intraop_signal;
    m.outcome_v[k] = std::move(q);
  }
  return m;
}

double outcome_score(const GeneratorModel& m, std::size_t k, const Latent& l) {
  return dot(m.outcome_u[k], l.u) + dot(m.outcome_v[k], l.v);
}

namespace {

std::vector<std::array<double, kNumOutcomes>> calibration_scores(const GeneratorModel& m, std::size_t draws) {
  std::vector<std::array<double, kNumOutcomes>> scores(draws);
  const std::uint64_t site_id = fnv1a(m.site.name);
  for (std::size_t d = 0; d < draws; ++d) {
    KeyedRng rng(m.site.seed, "generator.calibrate", {site_id, d});
    const Latent l = draw_latent(rng, m);
    for (std::size_t k = 0; k < kNumOutcomes; ++k) scores[d][k] = outcome_score(m, k, l);
  }
  return scores;
}

double mean_sigmoid(const std::vector<std::array<double, kNumOutcomes>>& scores, std::size_t k, double a) {
  double total = 0.0;
  for (const auto& s : scores) total += sigmoid(a + s[k]);
  return total / static_cast<double>(scores.size());
}

}  // namespace

double expected_prevalence(const GeneratorModel& m, std::size_t k, double intercept, std::size_t draws) {
  if (k >= kNumOutcomes) throw ContractError("expected_prevalence: outcome index out of range");
  if (draws == 0) throw ContractError("expected_prevalence: need at least one draw");
  return mean_sigmoid(calibration_scores(m, draws), k, intercept);
}

void calibrate_intercepts(GeneratorModel& m, std::size_t draws) {
  if (draws == 0) throw ContractError("calibrate_intercepts: need at least one draw");
  const auto scores = calibration_scores(m, draws);
  for (std::size_t k = 0; k < kNumOutcomes; ++k) {
    const double target = m.site.target_prevalences[k];
    double lo = -30.0, hi = 30.0, mid = 0.0;
    for (int step = 0; step < 100; ++step) {
      mid = 0.5 * (lo + hi);
      const double p = mean_sigmoid(scores, k, mid);
      if (p < target)
        lo = mid;
      else
        hi = mid;
      if (hi - lo < 1e-12) break;
    }
    const double achieved = mean_sigmoid(scores, k, mid);
    if (!(std::abs(achieved - target) <= 0.005))
      throw CalibrationError("site " + m.site.name + ": could not calibrate " + preprocess::outcome_names()[k] +
                             " to prevalence " + std::to_string(target));
    m.intercepts[k] = mid;
  }
}

GeneratorModel make_generator(const WorldSpec& world, const SiteSpec& site) {
  GeneratorModel m = build_model(world, site);
  calibrate_intercepts(m);
  return m;
}

namespace {

preprocess::Record generate_record(const GeneratorModel& m, std::size_t i) {
  const WorldSpec& w = m.world;
  const SiteSpec& s = m.site;
  KeyedRng rng(s.seed, "generator.record", {fnv1a(s.name), i});
  const Latent l = draw_latent(rng, m);

  preprocess::Record r;
  r.id = static_cast<std::int64_t>(i + 1);
  r.site = s.name;
  const std::int64_t step = s.span_seconds / static_cast<std::int64_t>(s.n_records);
  r.surgery_time = s.start_time + static_cast<std::int64_t>(i) * step +
                   static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(std::max<std::int64_t>(1, step / 2))));
  r.subgroup.age_years = l.age;
  r.subgroup.sex = l.female ? preprocess::Sex::Female : preprocess::Sex::Male;
  r.subgroup.race = l.african_american ? preprocess::Race::AfricanAmerican : preprocess::Race::NonAfricanAmerican;

  r.continuous.push_back(std::round(l.age * 10.0) / 10.0);
  for (std::size_t j = 1; j < w.n_base_continuous; ++j) {
    const double x = dot(m.continuous_loading[j], l.u) + w.feature_noise * rng.normal();
    double value = m.continuous_center[j] + m.continuous_spread[j] * (1.0 + m.scale_shift[j]) * (x + m.mean_shift[j]);
    if (rng.bernoulli(w.outlier_rate)) value += (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(4.0, 10.0) * m.continuous_spread[j];
    const bool missing = rng.bernoulli(s.missingness.continuous);
    r.continuous.push_back(missing ? std::nullopt : std::optional<double>(value));
  }
  for (std::size_t lab = 0; lab < w.n_labs; ++lab) {
    const double level = dot(m.lab_loading[lab], l.u) + 0.5 * rng.normal();
    std::vector<preprocess::LabObservation> obs;
    std::poisson_distribution<int> recent(1.5), historical(3.0);
    const int n_recent = recent(rng);
    const int n_hist = historical(rng);
    for (int k = 0; k < n_recent; ++k)
      obs.push_back({-1 - static_cast<int>(rng.below(7)), m.lab_center[lab] + m.lab_spread[lab] * (level + 0.4 * rng.normal())});
    for (int k = 0; k < n_hist; ++k)
      obs.push_back({-8 - static_cast<int>(rng.below(358)), m.lab_center[lab] + m.lab_spread[lab] * (level + 0.4 * rng.normal())});
    for (auto window : {preprocess::LabWindow::Recent, preprocess::LabWindow::Historical}) {
      const preprocess::LabSummary ls = preprocess::lab_summary(obs, window);
      r.continuous.push_back(static_cast<double>(ls.count));
      r.continuous.push_back(ls.mean);
      r.continuous.push_back(ls.variance);
      r.continuous.push_back(ls.min);
      r.continuous.push_back(ls.max);
    }
  }

  r.binary.push_back(!l.female);
  r.binary.push_back(l.african_american);
  for (std::size_t j = 2; j < w.n_binary; ++j) {
    const bool value = dot(m.binary_loading[j], l.u) + rng.normal() > m.binary_threshold[j];
    const bool missing = rng.bernoulli(s.missingness.binary);
    r.binary.push_back(missing ? std::nullopt : std::optional<bool>(value));
  }

  for (std::size_t c = 0; c < w.n_categorical; ++c) {
    const double z = (dot(m.categorical_loading[c], l.u) + 0.5 * rng.normal()) / std::sqrt(1.25);
    const auto V = w.vocab_size;
    std::size_t k = std::min(V - 1, static_cast<std::size_t>(normal_cdf(z) * static_cast<double>(V)));
    const auto& allowed = m.categorical_allowed[c];
    auto it = std::lower_bound(allowed.begin(), allowed.end(), k);
    if (it == allowed.end() || *it != k) {
      if (it == allowed.end())
        k = allowed.back();
      else if (it == allowed.begin())
        k = *it;
      else
        k = (k - *(it - 1) <= *it - k) ? *(it - 1) : *it;
    }
    const bool missing = rng.bernoulli(s.missingness.categorical);
    r.categorical.push_back(missing ? std::nullopt
                                    : std::optional<std::string>(m.schema.high_cardinality[c].categories[k]));
  }

  r.duration_minutes = s.min_minutes + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.max_minutes - s.min_minutes + 1)));
  const int D = r.duration_minutes;
  r.timeseries.resize(w.n_channels);
  std::vector<double> ar(static_cast<std::size_t>(D));
  for (std::size_t c = 0; c < w.n_channels; ++c) {
    if (rng.bernoulli(s.missingness.timeseries)) continue;
    const double level = 0.3 * dot(m.channel_loading_u[c], l.u) + 0.8 * dot(m.channel_loading_v[c], l.v);
    const double drift = 0.5 * dot(m.channel_drift[c], l.v);
    double state = 0.5 * rng.normal();
    for (int t = 0; t < D; ++t) {
      state = 0.9 * state + 0.3 * rng.normal();
      ar[static_cast<std::size_t>(t)] = state;
    }
    int minute = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.sample_interval)));
    while (minute < D) {
      if (!rng.bernoulli(0.1)) {
        const double x = level + drift * minute / D + ar[static_cast<std::size_t>(minute)];
        r.timeseries[c].push_back({minute, m.channel_base[c] + m.channel_sd[c] * x});
      }
      const int jitter = s.sample_interval > 2 ? static_cast<int>(rng.below(3)) - 1 : 0;
      minute += std::max(1, s.sample_interval + jitter);
    }
  }

  for (std::size_t k = 0; k < kNumOutcomes; ++k)
    r.labels[k] = rng.bernoulli(sigmoid(m.intercepts[k] + outcome_score(m, k, l)));
  return r;
}

}  // namespace

preprocess::Cohort generate_site(const GeneratorModel& m) {
  preprocess::Cohort cohort(m.site.n_records);
  const auto n = static_cast<std::ptrdiff_t>(cohort.size());
#pragma omp parallel for schedule(static) num_threads(configured_threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) cohort[static_cast<std::size_t>(i)] = generate_record(m, static_cast<std::size_t>(i));
  return cohort;
}

std::array<double, kNumOutcomes> realized_prevalence(const preprocess::Cohort& cohort) {
  std::array<double, kNumOutcomes> p{};
  if (cohort.empty()) return p;
  for (const auto& r : cohort)
    for (std::size_t k = 0; k < kNumOutcomes; ++k) p[k] += r.labels[k] ? 1.0 : 0.0;
  for (double& x : p) x /= static_cast<double>(cohort.size());
  return p;
}

}  // namespace fedperi::synthgen
