#include "fedperi/synthgen/site_spec.hpp"

#include <cmath>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"

namespace fedperi::synthgen {

void WorldSpec::validate() const {
  if (n_latent < 3 || n_intraop_latent < 1) throw ConfigError("world: need >= 3 latent and >= 1 intraop factor");
  if (n_base_continuous < 1 || n_binary < 2 || n_channels < 1)
    throw ConfigError("world: need >= 1 continuous, >= 2 binary features and >= 1 channel");
  if (vocab_size < 2) throw ConfigError("world: vocabulary size must be >= 2");
  if (!(signal > 0.0) || !(intraop_signal >= 0.0) || !(feature_noise > 0.0))
    throw ConfigError("world: signal and noise scales must be positive");
  if (!(task_correlation >= 0.0 && task_correlation < 1.0)) throw ConfigError("world: task_correlation in [0, 1)");
  if (!(outlier_rate >= 0.0 && outlier_rate < 0.5)) throw ConfigError("world: outlier_rate in [0, 0.5)");
}

nlohmann::json WorldSpec::to_json() const {
  return {{"seed", seed},
          {"n_latent", n_latent},
          {"n_intraop_latent", n_intraop_latent},
          {"n_base_continuous", n_base_continuous},
          {"n_labs", n_labs},
          {"n_binary", n_binary},
          {"n_categorical", n_categorical},
          {"vocab_size", vocab_size},
          {"n_channels", n_channels},
          {"signal", signal},
          {"intraop_signal", intraop_signal},
          {"task_correlation", task_correlation},
          {"feature_noise", feature_noise},
          {"outlier_rate", outlier_rate}};
}

WorldSpec WorldSpec::from_json(const nlohmann::json& j) {
  WorldSpec w;
  try {
    w.seed = j.value("seed", w.seed);
    w.n_latent = j.value("n_latent", w.n_latent);
    w.n_intraop_latent = j.value("n_intraop_latent", w.n_intraop_latent);
    w.n_base_continuous = j.value("n_base_continuous", w.n_base_continuous);
    w.n_labs = j.value("n_labs", w.n_labs);
    w.n_binary = j.value("n_binary", w.n_binary);
    w.n_categorical = j.value("n_categorical", w.n_categorical);
    w.vocab_size = j.value("vocab_size", w.vocab_size);
    w.n_channels = j.value("n_channels", w.n_channels);
    w.signal = j.value("signal", w.signal);
    w.intraop_signal = j.value("intraop_signal", w.intraop_signal);
    w.task_correlation = j.value("task_correlation", w.task_correlation);
    w.feature_noise = j.value("feature_noise", w.feature_noise);
    w.outlier_rate = j.value("outlier_rate", w.outlier_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("world: ") + e.what());
  }
  w.validate();
  return w;
}

void SiteSpec::validate(const WorldSpec& world) const {
  if (name.empty() || name.find(',') != std::string::npos) throw ConfigError("site: name must be non-empty, no commas");
  if (n_records < 100) throw ConfigError("site " + name + ": n_records must be >= 100");
  for (std::size_t k = 0; k < target_prevalences.size(); ++k) {
    const double p = target_prevalences[k];
    if (!(p > 0.005 && p < 0.6))
      throw ConfigError("site " + name + ": prevalence of " + preprocess::outcome_names()[k] +
                        " must lie in (0.005, 0.6)");
  }
  if (!(covariate_shift >= 0.0) || !(concept_shift >= 0.0)) throw ConfigError("site " + name + ": shifts must be >= 0");
  if (!mean_shift.empty() && mean_shift.size() != world.n_base_continuous)
    throw ConfigError("site " + name + ": mean_shift needs one entry per base continuous feature");
  if (!scale_shift.empty() && scale_shift.size() != world.n_base_continuous)
    throw ConfigError("site " + name + ": scale_shift needs one entry per base continuous feature");
  for (double s : scale_shift)
    if (!(s > -0.9)) throw ConfigError("site " + name + ": scale_shift entries must exceed -0.9");
  for (double r : {missingness.continuous, missingness.binary, missingness.categorical, missingness.timeseries})
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("site " + name + ": missingness rates must lie in [0, 1)");
  if (min_minutes < 1 || max_minutes < min_minutes) throw ConfigError("site " + name + ": bad series duration range");
  if (sample_interval < 1) throw ConfigError("site " + name + ": sample_interval must be >= 1");
  if (!(female_fraction >= 0.0 && female_fraction <= 1.0) ||
      !(african_american_fraction >= 0.0 && african_american_fraction <= 1.0))
    throw ConfigError("site " + name + ": subgroup fractions must lie in [0, 1]");
  if (!(age_sd > 0.0) || !(age_mean >= 18.0)) throw ConfigError("site " + name + ": bad age distribution");
  if (!(category_coverage > 0.0 && category_coverage <= 1.0))
    throw ConfigError("site " + name + ": category_coverage must lie in (0, 1]");
  if (span_seconds < static_cast<std::int64_t>(n_records)) throw ConfigError("site " + name + ": span too short");
}

nlohmann::json SiteSpec::to_json() const {
  return {{"name", name},
          {"n_records", n_records},
          {"target_prevalences", target_prevalences},
          {"covariate_shift", covariate_shift},
          {"concept_shift", concept_shift},
          {"mean_shift", mean_shift},
          {"scale_shift", scale_shift},
          {"missingness",
           {{"continuous", missingness.continuous},
            {"binary", missingness.binary},
            {"categorical", missingness.categorical},
            {"timeseries", missingness.timeseries}}},
          {"min_minutes", min_minutes},
          {"max_minutes", max_minutes},
          {"sample_interval", sample_interval},
          {"female_fraction", female_fraction},
          {"african_american_fraction", african_american_fraction},
          {"age_mean", age_mean},
          {"age_sd", age_sd},
          {"category_coverage", category_coverage},
          {"start_time", start_time},
          {"span_seconds", span_seconds},
          {"seed", seed}};
}

SiteSpec SiteSpec::from_json(const nlohmann::json& j) {
  SiteSpec s;
  try {
    j.at("name").get_to(s.name);
    s.n_records = j.value("n_records", s.n_records);
    if (j.contains("target_prevalences")) {
      const auto& p = j.at("target_prevalences");
      if (p.is_object()) {
        for (std::size_t k = 0; k < preprocess::kNumOutcomes; ++k)
          s.target_prevalences[k] = p.at(preprocess::outcome_names()[k]).get<double>();
      } else {
        if (p.size() != preprocess::kNumOutcomes) throw ConfigError("site " + s.name + ": need 9 prevalences");
        for (std::size_t k = 0; k < preprocess::kNumOutcomes; ++k) s.target_prevalences[k] = p[k].get<double>();
      }
    }
    s.covariate_shift = j.value("covariate_shift", s.covariate_shift);
    s.concept_shift = j.value("concept_shift", s.concept_shift);
    s.mean_shift = j.value("mean_shift", s.mean_shift);
    s.scale_shift = j.value("scale_shift", s.scale_shift);
    if (j.contains("missingness")) {
      const auto& m = j.at("missingness");
      s.missingness.continuous = m.value("continuous", s.missingness.continuous);
      s.missingness.binary = m.value("binary", s.missingness.binary);
      s.missingness.categorical = m.value("categorical", s.missingness.categorical);
      s.missingness.timeseries = m.value("timeseries", s.missingness.timeseries);
    }
    s.min_minutes = j.value("min_minutes", s.min_minutes);
    s.max_minutes = j.value("max_minutes", s.max_minutes);
    s.sample_interval = j.value("sample_interval", s.sample_interval);
    s.female_fraction = j.value("female_fraction", s.female_fraction);
    s.african_american_fraction = j.value("african_american_fraction", s.african_american_fraction);
    s.age_mean = j.value("age_mean", s.age_mean);
    s.age_sd = j.value("age_sd", s.age_sd);
    s.category_coverage = j.value("category_coverage", s.category_coverage);
    s.start_time = j.value("start_time", s.start_time);
    s.span_seconds = j.value("span_seconds", s.span_seconds);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("site spec: ") + e.what());
  }
  return s;
}

WorldSpec default_world(std::uint64_t seed) {
  WorldSpec w;
  w.seed = seed;
  return w;
}

std::uint64_t site_seed(std::uint64_t seed, const std::string& name) {
  return stream_key(seed, "site", {fnv1a(name)}) >> 1;
}

std::vector<SiteSpec> default_sites(std::uint64_t seed, bool shift) {
  // Outcome order: ICU, MV, neurological, cardiovascular, AKI, VTE, sepsis,
  // wound, mortality.
  SiteSpec gnv;
  gnv.name = "GNV";
  gnv.n_records = 20000;
  gnv.target_prevalences = {0.29, 0.09, 0.17, 0.12, 0.15, 0.05, 0.08, 0.16, 0.02};
  gnv.female_fraction = 0.50;
  gnv.african_american_fraction = 0.14;
  gnv.age_mean = 57.0;
  gnv.age_sd = 17.0;
  gnv.seed = site_seed(seed, gnv.name);

  SiteSpec jax;
  jax.name = "JAX";
  jax.n_records = 8000;
  jax.target_prevalences = {0.24, 0.08, 0.12, 0.11, 0.14, 0.04, 0.09, 0.14, 0.02};
  jax.female_fraction = 0.49;
  jax.african_american_fraction = 0.35;
  jax.age_mean = 52.0;
  jax.age_sd = 17.0;
  jax.seed = site_seed(seed, jax.name);
  if (shift) {
    jax.covariate_shift = 0.5;
    jax.concept_shift = 0.6;
    jax.missingness.continuous = 0.15;
    jax.category_coverage = 0.7;
  }
  return {gnv, jax};
}

}  // namespace fedperi::synthgen
