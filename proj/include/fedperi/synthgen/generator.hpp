#pragma once

#include <array>
#include <vector>

#include "fedperi/preprocess/record.hpp"
#include "fedperi/synthgen/site_spec.hpp"

namespace fedperi::synthgen {

// The schema every site of a world shares.
preprocess::FeatureSchema make_schema(const WorldSpec& world);

// Ground truth of one site. The feature loadings come from the world seed and
// are shared across sites; the shift terms and outcome coefficients are
// specific to the site name.
struct GeneratorModel {
  WorldSpec world;
  SiteSpec site;
  preprocess::FeatureSchema schema;

  std::vector<double> latent_mean;  // n_latent

  // Base continuous features (index 0 is age).
  std::vector<std::vector<double>> continuous_loading;
  std::vector<double> continuous_center, continuous_spread;
  std::vector<double> mean_shift, scale_shift;

  std::vector<std::vector<double>> lab_loading;
  std::vector<double> lab_center, lab_spread;

  // Binary features from index 2 (0 and 1 are sex and race).
  std::vector<std::vector<double>> binary_loading;
  std::vector<double> binary_threshold;

  std::vector<std::vector<double>> categorical_loading;
  std::vector<std::vector<std::size_t>> categorical_allowed;  // sorted indices

  std::vector<double> channel_base, channel_sd;
  std::vector<std::vector<double>> channel_loading_u, channel_loading_v, channel_drift;

  std::array<std::vector<double>, preprocess::kNumOutcomes> outcome_u;  // signal already applied
  std::array<std::vector<double>, preprocess::kNumOutcomes> outcome_v;
  std::array<double, preprocess::kNumOutcomes> intercepts{};
};

struct Latent {
  double age = 18.0;
  bool female = false;
  bool african_american = false;
  std::vector<double> u, v;
};

// Coefficients without calibration (intercepts all zero).
GeneratorModel build_model(const WorldSpec& world, const SiteSpec& site);

// Linear predictor of outcome k without its intercept.
double outcome_score(const GeneratorModel& model, std::size_t k, const Latent& latent);

// Mean of sigmoid(intercept + score) over `draws` keyed latent draws.
double expected_prevalence(const GeneratorModel& model, std::size_t k, double intercept,
                           std::size_t draws = 50000);

// Bisection of every intercept (100 steps in [-30, 30]) against the target
// prevalence on 50,000 latent draws. A final gap above 0.005 is a
// CalibrationError.
void calibrate_intercepts(GeneratorModel& model, std::size_t draws = 50000);

// build_model followed by calibrate_intercepts. Validates both specs.
GeneratorModel make_generator(const WorldSpec& world, const SiteSpec& site);

// Records 1..n_records in surgery-time order. Each record draws from its own
// keyed stream, so the output does not depend on the thread count.
preprocess::Cohort generate_site(const GeneratorModel& model);

std::array<double, preprocess::kNumOutcomes> realized_prevalence(const preprocess::Cohort& cohort);

}  // namespace fedperi::synthgen
