#pragma once

// Small synthetic cohorts for tests that need real model inputs.

#include <string>
#include <vector>

#include "fedperi/fedproto/state.hpp"
#include "fedperi/preprocess/dataset.hpp"
#include "fedperi/preprocess/split.hpp"
#include "fedperi/preprocess/transform.hpp"
#include "fedperi/riskmodel/config.hpp"
#include "fedperi/synthgen/generator.hpp"

namespace fixture {

using namespace fedperi;

inline synthgen::WorldSpec tiny_world(std::uint64_t seed = 3) {
  synthgen::WorldSpec w;
  w.seed = seed;
  w.n_latent = 4;
  w.n_intraop_latent = 2;
  w.n_base_continuous = 6;
  w.n_labs = 1;
  w.n_binary = 5;
  w.n_categorical = 2;
  w.vocab_size = 12;
  w.n_channels = 3;
  return w;
}

inline synthgen::SiteSpec tiny_site(const std::string& name, std::size_t n, std::uint64_t seed,
                                    double shift = 0.0) {
  synthgen::SiteSpec s;
  s.name = name;
  s.n_records = n;
  s.target_prevalences = {0.3, 0.1, 0.2, 0.15, 0.15, 0.08, 0.1, 0.15, 0.05};
  s.covariate_shift = shift;
  s.concept_shift = shift;
  s.min_minutes = 6;
  s.max_minutes = 14;
  s.sample_interval = 3;
  s.seed = seed;
  return s;
}

struct Prepared {
  synthgen::WorldSpec world;
  preprocess::FeatureSchema schema;
  std::vector<fedproto::SiteData> sites;
  riskmodel::ModelConfig config;
};

inline riskmodel::ModelConfig compact(riskmodel::ModelConfig c) {
  c.continuous_hidden = {6, 4};
  c.binary_hidden = {5};
  c.embedding_dim = 3;
  c.categorical_hidden = 4;
  c.fusion_dim = 6;
  c.gru_hidden = 3;
  c.attention_dim = 3;
  c.head_dim = 3;
  return c;
}

inline fedproto::SiteData prepare_site(const preprocess::FeatureSchema& schema, preprocess::Cohort cohort,
                                       const std::string& name, bool series, std::uint64_t seed) {
  auto split = preprocess::chronological_split(std::move(cohort));
  const auto t = preprocess::fit(split.train, schema, name, seed);
  fedproto::SiteData d;
  d.site = name;
  d.train = preprocess::transform_cohort(split.train, schema, t, name, series);
  d.validation = preprocess::transform_cohort(split.validation, schema, t, name, series);
  d.test = preprocess::transform_cohort(split.test, schema, t, name, series);
  return d;
}

inline Prepared prepare(std::vector<synthgen::SiteSpec> specs, riskmodel::Variant variant,
                        synthgen::WorldSpec world = tiny_world()) {
  Prepared p;
  p.world = world;
  p.schema = synthgen::make_schema(world);
  const bool series = variant == riskmodel::Variant::Postoperative;
  for (const auto& spec : specs) {
    const auto model = synthgen::make_generator(world, spec);
    p.sites.push_back(prepare_site(p.schema, synthgen::generate_site(model), spec.name, series, world.seed));
  }
  p.config = compact(riskmodel::config_for(preprocess::dims_for(p.schema), p.schema.vocab_sizes(), variant));
  return p;
}

}  // namespace fixture
