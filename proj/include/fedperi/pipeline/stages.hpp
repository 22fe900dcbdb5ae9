#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedperi/fedproto/plan.hpp"
#include "fedperi/pipeline/artifacts.hpp"
#include "fedperi/pipeline/config.hpp"
#include "fedperi/preprocess/dataset.hpp"
#include "fedperi/riskmodel/config.hpp"

namespace fedperi::pipeline {

struct StageInfo {
  std::string dir;
  bool cached = false;
};

// Content-addressed experiment stages. Each stage reads only the persisted
// outputs of its upstream stages and writes into
// <output_dir>/<stage>/stage-<key>, ending with manifest.json.
class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig config, std::ostream* log = nullptr);

  StageInfo generate();
  StageInfo preprocess();
  StageInfo train(fedproto::Paradigm p);
  // Also runs the downsampling experiment when `p` is the configured
  // downsample paradigm and downsampling is on.
  StageInfo evaluate(fedproto::Paradigm p);
  StageInfo downsample();
  StageInfo report();
  // Every stage for every configured paradigm, in order.
  StageInfo run_all();

  std::string generate_key() const;
  std::string preprocess_key() const;
  std::string train_key(fedproto::Paradigm p) const;
  std::string evaluate_key(fedproto::Paradigm p) const;
  std::string downsample_key() const;
  std::string report_key() const;

  std::string stage_path(const std::string& stage, const std::string& key) const;

  const ExperimentConfig& config() const { return config_; }
  const riskmodel::ModelConfig& model_config() const { return model_; }

 private:
  bool needs_pooled() const;
  bool downsampling_enabled() const;
  std::vector<std::string> site_names() const;
  preprocess::Dataset load_split(const std::string& dir, const std::string& prefix, const std::string& split) const;
  void note(const std::string& msg) const;

  ExperimentConfig config_;
  preprocess::FeatureSchema schema_;
  riskmodel::ModelConfig model_;
  std::ostream* log_;
};

}  // namespace fedperi::pipeline
