#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "fedperi/fedproto/plan.hpp"
#include "fedperi/fedproto/state.hpp"
#include "fedperi/riskmodel/model.hpp"

namespace fedperi::fedproto {

struct SiteRoundEntry {
  std::string site;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> val_auroc;  // one per outcome; NaN when single-class
  double val_mean = std::numeric_limits<double>::quiet_NaN();
};

// One JSON line of the round log. `model` names the model the entries
// describe (a local site model, "Central", or the federated algorithm).
struct RoundLog {
  std::string model;
  std::size_t round = 0;
  std::vector<SiteRoundEntry> sites;
  double selection_score = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;  // seconds

  // Timing is left out of persisted logs so that reruns are byte-identical.
  nlohmann::json to_json(bool include_timing = true) const;
  static RoundLog from_json(const nlohmann::json& j);
};

struct TrainedModel {
  std::string name;        // "GNV Model", "Central", "SCAFFOLD", ...
  std::string trained_on;  // site name, or "pooled"/"federated"
  riskmodel::ModelParams params;
  std::size_t best_round = 0;
  double best_score = std::numeric_limits<double>::quiet_NaN();
};

struct TrainedArtifacts {
  TrainPlan plan;
  riskmodel::ModelConfig config;
  std::vector<TrainedModel> models;
  std::vector<RoundLog> log;
  // Federated runs only: state after the final round.
  ServerState server;
  std::vector<ClientState> clients;
};

struct RunOptions {
  bool parallel_clients = true;
  // Keep the round with the best validation score; otherwise the last round.
  bool select_best = true;
  std::function<void(const RoundLog&)> on_round;
};

// Display name of the model a paradigm produces for `site` (local only).
std::string model_name(Paradigm p, const std::string& site = "");

// Validation AUROC per outcome; NaN where the outcome is single-class.
std::vector<double> outcome_aurocs(const riskmodel::ModelParams& params, const riskmodel::ModelConfig& config,
                                   std::span<const preprocess::Dataset* const> data);
// Mean over the defined entries; NaN when none is defined.
double mean_defined(std::span<const double> values);

// Broadcast, local training on every client, aggregation, validation.
RoundLog run_round(ServerState& server, std::vector<ClientState>& clients, const TrainPlan& plan,
                   std::span<const SiteData> sites, const riskmodel::ModelConfig& config, const RunOptions& opts = {});

TrainedArtifacts run_paradigm(const TrainPlan& plan, std::span<const SiteData> sites,
                              const riskmodel::ModelConfig& config, const RunOptions& opts = {});

// Index of the first round with the highest score (NaN scores never win);
// 0 when every score is NaN.
std::size_t select_round(std::span<const double> scores);

// <dir>/<model>.fpsm for each model, <dir>/models.json (name, checkpoint,
// selected round) and <dir>/round_log.jsonl without timings.
void save_artifacts(const TrainedArtifacts& artifacts, const std::string& dir);
std::string checkpoint_file_name(const std::string& model);

}  // namespace fedperi::fedproto
