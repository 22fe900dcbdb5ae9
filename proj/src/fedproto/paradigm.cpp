#include "fedperi/fedproto/paradigm.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/threads.hpp"
#include "fedperi/evalstats/metrics.hpp"
#include "fedperi/fedproto/aggregate.hpp"
#include "fedperi/fedproto/local_train.hpp"
#include "fedperi/riskmodel/checkpoint.hpp"

namespace fedperi::fedproto {

using riskmodel::ModelConfig;
using riskmodel::ModelParams;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json number(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
double read_number(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs f(i) for i in [0, n), concurrently when allowed. The first exception
// (by index) is rethrown after every task finished.
template <typename F>
void for_each_client(std::size_t n, bool parallel, F f) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static, 1) if (parallel && configured_threads() > 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SiteRoundEntry validation_entry(const std::string& site, const ModelParams& params, const ModelConfig& config,
                                const preprocess::Dataset& validation) {
  SiteRoundEntry e;
  e.site = site;
  const preprocess::Dataset* d = &validation;
  e.val_auroc = outcome_aurocs(params, config, std::span<const preprocess::Dataset* const>(&d, 1));
  e.val_mean = mean_defined(e.val_auroc);
  return e;
}

void check_sites(std::span<const SiteData> sites) {
  if (sites.empty()) throw ContractError("run_paradigm: no sites");
  for (const SiteData& s : sites) {
    if (s.train.empty()) throw ClientError("site " + s.site + " has no training records");
    if (s.validation.empty()) throw ClientError("site " + s.site + " has no validation records");
  }
}

ModelParams params_from(const ModelConfig& config, const std::vector<double>& flat) {
  ModelParams p = riskmodel::zero_params(config);
  p.unflatten(flat);
  return p;
}

}  // namespace

nlohmann::json RoundLog::to_json(bool include_timing) const {
  nlohmann::json sites_json = nlohmann::json::array();
  for (const SiteRoundEntry& e : sites) {
    nlohmann::json au = nlohmann::json::array();
    for (double v : e.val_auroc) au.push_back(number(v));
    sites_json.push_back(
        {{"site", e.site}, {"train_loss", number(e.train_loss)}, {"val_auroc", au}, {"val_mean", number(e.val_mean)}});
  }
  nlohmann::json j = {{"model", model},
                      {"round", round},
                      {"sites", sites_json},
                      {"selection_score", number(selection_score)}};
  if (include_timing) j["wall_time"] = wall_time;
  return j;
}

RoundLog RoundLog::from_json(const nlohmann::json& j) {
  RoundLog r;
  try {
    j.at("model").get_to(r.model);
    j.at("round").get_to(r.round);
    for (const auto& s : j.at("sites")) {
      SiteRoundEntry e;
      s.at("site").get_to(e.site);
      e.train_loss = read_number(s.at("train_loss"));
      for (const auto& v : s.at("val_auroc")) e.val_auroc.push_back(read_number(v));
      e.val_mean = read_number(s.at("val_mean"));
      r.sites.push_back(std::move(e));
    }
    r.selection_score = read_number(j.at("selection_score"));
    r.wall_time = j.value("wall_time", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("round log: ") + e.what());
  }
  return r;
}

std::string model_name(Paradigm p, const std::string& site) {
  switch (p) {
    case Paradigm::Local: return site + " Model";
    case Paradigm::Central: return "Central";
    case Paradigm::FedAvg: return "FedAvg";
    case Paradigm::FedProx: return "FedProx";
    case Paradigm::Scaffold: return "SCAFFOLD";
  }
  return "?";
}

std::string checkpoint_file_name(const std::string& model) {
  std::string out;
  for (char c : model) out += (std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_');
  return out + ".fpsm";
}

std::vector<double> outcome_aurocs(const ModelParams& params, const ModelConfig& config,
                                   std::span<const preprocess::Dataset* const> data) {
  std::vector<std::vector<double>> scores(config.n_outcomes);
  std::vector<std::vector<std::uint8_t>> labels(config.n_outcomes);
  for (const preprocess::Dataset* d : data) {
    const ad::Tensor pred = riskmodel::predict_dataset(params, config, *d);
    for (std::size_t i = 0; i < d->size(); ++i)
      for (std::size_t k = 0; k < config.n_outcomes; ++k) {
        scores[k].push_back(pred.at(i, k));
        labels[k].push_back(d->examples[i].labels[k] > 0.5 ? 1 : 0);
      }
  }
  std::vector<double> out(config.n_outcomes, kNaN);
  for (std::size_t k = 0; k < config.n_outcomes; ++k) {
    try {
      out[k] = evalstats::auroc(scores[k], labels[k]);
    } catch (const UndefinedMetricError&) {
    }
  }
  return out;
}

double mean_defined(std::span<const double> values) {
  double total = 0.0;
  std::size_t n = 0;
  for (double v : values)
    if (!std::isnan(v)) {
      total += v;
      ++n;
    }
  return n == 0 ? kNaN : total / static_cast<double>(n);
}

std::size_t select_round(std::span<const double> scores) {
  std::size_t best = 0;
  double best_score = kNaN;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!std::isnan(scores[i]) && (std::isnan(best_score) || scores[i] > best_score)) {
      best = i;
      best_score = scores[i];
    }
  return best;
}

RoundLog run_round(ServerState& server, std::vector<ClientState>& clients, const TrainPlan& plan,
                   std::span<const SiteData> sites, const ModelConfig& config, const RunOptions& opts) {
  if (clients.size() != sites.size()) throw ProtocolError("run_round: one client per site required");
  if (!is_federated(plan.paradigm)) throw ContractError("run_round: paradigm is not federated");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = clients.size();

  // Broadcast x; clients train on private copies.
  std::vector<ClientUpdate> updates(n);
  for_each_client(n, opts.parallel_clients, [&](std::size_t k) {
    clients[k].params = server.x;
    try {
      updates[k] = local_train(clients[k], server, plan, sites[k].train, config);
    } catch (const DivergenceError&) {
      throw;
    } catch (const Error& e) {
      throw ClientError("round " + std::to_string(server.round) + ", site " + clients[k].site + ": " + e.what());
    }
  });

  ServerState next = aggregate(server, updates, plan.paradigm, n);
  for (std::size_t k = 0; k < n; ++k) {
    clients[k].params = updates[k].y;
    if (plan.paradigm == Paradigm::Scaffold)
      for (std::size_t i = 0; i < clients[k].control.size(); ++i) clients[k].control[i] += updates[k].delta_control[i];
  }

  RoundLog log;
  log.model = model_name(plan.paradigm);
  log.round = server.round;
  const ModelParams global = params_from(config, next.x);
  log.sites.resize(n);
  for_each_client(n, opts.parallel_clients, [&](std::size_t k) {
    log.sites[k] = validation_entry(sites[k].site, global, config, sites[k].validation);
    log.sites[k].train_loss = updates[k].train_loss;
  });
  std::vector<double> means;
  for (const SiteRoundEntry& e : log.sites) means.push_back(e.val_mean);
  log.selection_score = mean_defined(means);
  server = std::move(next);
  log.wall_time = seconds_since(t0);
  return log;
}

TrainedArtifacts run_paradigm(const TrainPlan& plan, std::span<const SiteData> sites, const ModelConfig& config,
                              const RunOptions& opts) {
  plan.validate();
  config.validate();
  check_sites(sites);
  TrainedArtifacts art;
  art.plan = plan;
  art.config = config;
  const std::vector<double> x0 = riskmodel::init_params(config, plan.seed).flatten();
  const std::size_t P = x0.size();
  auto emit = [&](RoundLog log) {
    if (opts.on_round) opts.on_round(log);
    art.log.push_back(std::move(log));
  };

  if (plan.paradigm == Paradigm::Local) {
    const std::size_t n = sites.size();
    std::vector<ServerState> states(n, ServerState{x0, {}, 0});
    std::vector<std::vector<double>> best(n, x0);
    std::vector<std::vector<double>> scores(n);
    for (std::size_t r = 0; r < plan.rounds; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      RoundLog log;
      log.model = "Local";
      log.round = r;
      log.sites.resize(n);
      for_each_client(n, opts.parallel_clients, [&](std::size_t k) {
        const ClientState client{sites[k].site, states[k].x, sites[k].train.size(), {}};
        ClientUpdate u = local_train(client, states[k], plan, sites[k].train, config);
        states[k].x = std::move(u.y);
        ++states[k].round;
        log.sites[k] = validation_entry(sites[k].site, params_from(config, states[k].x), config, sites[k].validation);
        log.sites[k].train_loss = u.train_loss;
      });
      std::vector<double> means;
      for (std::size_t k = 0; k < n; ++k) {
        scores[k].push_back(log.sites[k].val_mean);
        means.push_back(log.sites[k].val_mean);
        if (!opts.select_best || select_round(scores[k]) == r) best[k] = states[k].x;
      }
      log.selection_score = mean_defined(means);
      log.wall_time = seconds_since(t0);
      emit(std::move(log));
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t br = opts.select_best ? select_round(scores[k]) : plan.rounds - 1;
      art.models.push_back({model_name(plan.paradigm, sites[k].site), sites[k].site, params_from(config, best[k]), br,
                            scores[k][br]});
    }
    return art;
  }

  if (plan.paradigm == Paradigm::Central) {
    ServerState server{x0, {}, 0};
    std::vector<const preprocess::Dataset*> train, val;
    for (const SiteData& s : sites) {
      train.push_back(&s.train);
      val.push_back(&s.validation);
    }
    std::vector<double> best = x0, scores;
    for (std::size_t r = 0; r < plan.rounds; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      ClientUpdate u = central_train(server, plan, train, config);
      server.x = std::move(u.y);
      ++server.round;
      const ModelParams current = params_from(config, server.x);
      RoundLog log;
      log.model = model_name(plan.paradigm);
      log.round = r;
      SiteRoundEntry pooled;
      pooled.site = "pooled";
      pooled.train_loss = u.train_loss;
      pooled.val_auroc = outcome_aurocs(current, config, val);
      pooled.val_mean = mean_defined(pooled.val_auroc);
      log.sites.push_back(pooled);
      for (const SiteData& s : sites) log.sites.push_back(validation_entry(s.site, current, config, s.validation));
      log.selection_score = pooled.val_mean;
      scores.push_back(log.selection_score);
      if (!opts.select_best || select_round(scores) == r) best = server.x;
      log.wall_time = seconds_since(t0);
      emit(std::move(log));
    }
    const std::size_t br = opts.select_best ? select_round(scores) : plan.rounds - 1;
    art.models.push_back({model_name(plan.paradigm), "pooled", params_from(config, best), br, scores[br]});
    art.server = std::move(server);
    return art;
  }

  // Federated.
  const bool scaffold = plan.paradigm == Paradigm::Scaffold;
  ServerState server{x0, scaffold ? std::vector<double>(P, 0.0) : std::vector<double>{}, 0};
  std::vector<ClientState> clients;
  for (const SiteData& s : sites)
    clients.push_back({s.site, x0, s.train.size(), scaffold ? std::vector<double>(P, 0.0) : std::vector<double>{}});
  std::vector<double> best = x0, scores;
  for (std::size_t r = 0; r < plan.rounds; ++r) {
    RoundLog log = run_round(server, clients, plan, sites, config, opts);
    scores.push_back(log.selection_score);
    if (!opts.select_best || select_round(scores) == r) best = server.x;
    emit(std::move(log));
  }
  const std::size_t br = opts.select_best ? select_round(scores) : plan.rounds - 1;
  art.models.push_back({model_name(plan.paradigm), "federated", params_from(config, best), br, scores[br]});
  art.server = std::move(server);
  art.clients = std::move(clients);
  return art;
}

void save_artifacts(const TrainedArtifacts& art, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const TrainedModel& m : art.models)
    riskmodel::save_checkpoint(art.config, m.params, (std::filesystem::path(dir) / checkpoint_file_name(m.name)).string());
  std::ofstream log((std::filesystem::path(dir) / "round_log.jsonl").string());
  if (!log) throw FormatError("cannot write round log in " + dir);
  for (const RoundLog& r : art.log) log << r.to_json(false).dump() << '\n';
  nlohmann::json models = nlohmann::json::array();
  for (const TrainedModel& m : art.models)
    models.push_back({{"name", m.name},
                      {"trained_on", m.trained_on},
                      {"checkpoint", checkpoint_file_name(m.name)},
                      {"best_round", m.best_round},
                      {"best_score", number(m.best_score)}});
  std::ofstream index((std::filesystem::path(dir) / "models.json").string());
  if (!index) throw FormatError("cannot write model index in " + dir);
  index << models.dump(2) << '\n';
}

}  // namespace fedperi::fedproto
