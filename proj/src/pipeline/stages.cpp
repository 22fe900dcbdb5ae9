#include "fedperi/pipeline/stages.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "fedperi/common/errors.hpp"
#include "fedperi/evalstats/bootstrap.hpp"
#include "fedperi/evalstats/downsample.hpp"
#include "fedperi/evalstats/hypothesis.hpp"
#include "fedperi/evalstats/report.hpp"
#include "fedperi/evalstats/subgroup.hpp"
#include "fedperi/fedproto/paradigm.hpp"
#include "fedperi/preprocess/cohort_io.hpp"
#include "fedperi/preprocess/split.hpp"
#include "fedperi/riskmodel/checkpoint.hpp"
#include "fedperi/synthgen/generator.hpp"

namespace fedperi::pipeline {

namespace fs = std::filesystem;
using fedproto::Paradigm;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string model_stem(const std::string& model) {
  std::string f = fedproto::checkpoint_file_name(model);
  return f.substr(0, f.rfind('.'));
}

std::string scores_file(const std::string& model, const std::string& site) {
  return "scores_" + model_stem(model) + "_" + site + ".csv";
}

json number(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

evalstats::ScoredSet score_dataset(const riskmodel::ModelParams& params, const riskmodel::ModelConfig& config,
                                   const preprocess::Dataset& data) {
  const ad::Tensor pred = riskmodel::predict_dataset(params, config, data);
  evalstats::ScoredSet set;
  set.site = data.site;
  set.scores.assign(pred.data().begin(), pred.data().end());
  set.labels.reserve(data.size() * preprocess::kNumOutcomes);
  for (const auto& ex : data.examples) {
    for (double y : ex.labels) set.labels.push_back(y > 0.5 ? 1 : 0);
    set.subgroups.push_back(ex.subgroup);
  }
  set.validate();
  return set;
}

std::vector<double> point_aurocs(const evalstats::ScoredSet& set) {
  std::vector<double> out;
  for (std::size_t k = 0; k < set.n_outcomes; ++k) {
    try {
      out.push_back(evalstats::auroc(set.score_column(k), set.label_column(k)));
    } catch (const UndefinedMetricError&) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

void prepare_dir(const std::string& dir, bool keep_partial) {
  if (!keep_partial) fs::remove_all(dir);
  fs::create_directories(dir);
}

void finish_stage(Manifest& m, const std::string& dir, Clock::time_point t0) {
  record_outputs(m, dir);
  m.wall_time = seconds_since(t0);
  write_manifest(m, dir);
}

std::string split_prefix(Paradigm p, const std::string& site) {
  return p == Paradigm::Central ? "pooled_" + site : site;
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig config, std::ostream* log) : config_(std::move(config)), log_(log) {
  config_.validate();
  schema_ = synthgen::make_schema(config_.world);
  model_ = riskmodel::config_for(preprocess::dims_for(schema_), schema_.vocab_sizes(), config_.variant);
}

void Pipeline::note(const std::string& msg) const {
  if (log_) *log_ << "[fedperisim] " << msg << std::endl;
}

std::vector<std::string> Pipeline::site_names() const {
  std::vector<std::string> names;
  for (const auto& s : config_.sites) names.push_back(s.name);
  return names;
}

bool Pipeline::downsampling_enabled() const { return config_.evaluation.downsampling && config_.sites.size() >= 2; }

bool Pipeline::needs_pooled() const {
  for (Paradigm p : config_.paradigms)
    if (p == Paradigm::Central) return true;
  return downsampling_enabled() && config_.evaluation.downsample_paradigm == Paradigm::Central;
}

std::string Pipeline::stage_path(const std::string& stage, const std::string& key) const {
  return stage_dir(config_.output_dir, stage, key);
}

std::string Pipeline::generate_key() const {
  json sites = json::array();
  for (const auto& s : config_.sites) sites.push_back(s.to_json());
  return digest_json({{"stage", "generate"}, {"seed", config_.seed}, {"world", config_.world.to_json()}, {"sites", sites}});
}

std::string Pipeline::preprocess_key() const {
  return digest_json({{"stage", "preprocess"},
                      {"generate", generate_key()},
                      {"seed", config_.seed},
                      {"series", model_.uses_series()},
                      {"pooled", needs_pooled()}});
}

std::string Pipeline::train_key(Paradigm p) const {
  return digest_json({{"stage", "train"},
                      {"preprocess", preprocess_key()},
                      {"plan", config_.plan_for(p).to_json()},
                      {"model", model_.to_json()}});
}

std::string Pipeline::evaluate_key(Paradigm p) const {
  return digest_json({{"stage", "evaluate"},
                      {"train", train_key(p)},
                      {"seed", config_.seed},
                      {"replicates", config_.evaluation.replicates},
                      {"alpha", config_.evaluation.alpha},
                      {"subgroups", config_.evaluation.subgroups}});
}

std::string Pipeline::downsample_key() const {
  const Paradigm p = config_.evaluation.downsample_paradigm;
  return digest_json({{"stage", "downsample"},
                      {"preprocess", preprocess_key()},
                      {"plan", config_.plan_for(p).to_json()},
                      {"model", model_.to_json()},
                      {"repeats", config_.evaluation.downsample_repeats},
                      {"seed", config_.seed}});
}

std::string Pipeline::report_key() const {
  json evals = json::object();
  for (Paradigm p : config_.paradigms) evals[fedproto::to_string(p)] = evaluate_key(p);
  return digest_json({{"stage", "report"},
                      {"evaluate", evals},
                      {"downsample", downsampling_enabled() ? json(downsample_key()) : json(nullptr)},
                      {"seed", config_.seed},
                      {"replicates", config_.evaluation.replicates},
                      {"alpha", config_.evaluation.alpha}});
}

preprocess::Dataset Pipeline::load_split(const std::string& dir, const std::string& prefix,
                                         const std::string& split) const {
  return preprocess::load_dataset(join(dir, prefix + "_" + split + ".fpsd"));
}

StageInfo Pipeline::generate() {
  const std::string key = generate_key();
  const std::string dir = stage_path("generate", key);
  if (cache_valid(dir, key)) {
    note("generate: cached " + dir);
    return {dir, true};
  }
  const auto t0 = Clock::now();
  prepare_dir(dir, false);
  preprocess::save_schema(schema_, join(dir, "schema.json"));
  json summary = json::array();
  for (const auto& site : config_.sites) {
    const synthgen::GeneratorModel gm = synthgen::make_generator(config_.world, site);
    const preprocess::Cohort cohort = synthgen::generate_site(gm);
    preprocess::write_cohort(cohort, schema_, join(dir, site.name + ".csv"), join(dir, site.name + "_series.csv"));
    summary.push_back({{"site", site.name},
                       {"records", cohort.size()},
                       {"target_prevalence", site.target_prevalences},
                       {"realized_prevalence", synthgen::realized_prevalence(cohort)},
                       {"intercepts", gm.intercepts}});
    note("generate: " + site.name + " " + std::to_string(cohort.size()) + " records");
  }
  write_text(join(dir, "generator.json"), summary.dump(2) + "\n");
  Manifest m;
  m.stage = "generate";
  m.key = key;
  m.subtree = {{"world", config_.world.to_json()}, {"sites", config_.to_json()["sites"]}};
  m.seed = config_.seed;
  finish_stage(m, dir, t0);
  return {dir, false};
}

StageInfo Pipeline::preprocess() {
  const std::string key = preprocess_key();
  const std::string dir = stage_path("preprocess", key);
  if (cache_valid(dir, key)) {
    note("preprocess: cached " + dir);
    return {dir, true};
  }
  const std::string gen_dir = stage_path("generate", generate_key());
  require_stage(gen_dir, generate_key(), "fedperisim generate");
  const auto t0 = Clock::now();
  prepare_dir(dir, false);
  const preprocess::FeatureSchema schema = preprocess::load_schema(join(gen_dir, "schema.json"));
  const bool series = model_.uses_series();

  std::vector<preprocess::CohortSplit> splits;
  json split_summary = json::array();
  for (const auto& site : config_.sites) {
    preprocess::Cohort cohort =
        preprocess::read_cohort(schema, join(gen_dir, site.name + ".csv"), join(gen_dir, site.name + "_series.csv"));
    preprocess::CohortSplit split = preprocess::chronological_split(std::move(cohort));
    const preprocess::FittedTransform t = preprocess::fit(split.train, schema, site.name, config_.seed);
    preprocess::save_transform(t, join(dir, "transform_" + site.name + ".json"));
    json sizes = json::object();
    for (const auto& [name, part] : {std::pair{"train", &split.train}, std::pair{"validation", &split.validation},
                                     std::pair{"test", &split.test}}) {
      preprocess::save_dataset(preprocess::transform_cohort(*part, schema, t, site.name, series),
                               join(dir, site.name + "_" + name + ".fpsd"));
      sizes[name] = {{"records", part->size()}, {"prevalence", synthgen::realized_prevalence(*part)}};
    }
    split_summary.push_back({{"site", site.name}, {"splits", sizes}});
    note("preprocess: " + site.name + " train/validation/test " + std::to_string(split.train.size()) + "/" +
         std::to_string(split.validation.size()) + "/" + std::to_string(split.test.size()));
    if (needs_pooled()) splits.push_back(std::move(split));
  }
  if (needs_pooled()) {
    preprocess::Cohort pooled;
    for (const auto& s : splits) pooled.insert(pooled.end(), s.train.begin(), s.train.end());
    const preprocess::FittedTransform t = preprocess::fit(pooled, schema, "pooled", config_.seed);
    pooled.clear();
    preprocess::save_transform(t, join(dir, "transform_pooled.json"));
    for (std::size_t i = 0; i < splits.size(); ++i) {
      const std::string& name = config_.sites[i].name;
      preprocess::save_dataset(preprocess::transform_cohort(splits[i].train, schema, t, name, series),
                               join(dir, "pooled_" + name + "_train.fpsd"));
      preprocess::save_dataset(preprocess::transform_cohort(splits[i].validation, schema, t, name, series),
                               join(dir, "pooled_" + name + "_validation.fpsd"));
      preprocess::save_dataset(preprocess::transform_cohort(splits[i].test, schema, t, name, series),
                               join(dir, "pooled_" + name + "_test.fpsd"));
    }
  }
  write_text(join(dir, "splits.json"), split_summary.dump(2) + "\n");
  Manifest m;
  m.stage = "preprocess";
  m.key = key;
  m.subtree = {{"series", series}, {"pooled", needs_pooled()}};
  m.seed = config_.seed;
  m.inputs[join(gen_dir, "manifest.json")] = generate_key();
  finish_stage(m, dir, t0);
  return {dir, false};
}

StageInfo Pipeline::train(Paradigm p) {
  const std::string key = train_key(p);
  const std::string dir = stage_path("train", key);
  const std::string label = fedproto::to_string(p);
  if (cache_valid(dir, key)) {
    note("train " + label + ": cached " + dir);
    return {dir, true};
  }
  const std::string pre_dir = stage_path("preprocess", preprocess_key());
  require_stage(pre_dir, preprocess_key(), "fedperisim preprocess");
  const auto t0 = Clock::now();

  std::vector<fedproto::SiteData> sites;
  for (const auto& s : config_.sites) {
    const std::string prefix = split_prefix(p, s.name);
    sites.push_back({s.name, load_split(pre_dir, prefix, "train"), load_split(pre_dir, prefix, "validation"),
                     load_split(pre_dir, prefix, "test")});
  }
  const fedproto::TrainPlan plan = config_.plan_for(p);
  fedproto::RunOptions opts;
  opts.on_round = [this](const fedproto::RoundLog& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "train %s: round %zu mean validation AUROC %.4f (%.1fs)", r.model.c_str(),
                  r.round + 1, r.selection_score, r.wall_time);
    note(buf);
  };
  const fedproto::TrainedArtifacts art = fedproto::run_paradigm(plan, sites, model_, opts);

  prepare_dir(dir, false);
  fedproto::save_artifacts(art, dir);
  write_text(join(dir, "plan.json"), plan.to_json().dump(2) + "\n");
  write_text(join(dir, "model_config.json"), model_.to_json().dump(2) + "\n");
  Manifest m;
  m.stage = "train";
  m.key = key;
  m.subtree = {{"plan", plan.to_json()}, {"model", model_.to_json()}};
  m.seed = config_.seed;
  m.inputs[join(pre_dir, "manifest.json")] = preprocess_key();
  finish_stage(m, dir, t0);
  return {dir, false};
}

StageInfo Pipeline::evaluate(Paradigm p) {
  const std::string key = evaluate_key(p);
  const std::string dir = stage_path("evaluate", key);
  const std::string label = fedproto::to_string(p);
  const bool run_downsample = downsampling_enabled() && p == config_.evaluation.downsample_paradigm;
  if (cache_valid(dir, key)) {
    note("evaluate " + label + ": cached " + dir);
    if (run_downsample) downsample();
    return {dir, true};
  }
  const std::string train_dir = stage_path("train", train_key(p));
  require_stage(train_dir, train_key(p), "fedperisim train --paradigm " + label);
  const std::string pre_dir = stage_path("preprocess", preprocess_key());
  require_stage(pre_dir, preprocess_key(), "fedperisim preprocess");
  const auto t0 = Clock::now();
  prepare_dir(dir, false);

  const json models = json::parse(read_text(join(train_dir, "models.json")));
  evalstats::BootstrapOptions opts{config_.evaluation.replicates, config_.evaluation.alpha, config_.seed};
  json reports = json::array();
  json index = json::array();
  json subgroups = json::array();
  std::string metrics_csv, subgroup_csv;
  bool header = true;
  for (const auto& entry : models) {
    const std::string name = entry.at("name").get<std::string>();
    const std::string trained_on = entry.at("trained_on").get<std::string>();
    const riskmodel::Checkpoint ck = riskmodel::load_checkpoint(join(train_dir, entry.at("checkpoint").get<std::string>()));
    if (!(ck.config == model_)) throw StaleCacheError(train_dir + ": checkpoint architecture differs from the config");
    for (const auto& s : config_.sites) {
      const preprocess::Dataset test = load_split(pre_dir, split_prefix(p, s.name), "test");
      const evalstats::ScoredSet set = score_dataset(ck.params, ck.config, test);
      const std::string file = scores_file(name, s.name);
      save_scored_set(set, join(dir, file));
      const evalstats::MetricReport report = evalstats::evaluate_set(set, opts, name);
      reports.push_back(report.to_json());
      metrics_csv += report.to_csv(header);
      header = false;
      index.push_back({{"model", name}, {"trained_on", trained_on}, {"site", s.name}, {"scores", file}});
      note("evaluate " + name + " on " + s.name + " test data");

      const bool in_site = p != Paradigm::Local || trained_on == s.name;
      if (config_.evaluation.subgroups && in_site) {
        for (auto part : {evalstats::Partition::Sex, evalstats::Partition::Race, evalstats::Partition::Age}) {
          const evalstats::SubgroupResult r = evalstats::subgroup_eval(set, part, opts, name);
          subgroups.push_back({{"model", name}, {"site", s.name}, {"result", r.to_json()}});
          std::istringstream lines(r.to_csv());
          std::string line;
          std::getline(lines, line);
          if (subgroup_csv.empty()) subgroup_csv = "model,site," + line + "\n";
          while (std::getline(lines, line)) subgroup_csv += name + "," + s.name + "," + line + "\n";
        }
      }
    }
  }
  write_text(join(dir, "evaluation.json"), index.dump(2) + "\n");
  write_text(join(dir, "metrics.json"), reports.dump(2) + "\n");
  write_text(join(dir, "metrics.csv"), metrics_csv);
  if (config_.evaluation.subgroups) {
    write_text(join(dir, "subgroups.json"), subgroups.dump(2) + "\n");
    write_text(join(dir, "subgroups.csv"), subgroup_csv);
  }
  Manifest m;
  m.stage = "evaluate";
  m.key = key;
  m.subtree = {{"paradigm", label},
               {"replicates", config_.evaluation.replicates},
               {"alpha", config_.evaluation.alpha},
               {"subgroups", config_.evaluation.subgroups}};
  m.seed = config_.seed;
  m.inputs[join(train_dir, "manifest.json")] = train_key(p);
  m.inputs[join(pre_dir, "manifest.json")] = preprocess_key();
  finish_stage(m, dir, t0);
  if (run_downsample) downsample();
  return {dir, false};
}

StageInfo Pipeline::downsample() {
  if (!downsampling_enabled()) throw ConfigError("downsampling is switched off in the config");
  const std::string key = downsample_key();
  const std::string dir = stage_path("downsample", key);
  if (cache_valid(dir, key)) {
    note("downsample: cached " + dir);
    return {dir, true};
  }
  const std::string pre_dir = stage_path("preprocess", preprocess_key());
  require_stage(pre_dir, preprocess_key(), "fedperisim preprocess");
  const auto t0 = Clock::now();
  // Finished repeats of an interrupted run are kept and reused.
  prepare_dir(dir, true);

  const Paradigm p = config_.evaluation.downsample_paradigm;
  std::vector<fedproto::SiteData> sites;
  for (const auto& s : config_.sites) {
    const std::string prefix = split_prefix(p, s.name);
    sites.push_back({s.name, load_split(pre_dir, prefix, "train"), load_split(pre_dir, prefix, "validation"),
                     load_split(pre_dir, prefix, "test")});
  }
  std::size_t larger = 0, smallest = sites[0].train.size();
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i].train.size() > sites[larger].train.size()) larger = i;
    smallest = std::min(smallest, sites[i].train.size());
  }
  const fedproto::TrainPlan plan = config_.plan_for(p);

  const evalstats::RepeatFn run = [&](std::size_t repeat, const std::vector<std::size_t>& subset) {
    char name[32];
    std::snprintf(name, sizeof name, "repeat_%02zu.json", repeat);
    const std::string cache = join(dir, name);
    if (fs::exists(cache)) {
      std::vector<std::vector<double>> out;
      for (const auto& row : json::parse(read_text(cache))) {
        out.emplace_back();
        for (const auto& v : row) out.back().push_back(v.is_null() ? std::nan("") : v.get<double>());
      }
      note("downsample: repeat " + std::to_string(repeat + 1) + " cached");
      return out;
    }
    std::vector<fedproto::SiteData> local = sites;
    preprocess::Dataset& train = local[larger].train;
    std::vector<preprocess::Example> picked;
    picked.reserve(subset.size());
    for (std::size_t i : subset) picked.push_back(train.examples[i]);
    train.examples = std::move(picked);
    const fedproto::TrainedArtifacts art = fedproto::run_paradigm(plan, local, model_);
    std::vector<std::vector<double>> out;
    json rows = json::array();
    for (const auto& s : local) {
      out.push_back(point_aurocs(score_dataset(art.models.front().params, model_, s.test)));
      json row = json::array();
      for (double v : out.back()) row.push_back(number(v));
      rows.push_back(row);
    }
    write_text(cache, rows.dump() + "\n");
    note("downsample: repeat " + std::to_string(repeat + 1) + " of " +
         std::to_string(config_.evaluation.downsample_repeats) + " done");
    return out;
  };
  const evalstats::DownsampleResult result =
      evalstats::downsample_experiment(site_names(), sites[larger].train.size(), smallest,
                                       config_.evaluation.downsample_repeats, config_.seed, run);
  write_text(join(dir, "downsample.json"), result.to_json().dump(2) + "\n");
  write_text(join(dir, "downsample.csv"), result.to_csv());
  Manifest m;
  m.stage = "downsample";
  m.key = key;
  m.subtree = {{"paradigm", fedproto::to_string(p)},
               {"repeats", config_.evaluation.downsample_repeats},
               {"larger_site", sites[larger].site},
               {"target_size", smallest}};
  m.seed = config_.seed;
  m.inputs[join(pre_dir, "manifest.json")] = preprocess_key();
  finish_stage(m, dir, t0);
  return {dir, false};
}

namespace {

struct EvaluatedParadigm {
  std::string dir;
  std::map<std::pair<std::string, std::string>, evalstats::MetricReport> reports;  // (model, site)
  std::map<std::pair<std::string, std::string>, std::string> score_files;
  json subgroups;
};

EvaluatedParadigm load_evaluation(const std::string& dir) {
  EvaluatedParadigm e;
  e.dir = dir;
  for (const auto& r : json::parse(read_text(join(dir, "metrics.json")))) {
    evalstats::MetricReport m = evalstats::MetricReport::from_json(r);
    e.reports[{m.model, m.site}] = std::move(m);
  }
  for (const auto& i : json::parse(read_text(join(dir, "evaluation.json"))))
    e.score_files[{i.at("model").get<std::string>(), i.at("site").get<std::string>()}] = i.at("scores").get<std::string>();
  if (fs::exists(join(dir, "subgroups.json"))) e.subgroups = json::parse(read_text(join(dir, "subgroups.json")));
  return e;
}

std::string subgroup_table(const json& entries, const std::string& model, const std::string& site) {
  std::vector<evalstats::SubgroupResult> results;
  for (const auto& e : entries)
    if (e.at("model") == model && e.at("site") == site) results.push_back(evalstats::SubgroupResult::from_json(e.at("result")));
  if (results.empty()) return "";
  std::ostringstream out;
  out << "| Outcome |";
  for (const auto& r : results)
    out << ' ' << r.strata[0].stratum << " | " << r.strata[1].stratum << " | p |";
  out << "\n|---|";
  for (std::size_t i = 0; i < results.size(); ++i) out << "---|---|---|";
  out << '\n';
  for (std::size_t k = 0; k < preprocess::kNumOutcomes; ++k) {
    out << "| " << evalstats::outcome_label(k) << " |";
    for (const auto& r : results) {
      for (const auto& s : r.strata) {
        const bool ok = !s.skipped && k < s.report.outcomes.size() && s.report.outcomes[k].defined;
        out << ' ' << (ok ? evalstats::format_estimate(s.report.outcomes[k].auroc) : std::string("n/a")) << " |";
      }
      const double pv = k < r.p_values.size() ? r.p_values[k] : std::nan("");
      const double adj = std::isnan(pv) ? pv : evalstats::bonferroni(std::vector<double>{pv}, preprocess::kNumOutcomes)[0];
      out << ' ' << (std::isnan(adj) ? std::string("n/a") : evalstats::format_fixed(adj, 3)) << " |";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

StageInfo Pipeline::report() {
  const std::string key = report_key();
  const std::string dir = stage_path("report", key);
  if (cache_valid(dir, key)) {
    note("report: cached " + dir);
    return {dir, true};
  }
  std::map<Paradigm, EvaluatedParadigm> evals;
  Manifest m;
  for (Paradigm p : config_.paradigms) {
    const std::string d = stage_path("evaluate", evaluate_key(p));
    require_stage(d, evaluate_key(p), "fedperisim evaluate --paradigm " + fedproto::to_string(p));
    evals[p] = load_evaluation(d);
    m.inputs[join(d, "manifest.json")] = evaluate_key(p);
  }
  std::string down_dir;
  if (downsampling_enabled()) {
    down_dir = stage_path("downsample", downsample_key());
    require_stage(down_dir, downsample_key(),
                  "fedperisim evaluate --paradigm " + fedproto::to_string(config_.evaluation.downsample_paradigm));
    m.inputs[join(down_dir, "manifest.json")] = downsample_key();
  }
  const auto t0 = Clock::now();
  prepare_dir(dir, false);

  const std::vector<std::string> sites = site_names();
  const evalstats::BootstrapOptions opts{config_.evaluation.replicates, config_.evaluation.alpha, config_.seed};
  std::map<std::string, evalstats::ScoredSet> loaded;
  auto scores = [&](Paradigm p, const std::string& model, const std::string& site) -> const evalstats::ScoredSet& {
    const EvaluatedParadigm& e = evals.at(p);
    const std::string path = join(e.dir, e.score_files.at({model, site}));
    auto it = loaded.find(path);
    if (it == loaded.end()) it = loaded.emplace(path, load_scored_set(path, site)).first;
    return it->second;
  };

  const bool has_local = evals.count(Paradigm::Local) > 0;
  const bool has_central = evals.count(Paradigm::Central) > 0;
  const std::optional<Paradigm> fed = config_.federated_paradigm();
  std::ostringstream md;
  std::string csv = "table,model,site,outcome,metric,point,lo,hi,p_value\n";
  auto add_csv = [&](const std::string& table, const evalstats::MetricReport& r) {
    for (const auto& o : r.outcomes) {
      const std::string p = std::isnan(o.p_vs_reference) ? "" : evalstats::format_fixed(o.p_vs_reference, 6);
      for (const auto& [metric, est] : {std::pair{"auroc", o.auroc}, std::pair{"auprc", o.auprc}})
        csv += table + "," + r.model + "," + r.site + "," + o.outcome + "," + metric + "," +
               (o.defined ? evalstats::format_fixed(est.point, 6) + "," + evalstats::format_fixed(est.lo, 6) + "," +
                                evalstats::format_fixed(est.hi, 6)
                          : std::string(",,")) +
               "," + p + "\n";
    }
  };

  md << "# Perioperative complication risk: learning paradigm comparison\n\n";
  md << "Seed " << config_.seed << ", " << riskmodel::to_string(config_.variant) << " model, "
     << config_.evaluation.replicates << " bootstrap resamples, "
     << evalstats::format_fixed(100.0 * (1.0 - config_.evaluation.alpha), 0) << "% percentile intervals.\n\n";

  // Local models on every site next to the federated (or central) model.
  if (has_local) {
    std::vector<std::string> models;
    for (const auto& s : sites) models.push_back(fedproto::model_name(Paradigm::Local, s));
    const Paradigm shared = fed ? *fed : Paradigm::Central;
    const bool has_shared = evals.count(shared) > 0;
    if (has_shared) models.push_back(fedproto::model_name(shared));
    std::vector<evalstats::MetricReport> reports;
    for (const auto& site : sites) {
      const std::string own = fedproto::model_name(Paradigm::Local, site);
      for (const auto& model : models) {
        const Paradigm p = model == fedproto::model_name(shared) ? shared : Paradigm::Local;
        evalstats::MetricReport r = evals.at(p).reports.at({model, site});
        if (model != own) evalstats::attach_p_values(r, scores(p, model, site), scores(Paradigm::Local, own, site), opts);
        add_csv("generalizability", r);
        reports.push_back(std::move(r));
      }
    }
    md << "## Generalizability across sites\n\n";
    md << evalstats::markdown_table(reports, models, sites, "AUROC (95% CI) by model and test site");
    md << "\n^a AUROC differs from the model trained at the test site (paired bootstrap, p < 0.05).\n\n";
  }

  // In-site local, central and federated side by side.
  {
    std::vector<std::string> models;
    std::vector<evalstats::MetricReport> reports;
    if (has_local) models.push_back("Local");
    if (has_central) models.push_back("Central");
    if (fed) models.push_back(fedproto::model_name(*fed));
    for (const auto& site : sites) {
      for (const auto& model : models) {
        Paradigm p = model == "Local" ? Paradigm::Local : model == "Central" ? Paradigm::Central : *fed;
        const std::string stored = p == Paradigm::Local ? fedproto::model_name(Paradigm::Local, site) : model;
        evalstats::MetricReport r = evals.at(p).reports.at({stored, site});
        r.model = model;
        if (has_central && p != Paradigm::Central)
          evalstats::attach_p_values(r, scores(p, stored, site), scores(Paradigm::Central, "Central", site), opts);
        add_csv("paradigms", r);
        reports.push_back(std::move(r));
      }
    }
    md << "## Local, central and federated learning\n\n";
    md << evalstats::markdown_table(reports, models, sites, "AUROC (95% CI) on each site's own test data");
    if (has_central) md << "\n^a AUROC differs from the central model (paired bootstrap, p < 0.05).\n";
    md << "\n";
  }

  if (downsampling_enabled()) {
    evalstats::DownsampleResult d =
        evalstats::DownsampleResult::from_json(json::parse(read_text(join(down_dir, "downsample.json"))));
    const Paradigm p = config_.evaluation.downsample_paradigm;
    const auto it = evals.find(p);
    if (it != evals.end()) {
      d.full.clear();
      for (const auto& site : d.sites) {
        std::vector<double> row;
        for (const auto& o : it->second.reports.at({fedproto::model_name(p), site}).outcomes)
          row.push_back(o.defined ? o.auroc.point : std::nan(""));
        d.full.push_back(row);
      }
    }
    md << "## Equal-size sites\n\n";
    md << "The larger site's training data subsampled to the smaller site's size, " << d.repeats
       << " repeats of " << fedproto::model_name(p) << " training; test AUROC mean (SD).\n\n";
    md << d.to_markdown() << "\n";
    write_text(join(dir, "downsample.csv"), d.to_csv());
  }

  if (config_.evaluation.subgroups) {
    const Paradigm p = fed ? *fed : has_central ? Paradigm::Central : Paradigm::Local;
    const auto it = evals.find(p);
    if (it != evals.end() && !it->second.subgroups.is_null()) {
      md << "## Subgroups\n\n";
      for (const auto& site : sites) {
        const std::string model = p == Paradigm::Local ? fedproto::model_name(p, site) : fedproto::model_name(p);
        const std::string table = subgroup_table(it->second.subgroups, model, site);
        if (table.empty()) continue;
        md << "### " << model << ", " << site << " test data\n\n"
           << "AUROC (95% CI) per stratum; p from an unpaired bootstrap, Bonferroni-adjusted over "
           << preprocess::kNumOutcomes << " outcomes.\n\n"
           << table << "\n";
      }
    }
  }

  const std::string text = md.str();
  write_text(join(dir, "report.md"), text);
  write_text(join(dir, "report.csv"), csv);
  m.stage = "report";
  m.key = key;
  m.subtree = {{"paradigms", config_.to_json()["paradigms"]}, {"downsampling", downsampling_enabled()}};
  m.seed = config_.seed;
  finish_stage(m, dir, t0);
  write_text(join(config_.output_dir, "report.md"), text);
  write_text(join(config_.output_dir, "report.csv"), csv);
  note("report: " + join(config_.output_dir, "report.md"));
  return {dir, false};
}

StageInfo Pipeline::run_all() {
  generate();
  preprocess();
  for (Paradigm p : config_.paradigms) train(p);
  for (Paradigm p : config_.paradigms) evaluate(p);
  return report();
}

}  // namespace fedperi::pipeline
