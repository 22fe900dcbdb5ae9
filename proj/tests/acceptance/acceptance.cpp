// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "fedperi/common/errors.hpp"
#include "fedperi/common/rng.hpp"
#include "fedperi/evalstats/bootstrap.hpp"
#include "fedperi/evalstats/metrics.hpp"
#include "fedperi/evalstats/report.hpp"
#include "fedperi/fedproto/paradigm.hpp"
#include "fedperi/pipeline/config.hpp"
#include "fedperi/pipeline/stages.hpp"
#include "fedperi/preprocess/split.hpp"
#include "fedperi/preprocess/timeseries.hpp"
#include "fedperi/preprocess/transform.hpp"
#include "fixtures.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "reference_model.hpp"

namespace fs = std::filesystem;
using namespace fedperi;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fedperi_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fedproto::TrainPlan tiny_plan(fedproto::Paradigm p, std::size_t rounds) {
  fedproto::TrainPlan plan;
  plan.paradigm = p;
  plan.rounds = rounds;
  plan.batch_size = 32;
  plan.learning_rate = 0.1;
  plan.seed = 17;
  return plan;
}

fedproto::RunOptions last_round() {
  fedproto::RunOptions o;
  o.select_best = false;
  return o;
}

const fixture::Prepared& two_sites() {
  static const auto p = fixture::prepare({fixture::tiny_site("A", 260, 31), fixture::tiny_site("B", 160, 32, 0.5)},
                                         riskmodel::Variant::Preoperative);
  return p;
}

// 1. Whole-model gradients against central differences of a long-double
// forward pass.
Outcome gradients() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  for (auto v : {riskmodel::Variant::Preoperative, riskmodel::Variant::Postoperative}) {
    const auto p = fixture::prepare({fixture::tiny_site("A", 300, 21)}, v);
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
      for (std::size_t b : {1, 4, 16}) {
        std::vector<std::size_t> rows(b);
        for (std::size_t i = 0; i < b; ++i) rows[i] = (seed * 37 + i * 11) % p.sites[0].train.size();
        const auto batch = riskmodel::make_batch(p.sites[0].train, rows, p.config);
        const auto params = riskmodel::init_params(p.config, seed);
        const auto lg = riskmodel::loss_and_grad(params, p.config, batch);
        worst = std::max(worst, oracle::max_elementwise_error(lg.grad, oracle::reference_gradient(params, p.config, batch)));
        ++cases;
      }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-5 && t < 120.0,
          fmt("worst elementwise relative error %.2e over %.0f cases, %.1fs", worst, static_cast<double>(cases), t)};
}

// 2. Protocol identities, bit for bit.
Outcome identities() {
  using fedproto::Paradigm;
  const auto t0 = Clock::now();
  const auto& p = two_sites();
  const std::span<const fedproto::SiteData> one(p.sites.data(), 1);
  auto params = [&](const fedproto::TrainPlan& plan, std::span<const fedproto::SiteData> sites) {
    return fedproto::run_paradigm(plan, sites, p.config, last_round()).models[0].params;
  };
  std::string failed;
  if (!(params(tiny_plan(Paradigm::FedAvg, 3), one) == params(tiny_plan(Paradigm::Local, 3), one))) failed += " a";
  fedproto::TrainPlan prox = tiny_plan(Paradigm::FedProx, 3);
  prox.mu = 0.0;
  if (!(params(prox, p.sites) == params(tiny_plan(Paradigm::FedAvg, 3), p.sites))) failed += " b";
  if (!(params(tiny_plan(Paradigm::Scaffold, 1), p.sites) == params(tiny_plan(Paradigm::FedAvg, 1), p.sites)))
    failed += " c";
  const std::vector<fedproto::SiteData> twins{p.sites[0], p.sites[0]};
  if (!(params(tiny_plan(Paradigm::Central, 3), twins) == params(tiny_plan(Paradigm::Local, 3), one))) failed += " d";
  const double t = seconds_since(t0);
  return {failed.empty() && t < 300.0,
          (failed.empty() ? std::string("(a)-(d) identical") : "differs:" + failed) + fmt(", %.1fs", t)};
}

// 3. Metrics against brute-force oracles.
Outcome metric_oracles() {
  KeyedRng rng(2024, "acceptance.metrics");
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    const std::uint64_t levels = 1 + rng.below(25);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels)) * 0.13;
      y[i] = rng.bernoulli(0.35);
    }
    y[0] = 1;
    y[1] = 0;
    std::swap(y[0], y[rng.below(n)]);
    if (evalstats::auroc(s, y) != oracle::auroc_pairs(s, y)) ++mismatches;
    if (evalstats::auprc(s, y) != oracle::auprc_sweep(s, y)) ++mismatches;
  }
  const double worked = evalstats::auroc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<std::uint8_t>{0, 0, 1, 1});
  return {mismatches == 0 && worked == 0.75,
          fmt("%.0f mismatches over 1000 instances, worked example %.4f", static_cast<double>(mismatches), worked)};
}

// 4. Server bookkeeping over 30 rounds.
Outcome scaffold_bookkeeping() {
  using fedproto::Paradigm;
  const auto& p = two_sites();
  double worst_control = 0.0;
  std::size_t hull_violations = 0;
  for (Paradigm par : {Paradigm::Scaffold, Paradigm::FedAvg}) {
    const auto plan = tiny_plan(par, 30);
    const bool scaffold = par == Paradigm::Scaffold;
    const std::size_t P = riskmodel::zero_params(p.config).size();
    const auto x0 = riskmodel::init_params(p.config, plan.seed).flatten();
    fedproto::ServerState server{x0, scaffold ? std::vector<double>(P, 0.0) : std::vector<double>{}, 0};
    std::vector<fedproto::ClientState> clients;
    for (const auto& s : p.sites)
      clients.push_back({s.site, x0, s.train.size(), scaffold ? std::vector<double>(P, 0.0) : std::vector<double>{}});
    for (std::size_t r = 0; r < plan.rounds; ++r) {
      fedproto::run_round(server, clients, plan, p.sites, p.config);
      for (std::size_t i = 0; i < P; ++i) {
        if (scaffold) {
          double mean = 0.0;
          for (const auto& c : clients) mean += c.control[i];
          mean /= static_cast<double>(clients.size());
          worst_control = std::max(worst_control, std::abs(server.control[i] - mean));
        } else {
          double lo = clients[0].params[i], hi = lo;
          for (const auto& c : clients) {
            lo = std::min(lo, c.params[i]);
            hi = std::max(hi, c.params[i]);
          }
          if (server.x[i] < lo || server.x[i] > hi) ++hull_violations;
        }
      }
    }
  }
  return {worst_control <= 1e-12 && hull_violations == 0,
          fmt("max |control - client mean| %.2e, %.0f hull violations over 30 rounds", worst_control,
              static_cast<double>(hull_violations))};
}

struct MetricsTable {
  // (model, test site) -> per-outcome AUROC, NaN when undefined
  std::map<std::pair<std::string, std::string>, std::vector<double>> auroc;
};

void read_metrics(const std::string& dir, MetricsTable& t) {
  for (const auto& r : json::parse(slurp(fs::path(dir) / "metrics.json"))) {
    std::vector<double> v;
    for (const auto& o : r.at("outcomes"))
      v.push_back(o.at("defined").get<bool>() ? o.at("auroc").at("point").get<double>() : std::nan(""));
    t.auroc[{r.at("model").get<std::string>(), r.at("site").get<std::string>()}] = v;
  }
}

struct DefaultRun {
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  pipeline::ExperimentConfig config;
  MetricsTable metrics;
  json downsample;
  std::string report;
};

DefaultRun run_default() {
  DefaultRun run;
  const fs::path root = scratch("default");
  run.config = pipeline::default_config(7);
  run.config.output_dir = root.string();
  const auto t0 = Clock::now();
  try {
    pipeline::Pipeline pipe(run.config);
    pipe.run_all();
    for (auto p : run.config.paradigms) read_metrics(pipe.stage_path("evaluate", pipe.evaluate_key(p)), run.metrics);
    run.downsample = json::parse(slurp(fs::path(pipe.stage_path("downsample", pipe.downsample_key())) / "downsample.json"));
    run.report = slurp(root / "report.md");
    run.ok = true;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.seconds = seconds_since(t0);
  fs::remove_all(root);
  return run;
}

// 5. Paradigm ordering on the default sites.
Outcome paradigm_ordering(const DefaultRun& run) {
  if (!run.ok) return {false, "pipeline failed: " + run.error};
  std::string detail;
  bool pass = run.seconds < 1800.0;
  const auto& sites = run.config.sites;
  for (const auto& s : sites) {
    const auto& fed = run.metrics.auroc.at({"SCAFFOLD", s.name});
    const auto& central = run.metrics.auroc.at({"Central", s.name});
    int close = 0;
    for (std::size_t k = 0; k < fed.size(); ++k)
      if (std::abs(fed[k] - central[k]) <= 0.03) ++close;
    pass = pass && close >= 7;
    detail += s.name + " |SCAFFOLD-Central|<=0.03 on " + std::to_string(close) + "/9; ";
  }
  for (const auto& s : sites) {
    const auto& in_site = run.metrics.auroc.at({s.name + " Model", s.name});
    for (const auto& other : sites) {
      if (other.name == s.name) continue;
      const auto& cross = run.metrics.auroc.at({other.name + " Model", s.name});
      int worse = 0;
      for (std::size_t k = 0; k < in_site.size(); ++k)
        if (in_site[k] - cross[k] >= 0.02) ++worse;
      pass = pass && worse >= 6;
      detail += other.name + " model on " + s.name + " worse by >=0.02 on " + std::to_string(worse) + "/9; ";
    }
  }
  return {pass, detail + fmt("pipeline %.0fs", run.seconds)};
}

// 6. Downsampling sensitivity.
Outcome downsampling(const DefaultRun& run) {
  if (!run.ok) return {false, "pipeline failed: " + run.error};
  const auto& d = run.downsample;
  const std::size_t repeats = d.at("repeats").get<std::size_t>();
  const auto sites = d.at("sites").get<std::vector<std::string>>();
  std::size_t larger = 0;
  for (std::size_t s = 0; s < run.config.sites.size(); ++s)
    if (run.config.sites[s].n_records > run.config.sites[larger].n_records) larger = s;
  const std::string big = run.config.sites[larger].name;
  const std::size_t idx = std::find(sites.begin(), sites.end(), big) - sites.begin();
  if (idx == sites.size()) return {false, "larger site missing from downsample result"};

  const std::regex style(R"(\d\.\d\d \(\d\.\d{3}\))");
  bool formatted = true;
  for (std::size_t s = 0; s < sites.size(); ++s)
    for (std::size_t k = 0; k < d.at("mean")[s].size(); ++k) {
      if (d.at("mean")[s][k].is_null()) continue;
      const std::string cell =
          evalstats::format_mean_sd(d.at("mean")[s][k].get<double>(), d.at("sd")[s][k].get<double>());
      formatted = formatted && std::regex_match(cell, style) && run.report.find(cell) != std::string::npos;
    }

  const std::string model = fedproto::model_name(run.config.evaluation.downsample_paradigm);
  const auto& full = run.metrics.auroc.at({model, big});
  int not_increased = 0, defined = 0;
  for (std::size_t k = 0; k < full.size(); ++k) {
    if (d.at("mean")[idx][k].is_null() || std::isnan(full[k])) continue;
    ++defined;
    if (d.at("mean")[idx][k].get<double>() <= full[k]) ++not_increased;
  }
  const bool pass = repeats == 10 && formatted && 2 * not_increased > defined;
  return {pass, "repeats " + std::to_string(repeats) + ", format " + (formatted ? "ok" : "wrong") + ", " + big +
                    " mean AUROC not increased on " + std::to_string(not_increased) + "/" + std::to_string(defined)};
}

// 7. Percentile interval coverage and width.
Outcome bootstrap_behaviour() {
  const auto t0 = Clock::now();
  const double shift = 1.0;
  const double truth = 0.5 * std::erfc(-shift / 2.0);  // Phi(shift / sqrt 2)
  auto make = [&](std::size_t n, std::uint64_t seed) {
    evalstats::ScoredSet s;
    s.n_outcomes = 1;
    KeyedRng rng(seed, "acceptance.binormal");
    for (std::size_t i = 0; i < n; ++i) {
      const bool y = rng.bernoulli(0.3);
      s.scores.push_back(rng.normal(y ? shift : 0.0, 1.0));
      s.labels.push_back(y);
    }
    return s;
  };
  evalstats::BootstrapOptions opts;
  std::size_t covered = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    opts.seed = t;
    const auto ci = evalstats::bootstrap_ci(evalstats::Metric::Auroc, 0, make(300, t), opts);
    if (ci.lo <= truth && truth <= ci.hi) ++covered;
  }
  double small = 0.0, large = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    opts.seed = 1000 + t;
    const auto a = evalstats::bootstrap_ci(evalstats::Metric::Auroc, 0, make(300, 1000 + t), opts);
    const auto b = evalstats::bootstrap_ci(evalstats::Metric::Auroc, 0, make(3000, 2000 + t), opts);
    small += a.hi - a.lo;
    large += b.hi - b.lo;
  }
  const double coverage = covered / 200.0;
  const double shrink = 1.0 - large / small;
  const double t = seconds_since(t0);
  return {coverage >= 0.90 && coverage <= 0.98 && shrink >= 0.40 && t < 300.0,
          fmt("coverage %.3f, width shrink %.3f for 10x n, %.1fs", coverage, shrink, t)};
}

// Every file under `root`, manifests without their timing field.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string bytes = slurp(e.path());
    if (e.path().filename() == "manifest.json") {
      json m = json::parse(bytes);
      m.erase("wall_time");
      bytes = m.dump();
    }
    files[fs::relative(e.path(), root).string()] = std::move(bytes);
  }
  return files;
}

// 8. Reruns and thread counts leave artifacts unchanged.
Outcome determinism() {
  const fs::path root = scratch("determinism");
  const fs::path out = root / "out";
  const std::string config = std::string(FEDPERI_SOURCE_DIR) + "/configs/small.toml";
  auto run = [&](int threads) {
    fs::remove_all(out);
    return shell("FEDPERISIM_THREADS=" + std::to_string(threads) + " " + FEDPERISIM_BIN + " run --config " + config +
                 " --out " + out.string() + " > /dev/null 2>&1");
  };
  std::map<std::string, std::string> first, second, wide;
  std::string report_a, report_b;
  if (run(1) == 0) {
    first = snapshot(out);
    report_a = slurp(out / "report.md");
  }
  if (run(1) == 0) {
    second = snapshot(out);
    report_b = slurp(out / "report.md");
  }
  if (run(4) == 0) wide = snapshot(out);
  fs::remove_all(root);
  if (first.empty() || second.empty() || wide.empty()) return {false, "a pipeline run failed"};
  std::size_t differing = 0;
  for (const auto& [name, bytes] : first) {
    auto it = wide.find(name);
    if (it == wide.end() || it->second != bytes) ++differing;
  }
  if (wide.size() != first.size()) ++differing;
  const bool pass = !report_a.empty() && report_a == report_b && first == second && differing == 0;
  return {pass, std::string("reports ") + (report_a == report_b ? "identical" : "differ") + ", " +
                    std::to_string(first.size()) + " artifacts, " + std::to_string(differing) +
                    " differ between 1 and 4 threads"};
}

// 9. Preprocessing contracts on a default-world cohort.
Outcome preprocessing() {
  std::string failed;
  const auto world = synthgen::default_world(7);
  const auto schema = synthgen::make_schema(world);
  auto spec = synthgen::default_sites(7, true)[1];
  spec.n_records = 1000;
  preprocess::Cohort cohort = synthgen::generate_site(synthgen::make_generator(world, spec));

  const auto split = preprocess::chronological_split(cohort);
  if (split.train.size() != 630 || split.validation.size() != 70 || split.test.size() != 300) failed += " sizes";
  auto key = [](const preprocess::Record& r) { return std::pair(r.surgery_time, r.id); };
  if (key(split.train.back()) >= key(split.validation.front()) || key(split.validation.back()) >= key(split.test.front()))
    failed += " order";
  preprocess::Cohort shuffled = cohort;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto again = preprocess::chronological_split(shuffled);
  for (std::size_t i = 0; i < split.test.size(); ++i)
    if (again.test[i].id != split.test[i].id) {
      failed += " shuffle";
      break;
    }

  const auto t = preprocess::fit(split.train, schema, spec.name, 7);
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& r : *part) {
      const auto f = preprocess::impute_and_flag(r, schema, t);
      for (std::size_t j = 0; j < f.continuous.size(); ++j)
        if (f.continuous[j] < t.continuous[j].p0_5 || f.continuous[j] > t.continuous[j].p99_5) {
          failed += " winsorize";
          goto winsor_done;
        }
    }
winsor_done:

  preprocess::Cohort perturbed = cohort;
  std::vector<std::int64_t> held_out;
  for (const auto& r : split.validation) held_out.push_back(r.id);
  for (const auto& r : split.test) held_out.push_back(r.id);
  std::sort(held_out.begin(), held_out.end());
  for (auto& r : perturbed) {
    if (!std::binary_search(held_out.begin(), held_out.end(), r.id)) continue;
    for (auto& v : r.continuous) v = v ? std::optional<double>(*v * -3.0 + 1e4) : std::optional<double>(42.0);
    for (auto& c : r.categorical) c = "unseen";
    for (auto& ch : r.timeseries)
      for (auto& p : ch) p.value *= 9.0;
    for (auto& b : r.binary) b = b ? std::optional<bool>(!*b) : std::optional<bool>(true);
  }
  const auto t2 = preprocess::fit(preprocess::chronological_split(perturbed).train, schema, spec.name, 7);
  if (!(t2 == t) || t2.to_json().dump() != t.to_json().dump()) failed += " leakage";

  const auto r = preprocess::resample_timeseries(std::vector<preprocess::TimePoint>{{0, 1.0}, {2, 3.0}}, 3,
                                                 preprocess::ChannelStats{0.0, 0.0, 1.0, true});
  if (r.values != std::vector<double>{1.0, 2.0, 3.0}) failed += " interpolation";
  return {failed.empty(), failed.empty() ? "split 630/70/300, winsorize, leakage and interpolation checks hold"
                                         : "failed:" + failed};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  DefaultRun default_run;
  bool default_done = false;
  auto with_default = [&](Outcome (*f)(const DefaultRun&)) {
    return [&, f] {
      if (!default_done) {
        default_run = run_default();
        default_done = true;
      }
      return f(default_run);
    };
  };
  const std::vector<Criterion> criteria{
      {"gradient correctness", gradients},
      {"protocol identities", identities},
      {"metric oracles", metric_oracles},
      {"SCAFFOLD bookkeeping", scaffold_bookkeeping},
      {"paradigm ordering", with_default(paradigm_ordering)},
      {"downsampling sensitivity", with_default(downsampling)},
      {"bootstrap intervals", bootstrap_behaviour},
      {"determinism", determinism},
      {"preprocessing contracts", preprocessing},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
