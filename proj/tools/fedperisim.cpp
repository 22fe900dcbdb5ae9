// fedperisim: synthetic multi-site perioperative risk experiments.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedperi/common/errors.hpp"
#include "fedperi/common/threads.hpp"
#include "fedperi/fedproto/plan.hpp"
#include "fedperi/pipeline/config.hpp"
#include "fedperi/pipeline/stages.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kStageOrder = 3, kDivergence = 4 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate local, central and federated training of a multi-task perioperative risk model"};
  app.require_subcommand(1);
  std::string config_path, paradigm, out;
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* cmd, bool with_paradigm) {
    cmd->add_option("--config", config_path, "TOML or JSON experiment config (defaults when omitted)");
    cmd->add_option("--seed", seed, "Experiment seed, overriding the config");
    cmd->add_option("--out", out, "Output directory, overriding the config");
    if (with_paradigm)
      cmd->add_option("--paradigm", paradigm, "local, central, fedavg, fedprox or scaffold (default: all configured)");
  };
  add_common(app.add_subcommand("generate", "Generate the synthetic site cohorts"), false);
  add_common(app.add_subcommand("preprocess", "Split, fit transforms and build model inputs"), false);
  add_common(app.add_subcommand("train", "Train models under a learning paradigm"), true);
  add_common(app.add_subcommand("evaluate", "Score test sets and bootstrap metrics"), true);
  add_common(app.add_subcommand("report", "Write comparison tables"), false);
  add_common(app.add_subcommand("run", "All stages in order"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  using namespace fedperi;
  try {
    apply_thread_limit();
    pipeline::ExperimentConfig config =
        config_path.empty() ? pipeline::default_config(seed.value_or(7)) : pipeline::load_config(config_path, seed);
    if (!out.empty()) config.output_dir = out;
    std::vector<fedproto::Paradigm> paradigms = config.paradigms;
    if (!paradigm.empty()) paradigms = {fedproto::paradigm_from_string(paradigm)};

    pipeline::Pipeline pipe(config, &std::cerr);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "generate") {
      pipe.generate();
    } else if (cmd == "preprocess") {
      pipe.preprocess();
    } else if (cmd == "train") {
      for (auto p : paradigms) pipe.train(p);
    } else if (cmd == "evaluate") {
      for (auto p : paradigms) pipe.evaluate(p);
    } else if (cmd == "report") {
      pipe.report();
    } else {
      pipe.run_all();
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const StageOrderError& e) {
    std::cerr << "stage error: " << e.what() << '\n';
    return kStageOrder;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
