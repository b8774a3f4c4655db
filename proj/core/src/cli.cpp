#include "memoir/cli.hpp"

#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "memoir/pipeline.hpp"
#include "memoir/report.hpp"

namespace memoir {

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool resume = false;
};

void add_common(CLI::App* cmd, Flags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "Experiment config (JSON)");
  if (config_required) c->required();
  cmd->add_option("--seed", f.seed, "Run a single seed instead of the configured list");
  cmd->add_option("--mode", f.mode, "Run a single memory mode instead of the configured list");
  cmd->add_option("--out", f.out, "Output directory (overrides the config)");
  cmd->add_option("--threads", f.threads, "Worker threads, 0 for all cores");
}

ExperimentConfig resolve(const Flags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.seed) c.seeds = {*f.seed};
  if (f.mode) {
    try {
      c.modes = {parse_mode(*f.mode)};
    } catch (const std::invalid_argument&) {
      throw ConfigError("--mode: unknown mode '" + *f.mode + "'");
    }
  }
  if (f.out) c.out = *f.out;
  if (f.threads) c.threads = *f.threads;
  c.validate();
  return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memory-augmented navigation experiments on procedural scene graphs", "memoir-lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version_string()));
  Flags f;
  auto* generate = app.add_subcommand("generate", "Write scenes and tours");
  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the world model on expert trajectories");
  auto* train = app.add_subcommand("train", "Imitation-learn the navigation policy");
  auto* evaluate = app.add_subcommand("evaluate", "Roll out every mode and seed, write metrics, traces and plots");
  auto* report = app.add_subcommand("report", "Rebuild summary and plots from metrics.csv");
  auto* all = app.add_subcommand("all", "generate, pretrain, train and evaluate in sequence");
  for (auto* cmd : {generate, pretrain, train, evaluate, all}) add_common(cmd, f, true);
  add_common(report, f, false);
  pretrain->add_flag("--resume", f.resume, "Continue from an existing world-model snapshot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (report->parsed()) {
      const ExperimentConfig c = f.config.empty() && f.out ? ExperimentConfig{} : resolve(f);
      const std::string root = f.out ? *f.out : c.out;
      cmd_report(root);
      out << "report written to " << root << "\n";
      return kExitOk;
    }
    const ExperimentConfig c = resolve(f);
    if (generate->parsed() || all->parsed()) {
      cmd_generate(c);
      out << "generate: " << c.data.train_scenes << " training and " << c.data.eval_scenes << " evaluation scenes\n";
    }
    if (pretrain->parsed() || all->parsed()) {
      cmd_pretrain(c, f.resume);
      out << "pretrain: " << c.seeds.size() << " seed(s)\n";
    }
    if (train->parsed() || all->parsed()) {
      cmd_train(c);
      out << "train: " << c.seeds.size() << " seed(s)\n";
    }
    if (evaluate->parsed() || all->parsed()) {
      cmd_evaluate(c);
      out << "evaluate: metrics written to " << RunLayout{c.out}.metrics().string() << "\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const world::DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace memoir
