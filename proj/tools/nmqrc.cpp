// nmqrc: run the STM, NARMA and echo-state experiments from a config file.
//
//   nmqrc stm|narma|esp --config <file> [--scale quick|paper] [--seeds k] [--out dir]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <chrono>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "nmqrc/nmqrc.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Args {
  std::string config;
  std::string scale;
  int seeds = 0;
  std::string out;
  int threads = -1;
  bool quiet = false;
};

int run(nmqrc::Task task, const Args& args) {
  using namespace nmqrc;
  ExperimentConfig cfg = load_config(args.config);
  if (cfg.task != task) {
    throw ConfigError("task", "config declares '" + to_string(cfg.task) + "' but subcommand is '" + to_string(task) + "'");
  }
  if (args.scale == "quick") apply_scale(cfg, Scale::Quick);
  if (args.scale == "paper") apply_scale(cfg, Scale::Paper);
  if (args.seeds > 0) apply_seed_count(cfg, args.seeds);
  if (!args.out.empty()) cfg.output_dir = args.out;
  if (args.threads >= 0) cfg.threads = args.threads;
  cfg.validate();

  RunOptions opt;
  if (!args.quiet) opt.log = &std::cerr;
  const auto t0 = std::chrono::steady_clock::now();
  switch (task) {
    case Task::Stm: write_stm_outputs(cfg, run_stm(cfg, opt)); break;
    case Task::Narma: write_narma_outputs(cfg, run_narma(cfg, opt)); break;
    case Task::Esp: write_esp_outputs(cfg, run_esp(cfg, opt)); break;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!args.quiet) std::cerr << to_string(task) << " finished in " << secs << " s, results in " << cfg.output_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-Markovian quantum reservoir computing experiments"};
  app.require_subcommand(1);
  Args args;
  const std::map<std::string, nmqrc::Task> tasks{
      {"stm", nmqrc::Task::Stm}, {"narma", nmqrc::Task::Narma}, {"esp", nmqrc::Task::Esp}};
  const std::map<std::string, std::string> help{
      {"stm", "short-term memory sweep over delays"},
      {"narma", "NARMA-n prediction sweep over orders"},
      {"esp", "echo-state check from two initial states"}};
  for (const auto& [name, task] : tasks) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", args.config, "experiment config (JSON)")->required();
    sub->add_option("--scale", args.scale, "override run size")->check(CLI::IsMember({"quick", "paper"}));
    sub->add_option("--seeds", args.seeds, "use seeds 0..k-1")->check(CLI::PositiveNumber);
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--threads", args.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_flag("-q,--quiet", args.quiet, "no progress output");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run(tasks.at(name), args);
  } catch (const nmqrc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nmqrc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const nmqrc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
