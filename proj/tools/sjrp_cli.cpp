// Experiment runner: tune benchmarks, solve MDPs, train the networks, extract
// and evaluate policies, and emit comparison tables.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sjrp/cli.hpp"
#include "sjrp/parallel.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sjrp: stochastic joint replenishment workbench"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", checkpoint, policy_path, baseline;
  std::vector<std::string> policies;
  uint64_t seed_override = 0;
  int threads = 0;
  bool resume = false;

  app.add_option("--threads", threads, "worker threads (default: hardware)");

  auto add_common = [&](CLI::App* sub, bool needs_out = true) {
    sub->add_option("--config", config_path, "experiment config (json)")->required();
    if (needs_out) sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed_override, "override the evaluation seed");
  };

  CLI::App* bench = app.add_subcommand("bench", "tune and evaluate benchmark policies");
  add_common(bench);
  CLI::App* mdp = app.add_subcommand("mdp", "exact low-dimensional MDP solve");
  add_common(mdp);
  CLI::App* train = app.add_subcommand("train", "train the value/gradient networks");
  add_common(train);
  train->add_flag("--resume", resume, "continue from the saved checkpoint state");
  CLI::App* extract = app.add_subcommand("extract", "compute z* and write a policy file");
  add_common(extract, false);
  extract->add_option("--checkpoint", checkpoint, "trained H/G checkpoint")->required();
  std::string out_policy = "nn_policy.json";
  extract->add_option("--out", out_policy, "output policy file");
  CLI::App* eval = app.add_subcommand("eval", "simulate a saved policy");
  add_common(eval);
  eval->add_option("--policy", policy_path, "policy file")->required();
  CLI::App* compare = app.add_subcommand("compare", "gap table against a baseline");
  add_common(compare);
  compare->add_option("--baseline", baseline, "baseline policy file")->required();
  compare->add_option("--policy", policies, "policy files to compare")->required();
  CLI::App* validate = app.add_subcommand("validate1d", "1-D validation pipeline");
  add_common(validate);
  validate->add_flag("--resume", resume, "continue from the saved checkpoint state");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) sjrp::parallel::set_threads(threads);

  try {
    sjrp::cli::ExperimentConfig cfg = sjrp::cli::load_config(config_path);
    if (seed_override != 0) cfg.evaluation.seed = seed_override;
    if (bench->parsed()) return sjrp::cli::cmd_bench(cfg, config_path, out_dir);
    if (mdp->parsed()) return sjrp::cli::cmd_mdp(cfg, config_path, out_dir);
    if (train->parsed()) return sjrp::cli::cmd_train(cfg, config_path, out_dir, resume);
    if (extract->parsed())
      return sjrp::cli::cmd_extract(cfg, config_path, checkpoint, out_policy);
    if (eval->parsed()) return sjrp::cli::cmd_eval(cfg, config_path, policy_path, out_dir);
    if (compare->parsed())
      return sjrp::cli::cmd_compare(cfg, config_path, baseline, policies, out_dir);
    if (validate->parsed())
      return sjrp::cli::cmd_validate1d(cfg, config_path, out_dir, resume);
  } catch (const sjrp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return sjrp::cli::kExitConfig;
  } catch (const sjrp::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return sjrp::cli::kExitNumeric;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    if (what.find("cannot open") != std::string::npos) {
      std::fprintf(stderr, "missing file: %s\n", e.what());
      return sjrp::cli::kExitMissingFile;
    }
    std::fprintf(stderr, "error: %s\n", e.what());
    return sjrp::cli::kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return sjrp::cli::kExitNumeric;
  }
  return sjrp::cli::kExitUsage;
}
