#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maac/experiment.hpp"
#include "maac/verify.hpp"

namespace {

std::string output_root() {
  const char* root = std::getenv("MAAC_OUT");
  return root && *root ? root : ".";
}

int cmd_train(const std::string& config_path, std::uint64_t episodes, const std::string& resume_from) {
  maac::TrainConfig cfg = maac::load_config(config_path);
  maac::RunOptions opts;
  opts.episodes = episodes;
  opts.output_root = output_root();
  opts.resume_from = resume_from;
  maac::RunResult result = maac::run_training(cfg, opts);
  std::cout << "run dir    : " << result.run_dir.string() << "\n";
  std::cout << "metrics    : " << result.metrics_path.string() << "\n";
  std::cout << "checkpoint : " << result.checkpoint_path.string() << "\n";
  std::cout << "final eval : " << result.final_eval_return << "\n";
  std::cout << "costs      : epochs=" << result.costs.epochs << " rollouts=" << result.costs.rollouts_per_episode
            << " samples=" << result.costs.samples << " updates=" << result.costs.updates << "\n";
  return 0;
}

int cmd_verify(const std::vector<int>& which, int replicates) {
  bool all_pass = true;
  for (int prop : which) {
    maac::PropReport report;
    switch (prop) {
      case 1: report = maac::verify_prop1(replicates > 0 ? replicates : 100000); break;
      case 2: report = maac::verify_prop2(replicates > 0 ? replicates : 10000); break;
      case 3: report = maac::verify_prop3(); break;
      default: throw maac::UsageError("verify props: --which must be 1, 2, or 3");
    }
    std::cout << report.table << "  result: " << (report.passed ? "PASS" : "FAIL") << "\n\n";
    all_pass = all_pass && report.passed;
  }
  return all_pass ? 0 : 1;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& env_name, int turns, int samples,
             const std::string& dump_path) {
  maac::TrainingState state = maac::load_checkpoint(checkpoint_path);
  maac::TaskInstance task = std::filesystem::exists(env_name) && env_name.find('.') != std::string::npos
                                ? maac::load_task(env_name)
                                : maac::make_default_task(maac::parse_env_kind(env_name), turns);
  {
    auto probe = maac::make_env(task);
    for (int i = 0; i < probe->n_agents(); ++i)
      if (state.policies.at(static_cast<std::size_t>(i)).vocab.size != probe->vocab(i).size)
        throw maac::ValidationError("checkpoint vocab size does not match environment '" + env_name + "'");
  }

  std::ofstream dump;
  if (!dump_path.empty()) {
    dump.open(dump_path);
    if (!dump) throw maac::ConfigError("cannot write trajectory dump '" + dump_path + "'");
  }

  double total = 0.0;
  for (int s = 0; s < samples; ++s) {
    auto env = maac::make_env(task);
    maac::RngStream rng(maac::RngStream::mix(0xee0a1ull + static_cast<std::uint64_t>(s)));
    maac::EpisodeResult ep = maac::rollout_episode(*env, state.policies, static_cast<std::uint64_t>(s) * 7919ull, rng);
    total += ep.episode_return;
    if (dump.is_open()) maac::dump_trajectory(ep.buffer, dump);
  }
  std::cout << "episodes    : " << samples << "\n";
  std::cout << "mean return : " << total / samples << "\n";
  return 0;
}

int cmd_costs(const std::string& config_path) {
  maac::TrainConfig cfg = maac::load_config(config_path);
  maac::CostTable costs = maac::preview_costs(cfg);
  std::cout << "epochs rollouts samples updates\n";
  std::cout << costs.epochs << " " << costs.rollouts_per_episode << " " << costs.samples << " " << costs.updates
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale multi-agent RL over token-sequence policies"};
  app.require_subcommand(1);

  std::string config_path, resume_from, checkpoint_path, env_name, dump_path;
  std::uint64_t episodes = 64;
  std::vector<int> which;
  int replicates = 0, turns = 1, samples = 16;

  auto* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("config", config_path, "config file path")->required();
  train->add_option("--episodes", episodes, "number of training episodes");
  train->add_option("--resume", resume_from, "checkpoint to resume from");

  auto* verify = app.add_subcommand("verify", "Statistical verification harnesses");
  auto* props = verify->add_subcommand("props", "Verify Propositions 1-3");
  props->add_option("--which", which, "proposition numbers (1, 2, 3)")->required();
  props->add_option("--replicates", replicates, "override replicate count");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on an environment");
  eval->add_option("checkpoint", checkpoint_path, "checkpoint file")->required();
  eval->add_option("env", env_name, "environment name or task file")->required();
  eval->add_option("--turns", turns, "horizon for built-in environments");
  eval->add_option("--samples", samples, "evaluation episodes");
  eval->add_option("--dump", dump_path, "trajectory dump file (line-delimited records)");

  auto* costs = app.add_subcommand("costs", "Cost table preview for a config");
  costs->add_option("config", config_path, "config file path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config_path, episodes, resume_from);
    if (*props) return cmd_verify(which, replicates);
    if (*eval) return cmd_eval(checkpoint_path, env_name, turns, samples, dump_path);
    if (*costs) return cmd_costs(config_path);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
