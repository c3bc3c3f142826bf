#include "CLI11.hpp"

#include "ofa/config.hpp"
#include "ofa/digest.hpp"
#include "ofa/env.hpp"
#include "ofa/errors.hpp"
#include "ofa/experiments.hpp"
#include "ofa/policy.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace ofa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInfra = 4;

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct CommonArgs {
  std::string config_path = "configs/default.json";
  std::vector<std::string> overlays;
  std::vector<std::string> sets;

  RunConfig load() const { return load_run_config(config_path, overlays, sets); }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Base configuration file")
      ->capture_default_str();
  cmd->add_option("--overlay", args.overlays, "Additional config files merged over the base");
  cmd->add_option("--set", args.sets, "Override a config value: key.path=value");
}

int cmd_gen_demos(const CommonArgs& common, const std::string& task, int count,
                  std::uint64_t seed, const std::string& out_dir, int workers) {
  const RunConfig run = common.load();
  const SimConfig sim = run.sim();
  const WorkerPool pool(workers);
  const auto result = generate_demos(sim, task, count, seed, out_dir, run.digest, pool);
  std::cout << "generated " << result.generated << "/" << result.requested
            << " demonstration scenes (" << result.index.episodes.size() << " episodes, "
            << result.index.total_steps() << " steps) under " << out_dir << "\n";
  if (result.generated < result.requested) {
    std::cerr << "gen-demos: some scenes were unsolvable; dataset is partial\n";
    return kExitData;
  }
  return kExitOk;
}

int cmd_train(const CommonArgs& common, const std::string& data_root, const std::string& out,
              const std::string& hand, int max_episodes) {
  const RunConfig run = common.load();
  const SimConfig sim = run.sim();
  const PolicyConfig policy_config = run.policy();

  const TrainResult result = train_from_dataset(sim, policy_config, data_root, hand,
                                                max_episodes);
  save_policy(out, result.params);
  write_loss_curve_csv(out + ".loss.csv", result.curve);

  nlohmann::json meta{{"config_digest", run.digest},
                      {"data", data_root},
                      {"hand", hand},
                      {"final_loss", result.curve.empty() ? 0.0 : result.curve.back().total},
                      {"created", timestamp_now()}};
  std::ofstream mf(out + ".meta.json");
  mf << meta.dump(2) << "\n";

  std::cout << "trained " << result.params.values.size() << " parameters; final loss "
            << (result.curve.empty() ? 0.0 : result.curve.back().total) << "; saved to "
            << out << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& common, const std::vector<std::string>& params_paths,
             const std::string& task, int episodes, const std::vector<double>& offset,
             const std::string& background, std::uint64_t seed, const std::string& out_dir,
             int workers, const std::string& log_root) {
  const RunConfig run = common.load();
  const SimConfig sim = run.sim();

  std::vector<PolicyParams> loaded;
  for (const auto& p : params_paths) loaded.push_back(load_policy(p));
  std::vector<const PolicyParams*> policies;
  for (const auto& p : loaded) policies.push_back(&p);

  EvalOptions options;
  options.episodes = episodes;
  options.max_steps = run.tree.at("eval").at("max_steps").get<int>();
  if (offset.size() == 2) options.placement_offset = Vec3(offset[0], offset[1], 0.0);
  options.background.id = background_from_string(background);
  options.seed = seed;
  options.variant_label = background + (offset.size() == 2 ? "+offset" : "");
  options.log_root = log_root;

  const WorkerPool pool(workers);
  const EvalSummary summary = evaluate_policy(sim, task, policies, options, pool);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_rollout_rows_csv((fs::path(out_dir) / "results.csv").string(), summary.rows,
                           run.digest, seed);
  }
  std::cout << "success rate: " << summary.successes << "/" << summary.episodes << " ("
            << summary.rate() << "%)\n";
  return kExitOk;  // reporting tool: the rate is data, not an error
}

int cmd_reproduce_main(const CommonArgs& common, const std::string& experiment,
                       std::uint64_t seed, const std::string& out_dir, int workers) {
  const RunConfig run = common.load();
  return run_reproduce(run, experiment, seed, out_dir, workers);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-focus manipulation pipeline: demonstrations, training, evaluation"};
  app.require_subcommand(1);

  CommonArgs common;

  // gen-demos
  auto* gen = app.add_subcommand("gen-demos", "Generate scripted demonstrations");
  std::string gen_task;
  int gen_count = 10;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "out/demos";
  int gen_workers = 0;
  add_common(gen, common);
  gen->add_option("--task", gen_task, "Task name")->required();
  gen->add_option("--count", gen_count, "Number of demonstration scenes")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Master seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset directory")->capture_default_str();
  gen->add_option("--workers", gen_workers, "Worker threads (0 = hardware)");

  // train
  auto* train = app.add_subcommand("train", "Train a policy from a dataset");
  std::string train_data, train_out = "out/policy.bin", train_hand = "right";
  int train_max_episodes = -1;
  add_common(train, common);
  train->add_option("--data", train_data, "Dataset root (index.json)")->required();
  train->add_option("--out", train_out, "Output parameter file")->capture_default_str();
  train->add_option("--hand", train_hand, "Episode hand filter")->capture_default_str();
  train->add_option("--max-episodes", train_max_episodes, "Use only the first N episodes");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate trained parameters");
  std::vector<std::string> eval_params;
  std::string eval_task, eval_background = "plain", eval_out, eval_logs;
  int eval_episodes = 10, eval_workers = 0;
  std::vector<double> eval_offset;
  std::uint64_t eval_seed = 1;
  add_common(eval, common);
  eval->add_option("--params", eval_params,
                   "Parameter file(s); bimanual tasks take right,left")
      ->required();
  eval->add_option("--task", eval_task, "Task name")->required();
  eval->add_option("--episodes", eval_episodes, "Evaluation rollouts")->capture_default_str();
  eval->add_option("--position-offset", eval_offset,
                   "dx dy added to every placement (meters)")
      ->expected(2);
  eval->add_option("--background", eval_background,
                   "plain|checker|textured-1|textured-2")
      ->capture_default_str();
  eval->add_option("--seed", eval_seed, "Master seed")->capture_default_str();
  eval->add_option("--out", eval_out, "Directory for results.csv");
  eval->add_option("--log-dir", eval_logs, "Directory for per-rollout logs");
  eval->add_option("--workers", eval_workers, "Worker threads (0 = hardware)");

  // reproduce
  auto* rep = app.add_subcommand("reproduce", "Run a full study matrix");
  std::string rep_experiment, rep_out = "out/reproduce";
  std::uint64_t rep_seed = 1;
  int rep_workers = 0;
  add_common(rep, common);
  rep->add_option("--experiment", rep_experiment, "table1|fig5a|fig5b|table2|all")->required();
  rep->add_option("--seed", rep_seed, "Master seed")->capture_default_str();
  rep->add_option("--out", rep_out, "Output directory")->capture_default_str();
  rep->add_option("--workers", rep_workers, "Worker threads (0 = config/hardware)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_gen_demos(common, gen_task, gen_count, gen_seed, gen_out, gen_workers);
    }
    if (train->parsed()) {
      return cmd_train(common, train_data, train_out, train_hand, train_max_episodes);
    }
    if (eval->parsed()) {
      return cmd_eval(common, eval_params, eval_task, eval_episodes, eval_offset,
                      eval_background, eval_seed, eval_out, eval_workers, eval_logs);
    }
    if (rep->parsed()) {
      return cmd_reproduce_main(common, rep_experiment, rep_seed, rep_out, rep_workers);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfra;
  }
  return kExitOk;
}
