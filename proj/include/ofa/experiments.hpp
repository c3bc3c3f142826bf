#pragma once

#include "ofa/config.hpp"
#include "ofa/env.hpp"
#include "ofa/policy.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace ofa {

/// Fixed-size pool; jobs are independent and write to caller-owned slots,
/// so the worker count never changes any result.
class WorkerPool {
 public:
  explicit WorkerPool(int workers);
  void run(const std::vector<std::function<void()>>& jobs) const;
  int workers() const { return workers_; }

 private:
  int workers_;
};

struct GenDemosResult {
  int requested = 0;
  int generated = 0;  // scenes that produced validated episodes
  DatasetIndex index;
};

/// Generates `count` validated demonstration scenes (bimanual tasks emit one
/// episode per hand and scene). Deterministic per (seed, episode index);
/// scenes the oracle cannot solve are retried with fresh seeds, up to a cap.
GenDemosResult generate_demos(const SimConfig& config, const std::string& task, int count,
                              std::uint64_t seed, const std::string& out_dir,
                              const std::string& config_digest, const WorkerPool& pool);

/// Loads a dataset (optionally the first `max_episodes` only), builds
/// samples in the policy's encoding and trains.
TrainResult train_from_dataset(const SimConfig& sim, PolicyConfig policy_config,
                               const std::string& data_root, const std::string& hand,
                               int max_episodes = -1);

struct EvalOptions {
  int episodes = 10;
  int max_steps = 150;
  Vec3 placement_offset = Vec3::Zero();
  BackgroundSpec background;
  std::uint64_t seed = 0;
  std::string variant_label;  // recorded in the result rows
  std::string log_root;       // optional per-rollout logs
};

struct RolloutRow {
  std::string task;
  std::string variant;
  std::uint64_t seed = 0;
  bool success = false;
  FailureReason failure = FailureReason::None;
  int steps = 0;
};

struct EvalSummary {
  int successes = 0;
  int episodes = 0;
  std::vector<RolloutRow> rows;

  double rate() const { return episodes ? 100.0 * successes / episodes : 0.0; }
};

EvalSummary evaluate_policy(const SimConfig& config, const std::string& task,
                            const std::vector<const PolicyParams*>& policies,
                            const EvalOptions& options, const WorkerPool& pool);

void write_rollout_rows_csv(const std::string& path, const std::vector<RolloutRow>& rows,
                            const std::string& config_digest, std::uint64_t seed);

/// The five method variants of the study.
struct MethodSpec {
  std::string name;  // "ofa", "ofa_wo_rel", "ofa_wo_of", "ofa_wo_rel_of", "act"
  bool relative = true;
  bool hand_focus = true;
  bool arrival = true;
};
const std::vector<MethodSpec>& study_methods();

/// Runs one of the reproduction studies end to end (datasets, training,
/// evaluation, reports). `experiment` is table1|fig5a|fig5b|table2|all; the
/// "all" mode shares trained policies and evaluations across studies.
/// `rates_out`, when given, receives "task|method|demos=N|variant" -> %.
/// Returns 0, or nonzero on infrastructure failure.
int run_reproduce(const RunConfig& run_config, const std::string& experiment,
                  std::uint64_t seed, const std::string& out_dir, int workers_flag,
                  std::map<std::string, double>* rates_out = nullptr);

}  // namespace ofa
