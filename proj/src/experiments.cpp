#include "ofa/experiments.hpp"

#include "ofa/digest.hpp"
#include "ofa/errors.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace ofa {

namespace fs = std::filesystem;
using nlohmann::json;

WorkerPool::WorkerPool(int workers) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers_ = std::max(1, workers);
}

void WorkerPool::run(const std::vector<std::function<void()>>& jobs) const {
  if (jobs.empty()) return;
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  const int n = std::min<int>(workers_, static_cast<int>(jobs.size()));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    threads.emplace_back([&, t] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          jobs[i]();
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

std::string episode_dir_name(int index, const std::string& hand) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "ep%04d_%s", index, hand.c_str());
  return buf;
}

}  // namespace

GenDemosResult generate_demos(const SimConfig& config, const std::string& task, int count,
                              std::uint64_t seed, const std::string& out_dir,
                              const std::string& config_digest, const WorkerPool& pool) {
  const TaskSpec& spec = config.task(task);
  fs::create_directories(out_dir);

  struct Slot {
    bool ok = false;
    std::vector<DatasetIndexEntry> entries;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(count));

  std::vector<std::function<void()>> jobs;
  for (int i = 0; i < count; ++i) {
    jobs.push_back([&, i] {
      constexpr int kMaxAttempts = 8;
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const std::uint64_t scene_seed =
            derive_seed(seed, static_cast<std::uint64_t>(i) * 1000 + attempt);
        SceneConfig scene_config;
        scene_config.task = task;
        scene_config.seed = scene_seed;
        const Scene scene = build_scene(config, scene_config);
        const ExpertResult expert = scripted_expert(config, scene, scene_seed);
        if (!expert.success) continue;

        Slot slot;
        slot.ok = true;
        for (const auto& episode : expert.episodes) {
          const std::string dir = episode_dir_name(i, episode.meta.hand);
          const std::string digest =
              save_episode((fs::path(out_dir) / dir).string(), episode);
          slot.entries.push_back({dir, task, episode.meta.hand,
                                  episode.meta.steps.size(), digest});
        }
        slots[static_cast<std::size_t>(i)] = std::move(slot);
        return;
      }
    });
  }
  pool.run(jobs);

  GenDemosResult result;
  result.requested = count;
  result.index.seed = seed;
  result.index.config_digest = config_digest;
  for (const auto& slot : slots) {
    if (!slot.ok) continue;
    ++result.generated;
    for (const auto& e : slot.entries) result.index.episodes.push_back(e);
  }
  write_dataset_index(out_dir, result.index);
  (void)spec;
  return result;
}

TrainResult train_from_dataset(const SimConfig& sim, PolicyConfig policy_config,
                               const std::string& data_root, const std::string& hand,
                               int max_episodes) {
  std::vector<EpisodeMeta> episodes = load_episodes(data_root, hand);
  if (max_episodes >= 0 && static_cast<int>(episodes.size()) > max_episodes) {
    episodes.resize(static_cast<std::size_t>(max_episodes));
  }
  if (episodes.empty()) throw DataError("train_from_dataset: no episodes under " + data_root);

  CropOptions crop = sim.crop;
  crop.crop_size = policy_config.crop_size;
  EncodingOptions encoding{policy_config.relative, policy_config.hand_focus};
  const BuildResult built =
      build_samples(episodes, policy_config.k, sim.rig, sim.robot, crop, encoding);
  if (built.skipped > 0) {
    std::cerr << "train_from_dataset: skipped " << built.skipped
              << " steps with no visible hand\n";
  }
  return train_policy(policy_config, built.samples);
}

EvalSummary evaluate_policy(const SimConfig& config, const std::string& task,
                            const std::vector<const PolicyParams*>& policies,
                            const EvalOptions& options, const WorkerPool& pool) {
  EvalSummary summary;
  summary.episodes = options.episodes;
  summary.rows.resize(static_cast<std::size_t>(options.episodes));

  std::vector<std::function<void()>> jobs;
  for (int i = 0; i < options.episodes; ++i) {
    jobs.push_back([&, i] {
      const std::uint64_t rollout_seed = derive_seed(options.seed, static_cast<std::uint64_t>(i));
      SceneConfig scene_config;
      scene_config.task = task;
      scene_config.seed = rollout_seed;
      scene_config.placement_offset = options.placement_offset;
      scene_config.background = options.background;
      const Scene scene = build_scene(config, scene_config);

      RolloutOptions rollout;
      rollout.max_steps = options.max_steps;
      rollout.seed = rollout_seed;
      if (!options.log_root.empty()) {
        rollout.log_dir =
            (fs::path(options.log_root) / ("rollout" + std::to_string(i))).string();
      }
      const RolloutResult r = execute_rollout(config, scene, policies, rollout);

      RolloutRow row;
      row.task = task;
      row.variant = options.variant_label.empty() ? task : options.variant_label;
      row.seed = rollout_seed;
      row.success = r.success;
      row.failure = r.failure;
      row.steps = r.steps;
      summary.rows[static_cast<std::size_t>(i)] = row;
    });
  }
  pool.run(jobs);

  for (const auto& row : summary.rows) summary.successes += row.success ? 1 : 0;
  return summary;
}

void write_rollout_rows_csv(const std::string& path, const std::vector<RolloutRow>& rows,
                            const std::string& config_digest, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw DataError("write_rollout_rows_csv: cannot open " + path);
  out << "# config_digest=" << config_digest << " seed=" << seed << "\n";
  out << "task,variant,seed,success,failure_reason,steps\n";
  for (const auto& r : rows) {
    out << r.task << "," << r.variant << "," << r.seed << "," << (r.success ? 1 : 0) << ","
        << failure_to_string(r.failure) << "," << r.steps << "\n";
  }
}

const std::vector<MethodSpec>& study_methods() {
  static const std::vector<MethodSpec> methods = {
      {"ofa", true, true, true},
      {"ofa_wo_rel", false, true, true},
      {"ofa_wo_of", true, false, true},
      {"ofa_wo_rel_of", false, false, true},
      {"act", false, false, false},
  };
  return methods;
}

namespace {

// ---------------------------------------------------------------------------
// Reproduction studies
// ---------------------------------------------------------------------------

struct StudyContext {
  const RunConfig* run;
  SimConfig sim;
  std::string out_dir;
  std::uint64_t seed;
  WorkerPool pool{0};
  std::vector<RolloutRow> all_rows;
  std::map<std::string, double> rates;  // task|method|demos|variant -> %

  int demos_per_task = 30;
  int eval_rollouts = 20;
  int eval_max_steps = 80;
  std::vector<std::string> tasks;
  std::vector<std::string> single_hand_tasks;
  std::string small_object_task;
  Vec3 fig5a_offset = Vec3::Zero();
  std::vector<std::string> fig5b_backgrounds;
  std::vector<int> table2_demo_counts;
  bool table2_include_bimanual = true;

  PolicyConfig base_policy;

  // caches
  std::map<std::string, std::string> dataset_dirs;                 // task -> dir
  std::map<std::string, std::vector<EpisodeMeta>> episodes_cache;  // task|hand
  // per (task|hand|of|crop): images in episode/step order plus the index map
  struct ImageCache {
    std::vector<std::pair<Image, Image>> images;
    std::vector<std::pair<std::size_t, std::size_t>> origin;  // (episode, step)
  };
  std::map<std::string, ImageCache> image_cache;
  // trained policies: key task|method|hand|demos
  std::map<std::string, PolicyParams> trained;
};

std::string cache_key(const std::string& task, const std::string& hand, bool hand_focus,
                      int crop) {
  std::ostringstream os;
  os << task << "|" << hand << "|" << (hand_focus ? "of" : "full") << "|" << crop;
  return os.str();
}

const std::vector<EpisodeMeta>& episodes_for(StudyContext& ctx, const std::string& task,
                                             const std::string& hand) {
  const std::string key = task + "|" + hand;
  auto it = ctx.episodes_cache.find(key);
  if (it != ctx.episodes_cache.end()) return it->second;
  auto episodes = load_episodes(ctx.dataset_dirs.at(task), hand);
  return ctx.episodes_cache.emplace(key, std::move(episodes)).first->second;
}

const StudyContext::ImageCache& images_for(StudyContext& ctx, const std::string& task,
                                           const std::string& hand, bool hand_focus,
                                           int crop_size) {
  const std::string key = cache_key(task, hand, hand_focus, crop_size);
  auto it = ctx.image_cache.find(key);
  if (it != ctx.image_cache.end()) return it->second;

  const auto& episodes = episodes_for(ctx, task, hand);
  StudyContext::ImageCache cache;
  CropOptions crop = ctx.sim.crop;
  crop.crop_size = crop_size;

  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& episode = episodes[e];
    for (std::size_t t = 0; t < episode.steps.size(); ++t) {
      const Image left = load_frame(episode.dir, t, true);
      const Image right = load_frame(episode.dir, t, false);
      std::pair<Image, Image> pair;
      if (hand_focus) {
        auto focus = extract_hand_focus(ctx.sim.rig, ctx.sim.robot,
                                        episode.steps[t].wrist_pose,
                                        episode.steps[t].hand_joints, left, right, crop);
        pair = {std::move(focus.left_crop), std::move(focus.right_crop)};
      } else {
        pair = {bilinear_resize(left, 0, 0, left.width - 1, left.height - 1, crop.crop_size,
                                crop.crop_size),
                bilinear_resize(right, 0, 0, right.width - 1, right.height - 1,
                                crop.crop_size, crop.crop_size)};
      }
      cache.images.push_back(std::move(pair));
      cache.origin.emplace_back(e, t);
    }
  }
  return ctx.image_cache.emplace(key, std::move(cache)).first->second;
}

std::vector<TrainingSample> assemble_samples(StudyContext& ctx, const std::string& task,
                                             const std::string& hand,
                                             const PolicyConfig& policy, int max_episodes) {
  const auto& episodes = episodes_for(ctx, task, hand);
  const auto& cache = images_for(ctx, task, hand, policy.hand_focus, policy.crop_size);

  std::vector<TrainingSample> samples;
  for (std::size_t i = 0; i < cache.images.size(); ++i) {
    const auto [e, t] = cache.origin[i];
    if (max_episodes >= 0 && e >= static_cast<std::size_t>(max_episodes)) continue;
    const auto& episode = episodes[e];
    TrainingSample s;
    s.left = cache.images[i].first;
    s.right = cache.images[i].second;
    s.proprio = policy.relative
                    ? encode_relative_proprio(episode.steps[t], episode.pre_manip_pose)
                    : encode_absolute_proprio(episode.steps[t]);
    s.chunk = policy.relative ? encode_relative_chunk(episode, t, policy.k)
                              : encode_absolute_chunk(episode, t, policy.k);
    samples.push_back(std::move(s));
  }
  return samples;
}

PolicyConfig method_policy(const StudyContext& ctx, const MethodSpec& method,
                           std::uint64_t seed) {
  PolicyConfig cfg = ctx.base_policy;
  cfg.relative = method.relative;
  cfg.hand_focus = method.hand_focus;
  cfg.arrival = method.arrival;
  cfg.seed = seed;
  return cfg;
}

std::string trained_key(const std::string& task, const std::string& method,
                        const std::string& hand, int demos) {
  std::ostringstream os;
  os << task << "|" << method << "|" << hand << "|" << demos;
  return os.str();
}

/// Trains (or reuses) the policies a (task, method, demo-count) needs.
/// Returns pointers in arm order (right[, left]).
std::vector<const PolicyParams*> policies_for(StudyContext& ctx, const std::string& task,
                                              const MethodSpec& method, int demos) {
  const bool bimanual = ctx.sim.task(task).bimanual();
  const std::vector<std::string> hands =
      bimanual ? std::vector<std::string>{"right", "left"} : std::vector<std::string>{"right"};

  // Assemble the jobs that still need training, then run them in parallel.
  std::vector<std::function<void()>> jobs;
  for (const auto& hand : hands) {
    const std::string key = trained_key(task, method.name, hand, demos);
    if (ctx.trained.count(key)) continue;
    // Materialize samples on the main thread (the image cache is shared),
    // train in the pool.
    const std::uint64_t train_seed = derive_seed(ctx.seed, stable_hash64(key));
    const PolicyConfig cfg = method_policy(ctx, method, train_seed);
    auto samples = std::make_shared<std::vector<TrainingSample>>(
        assemble_samples(ctx, task, hand, cfg, demos));
    ctx.trained.emplace(key, PolicyParams{});
    jobs.push_back([&ctx, key, cfg, samples] {
      TrainResult result = train_policy(cfg, *samples);
      ctx.trained[key] = std::move(result.params);
    });
  }
  ctx.pool.run(jobs);

  std::vector<const PolicyParams*> out;
  for (const auto& hand : hands) {
    out.push_back(&ctx.trained.at(trained_key(task, method.name, hand, demos)));
  }
  return out;
}

double eval_rate(StudyContext& ctx, const std::string& task, const MethodSpec& method,
                 int demos, const EvalOptions& base_options) {
  std::ostringstream label;
  label << method.name << "|demos=" << demos << "|" << base_options.variant_label;
  const std::string key = task + "|" + label.str();
  const auto cached = ctx.rates.find(key);
  if (cached != ctx.rates.end()) return cached->second;

  const auto policies = policies_for(ctx, task, method, demos);
  EvalOptions options = base_options;
  options.variant_label = label.str();
  options.seed = derive_seed(ctx.seed, stable_hash64(key));
  const EvalSummary summary = evaluate_policy(ctx.sim, task, policies, options, ctx.pool);
  ctx.all_rows.insert(ctx.all_rows.end(), summary.rows.begin(), summary.rows.end());
  ctx.rates[key] = summary.rate();
  return summary.rate();
}

void ensure_datasets(StudyContext& ctx) {
  for (const auto& task : ctx.tasks) {
    const std::string dir = (fs::path(ctx.out_dir) / "datasets" / task).string();
    ctx.dataset_dirs[task] = dir;
    if (fs::exists(fs::path(dir) / "index.json")) continue;
    std::cout << "[reproduce] generating " << ctx.demos_per_task << " demos for " << task
              << "\n";
    const auto result =
        generate_demos(ctx.sim, task, ctx.demos_per_task,
                       derive_seed(ctx.seed, stable_hash64(task)), dir,
                       ctx.run->digest, ctx.pool);
    if (result.generated < result.requested) {
      std::cout << "[reproduce] warning: only " << result.generated << "/" << result.requested
                << " scenes produced demos for " << task << "\n";
    }
  }
}

void write_markdown_table(std::ofstream& out, const std::string& title,
                          const std::vector<std::string>& cols,
                          const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  out << "## " << title << "\n\n| Task |";
  for (const auto& c : cols) out << " " << c << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
  out << "\n";
  for (const auto& [name, values] : rows) {
    out << "| " << name << " |";
    char buf[32];
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), " %.0f |", v);
      out << buf;
    }
    out << "\n";
  }
  out << "\n";
}

int study_table1(StudyContext& ctx) {
  ensure_datasets(ctx);
  const auto& methods = study_methods();

  std::ofstream csv((fs::path(ctx.out_dir) / "table1.csv").string());
  csv << "task,method,rate\n";
  std::vector<std::pair<std::string, std::vector<double>>> rows;

  for (const auto& task : ctx.tasks) {
    std::vector<double> rates;
    for (const auto& method : methods) {
      EvalOptions options;
      options.episodes = ctx.eval_rollouts;
      options.max_steps = ctx.eval_max_steps;
      options.variant_label = "in-dist";
      const double rate = eval_rate(ctx, task, method, ctx.demos_per_task, options);
      rates.push_back(rate);
      csv << task << "," << method.name << "," << rate << "\n";
      std::cout << "[table1] " << task << " / " << method.name << ": " << rate << "%\n";
    }
    rows.emplace_back(task, rates);
  }

  std::ofstream md((fs::path(ctx.out_dir) / "table1.md").string());
  std::vector<std::string> cols;
  for (const auto& m : methods) cols.push_back(m.name);
  write_markdown_table(md, "Success rate (%), " + std::to_string(ctx.demos_per_task) +
                               " demonstrations, " + std::to_string(ctx.eval_rollouts) +
                               " evaluations",
                       cols, rows);
  return 0;
}

int study_fig5a(StudyContext& ctx) {
  ensure_datasets(ctx);
  const std::vector<MethodSpec> methods = {study_methods()[0], study_methods()[1]};

  std::ofstream csv((fs::path(ctx.out_dir) / "fig5a.csv").string());
  csv << "task,method,condition,rate\n";
  std::vector<std::pair<std::string, std::vector<double>>> rows;

  for (const auto& task : ctx.single_hand_tasks) {
    std::vector<double> rates;
    for (const auto& method : methods) {
      EvalOptions in_dist;
      in_dist.episodes = ctx.eval_rollouts;
      in_dist.max_steps = ctx.eval_max_steps;
      in_dist.variant_label = "in-dist";
      const double in_rate = eval_rate(ctx, task, method, ctx.demos_per_task, in_dist);

      EvalOptions shifted = in_dist;
      shifted.placement_offset = ctx.fig5a_offset;
      shifted.variant_label = "offset";
      const double out_rate = eval_rate(ctx, task, method, ctx.demos_per_task, shifted);

      rates.push_back(in_rate);
      rates.push_back(out_rate);
      csv << task << "," << method.name << ",in-dist," << in_rate << "\n";
      csv << task << "," << method.name << ",offset," << out_rate << "\n";
      std::cout << "[fig5a] " << task << " / " << method.name << ": " << in_rate << "% -> "
                << out_rate << "%\n";
    }
    rows.emplace_back(task, rates);
  }

  std::ofstream md((fs::path(ctx.out_dir) / "fig5a.md").string());
  write_markdown_table(md, "Positional generalization (placements fully outside the training rectangle)",
                       {"ofa in-dist", "ofa offset", "ofa_wo_rel in-dist", "ofa_wo_rel offset"},
                       rows);
  return 0;
}

int study_fig5b(StudyContext& ctx) {
  ensure_datasets(ctx);
  const std::vector<MethodSpec> methods = {study_methods()[0], study_methods()[2]};

  std::ofstream csv((fs::path(ctx.out_dir) / "fig5b.csv").string());
  csv << "task,method,background,rate\n";
  std::vector<std::pair<std::string, std::vector<double>>> rows;

  for (const auto& task : ctx.single_hand_tasks) {
    std::vector<double> rates;
    for (const auto& method : methods) {
      EvalOptions plain;
      plain.episodes = ctx.eval_rollouts;
      plain.max_steps = ctx.eval_max_steps;
      plain.variant_label = "plain";
      const double base_rate = eval_rate(ctx, task, method, ctx.demos_per_task, plain);
      rates.push_back(base_rate);
      csv << task << "," << method.name << ",plain," << base_rate << "\n";

      for (const auto& bg : ctx.fig5b_backgrounds) {
        EvalOptions varied = plain;
        varied.background.id = background_from_string(bg);
        varied.variant_label = bg;
        const double rate = eval_rate(ctx, task, method, ctx.demos_per_task, varied);
        rates.push_back(rate);
        csv << task << "," << method.name << "," << bg << "," << rate << "\n";
        std::cout << "[fig5b] " << task << " / " << method.name << " / " << bg << ": " << rate
                  << "%\n";
      }
    }
    rows.emplace_back(task, rates);
  }

  std::ofstream md((fs::path(ctx.out_dir) / "fig5b.md").string());
  write_markdown_table(md, "Background variation", {"ofa plain", "ofa bg1", "ofa bg2",
                       "ofa_wo_of plain", "ofa_wo_of bg1", "ofa_wo_of bg2"}, rows);
  return 0;
}

int study_table2(StudyContext& ctx) {
  ensure_datasets(ctx);
  const std::vector<MethodSpec> methods = {study_methods()[4], study_methods()[0]};  // act, ofa

  std::ofstream csv((fs::path(ctx.out_dir) / "table2.csv").string());
  csv << "task,method,demos,rate\n";
  std::vector<std::pair<std::string, std::vector<double>>> rows;

  for (const auto& task : ctx.single_hand_tasks) {
    std::vector<double> rates;
    for (int demos : ctx.table2_demo_counts) {
      for (const auto& method : methods) {
        EvalOptions options;
        options.episodes = ctx.eval_rollouts;
        options.max_steps = ctx.eval_max_steps;
        options.variant_label = "in-dist";
        const double rate = eval_rate(ctx, task, method, demos, options);
        rates.push_back(rate);
        csv << task << "," << method.name << "," << demos << "," << rate << "\n";
        std::cout << "[table2] " << task << " / " << method.name << " @" << demos << ": "
                  << rate << "%\n";
      }
    }
    rows.emplace_back(task, rates);
  }

  if (ctx.table2_include_bimanual) {
    // Headline data-efficiency comparison on the bimanual template: the
    // full-method policy from 10 demonstrations against the baseline with 30.
    for (const auto& task : ctx.tasks) {
      if (!ctx.sim.task(task).bimanual()) continue;
      EvalOptions options;
      options.episodes = ctx.eval_rollouts;
      options.max_steps = ctx.eval_max_steps;
      options.variant_label = "in-dist";
      const double ofa10 = eval_rate(ctx, task, study_methods()[0], 10, options);
      const double act30 = eval_rate(ctx, task, study_methods()[4], ctx.demos_per_task, options);
      csv << task << ",ofa,10," << ofa10 << "\n";
      csv << task << ",act," << ctx.demos_per_task << "," << act30 << "\n";
      std::cout << "[table2] " << task << " / ofa @10: " << ofa10 << "%, act @"
                << ctx.demos_per_task << ": " << act30 << "%\n";
    }
  }

  std::ofstream md((fs::path(ctx.out_dir) / "table2.md").string());
  std::vector<std::string> cols;
  for (int demos : ctx.table2_demo_counts) {
    cols.push_back("act @" + std::to_string(demos));
    cols.push_back("ofa @" + std::to_string(demos));
  }
  write_markdown_table(md, "Demonstration-count sensitivity", cols, rows);
  return 0;
}

}  // namespace

int run_reproduce(const RunConfig& run_config, const std::string& experiment,
                  std::uint64_t seed, const std::string& out_dir, int workers_flag,
                  std::map<std::string, double>* rates_out) {
  StudyContext ctx;
  ctx.run = &run_config;
  ctx.sim = run_config.sim();
  ctx.out_dir = out_dir;
  ctx.seed = seed;

  const auto& rep = run_config.tree.at("reproduce");
  ctx.demos_per_task = rep.at("demos_per_task").get<int>();
  ctx.eval_rollouts = rep.at("eval_rollouts").get<int>();
  ctx.eval_max_steps = rep.at("eval_max_steps").get<int>();
  ctx.tasks = rep.at("tasks").get<std::vector<std::string>>();
  ctx.single_hand_tasks = rep.at("single_hand_tasks").get<std::vector<std::string>>();
  ctx.small_object_task = rep.at("small_object_task").get<std::string>();
  const auto& offset = rep.at("fig5a_offset");
  ctx.fig5a_offset = Vec3(offset.at(0).get<double>(), offset.at(1).get<double>(), 0.0);
  ctx.fig5b_backgrounds = rep.at("fig5b_backgrounds").get<std::vector<std::string>>();
  ctx.table2_demo_counts = rep.at("table2_demo_counts").get<std::vector<int>>();

  const int workers = workers_flag > 0 ? workers_flag : rep.at("workers").get<int>();
  ctx.pool = WorkerPool(workers);

  // Base policy: defaults overlaid with the study-scale settings.
  json policy_tree = run_config.tree.at("policy");
  for (const auto& [key, value] : rep.at("policy_overrides").items()) {
    if (!policy_tree.contains(key)) throw ConfigError("reproduce: unknown policy key " + key);
    policy_tree[key] = value;
  }
  RunConfig policy_view = run_config;
  policy_view.tree["policy"] = policy_tree;
  ctx.base_policy = policy_view.policy();

  fs::create_directories(out_dir);

  int rc = 0;
  if (experiment == "table1") {
    rc = study_table1(ctx);
  } else if (experiment == "fig5a") {
    rc = study_fig5a(ctx);
  } else if (experiment == "fig5b") {
    rc = study_fig5b(ctx);
  } else if (experiment == "table2") {
    rc = study_table2(ctx);
  } else if (experiment == "all") {
    // One shared context: later studies reuse the policies and in-dist
    // evaluations of earlier ones.
    rc = study_table1(ctx);
    if (rc == 0) rc = study_fig5a(ctx);
    if (rc == 0) rc = study_fig5b(ctx);
    if (rc == 0) rc = study_table2(ctx);
  } else {
    throw ConfigError("unknown experiment '" + experiment +
                      "' (expected table1|fig5a|fig5b|table2|all)");
  }

  write_rollout_rows_csv((fs::path(out_dir) / "results.csv").string(), ctx.all_rows,
                         run_config.digest, seed);
  if (rates_out) *rates_out = ctx.rates;
  return rc;
}

}  // namespace ofa
