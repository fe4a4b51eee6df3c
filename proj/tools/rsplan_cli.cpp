#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rsplan/bench.hpp"
#include "rsplan/geometry.hpp"
#include "rsplan/training.hpp"

namespace {

using namespace rsplan;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
}

struct GenEnvArgs {
  double arena = 100.0, trap = 40.0, wall = 2.0, tunnel = 4.0;
  std::string side = "left";
  std::vector<double> center;
  std::string preset;
  std::string name = "flytrap";
  std::string out = "env.json";
};

int cmd_gen_env(const GenEnvArgs& a) {
  FlytrapParams p;
  if (!a.preset.empty()) {
    if (a.preset == "train") {
      p = FlytrapParams::train_default();
    } else if (a.preset == "test") {
      p = FlytrapParams::test_default();
    } else {
      throw ValidationError("--preset: expected train|test");
    }
  } else {
    p.arena_side = a.arena;
    p.trap_side = a.trap;
    p.wall_thickness = a.wall;
    p.tunnel_width = a.tunnel;
    p.tunnel_side = side_from_string(a.side);
    p.trap_center = a.center.size() == 2 ? Point{a.center[0], a.center[1]}
                                         : Point{a.arena / 2.0, a.arena / 2.0};
  }
  Environment env = make_flytrap(p);
  Environment named(a.name, env.bounds(), env.obstacles());
  named.save(a.out);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string out = "policy.json";
  std::string log = "train_log.csv";
  std::optional<std::uint64_t> seed;
  std::optional<int> checkpoint_every;
};

int cmd_train(const TrainArgs& a) {
  TrainFileConfig cfg = TrainFileConfig::load(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.checkpoint_every) cfg.train.checkpoint_every = *a.checkpoint_every;
  if (cfg.train.checkpoint_every > 0 && cfg.train.checkpoint_prefix.empty()) {
    cfg.train.checkpoint_prefix = a.out;
  }
  TrainResult result = train(cfg.train, cfg.planner, cfg.envs, cfg.planner_cfg);
  result.policy.save(a.out);
  write_file(a.log, train_log_to_csv(result.log));
  std::cout << "best restart: " << result.best_restart
            << " (mean eval return " << result.best_eval_return << ")\n"
            << "wrote " << a.out << " and " << a.log << "\n";
  return 0;
}

struct EvalArgs {
  std::string config;
  std::string out = "eval";
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<std::uint64_t> budget;
};

int cmd_eval(const EvalArgs& a) {
  ExperimentConfig cfg = ExperimentConfig::load(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.trials) cfg.trials = *a.trials;
  if (a.budget) cfg.planner_cfg.sample_budget = *a.budget;
  cfg.validate();
  RunStats stats = evaluate(cfg);
  const std::string csv_path = a.out + "_trials.csv";
  const std::string summary_path = a.out + "_summary.json";
  write_file(csv_path, trials_to_csv(stats));
  write_file(summary_path, summary_to_json(cfg, stats));
  std::cout << "success rate " << stats.success_rate << " over " << cfg.trials << " trials\n"
            << "wrote " << csv_path << " and " << summary_path << "\n";
  return 0;
}

struct CompareArgs {
  std::string learned, baseline;
  std::string out;
};

int cmd_compare(const CompareArgs& a) {
  auto read = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open summary: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CompareTable t = compare_summaries(read(a.learned), read(a.baseline));
  std::cout << compare_to_text(t);
  if (!a.out.empty()) {
    write_file(a.out, compare_to_json(t));
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

struct DistGridArgs {
  std::string env, policy;
  int resolution = 40;
  int snapshot_samples = 200;
  std::uint64_t seed = 0;
  std::vector<double> start, goal;
  std::string out = "grid.csv";
};

int cmd_dist_grid(const DistGridArgs& a) {
  Environment env = Environment::load(a.env);
  SamplingPolicy policy = SamplingPolicy::load(a.policy);
  policy.set_training(false);
  if (a.start.size() != 2 || a.goal.size() != 2) {
    throw ValidationError("--start and --goal must each be two numbers");
  }
  const Point start{a.start[0], a.start[1]};
  const Point goal{a.goal[0], a.goal[1]};

  // Snapshot the search tree after a fixed number of accepted samples by
  // running the planner with a budget-limited always-accept probe, then
  // rebuilding the tree the policy would have produced.
  PlannerConfig pc;
  pc.sample_budget = a.snapshot_samples;
  Rng rng(a.seed);
  GeomTree tree;
  tree.add(start, -1, env.distance_to_obstacles(start));
  Counters counters;
  const Rect& b = env.bounds();
  while (counters.samples_drawn < pc.sample_budget) {
    const Point x = rng.bernoulli(pc.goal_bias)
                        ? goal
                        : Point{rng.uniform(b.xmin, b.xmax), rng.uniform(b.ymin, b.ymax)};
    ++counters.samples_drawn;
    const int nn = nearest(tree, x);
    Vec f{distance(x, tree.nodes[nn].q) - tree.nodes[nn].clearance};
    if (policy.decide(f, rng).accept) {
      connect(tree, nn, x, pc, env, counters);
    }
  }
  DistributionGrid grid = distribution_grid(policy, env, tree, a.resolution);
  write_file(a.out, grid_to_csv(grid));
  std::cout << "wrote " << a.out << " (tree nodes: " << tree.size() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned rejection-sampling distributions for sampling-based planners"};
  app.require_subcommand(1);

  GenEnvArgs ge;
  auto* gen = app.add_subcommand("gen-env", "Generate a flytrap environment JSON");
  gen->add_option("--arena", ge.arena, "Arena side length");
  gen->add_option("--trap", ge.trap, "Trap outer side length");
  gen->add_option("--wall", ge.wall, "Wall thickness");
  gen->add_option("--tunnel", ge.tunnel, "Tunnel width");
  gen->add_option("--side", ge.side, "Tunnel side: left|right|top|bottom");
  gen->add_option("--center", ge.center, "Trap center x y")->expected(2);
  gen->add_option("--preset", ge.preset, "Preset: train|test (overrides dimensions)");
  gen->add_option("--name", ge.name, "Environment name");
  gen->add_option("--out", ge.out, "Output path");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a rejection policy");
  train_cmd->add_option("--config", tr.config, "Train config JSON")->required();
  train_cmd->add_option("--out", tr.out, "Policy checkpoint output path");
  train_cmd->add_option("--log", tr.log, "Training log CSV path");
  train_cmd->add_option("--seed", tr.seed, "Override the config seed");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every,
                        "Write a checkpoint every K iterations");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a planner over seeded trials");
  eval_cmd->add_option("--config", ev.config, "Experiment config JSON")->required();
  eval_cmd->add_option("--out", ev.out, "Output prefix (<out>_trials.csv, <out>_summary.json)");
  eval_cmd->add_option("--seed", ev.seed, "Override the config base seed");
  eval_cmd->add_option("--trials", ev.trials, "Override the trial count");
  eval_cmd->add_option("--budget", ev.budget, "Override the sample budget");

  CompareArgs cp;
  auto* cmp = app.add_subcommand("compare", "Ratio table of two eval summaries");
  cmp->add_option("--learned", cp.learned, "Summary JSON of the learned run")->required();
  cmp->add_option("--baseline", cp.baseline, "Summary JSON of the baseline run")->required();
  cmp->add_option("--out", cp.out, "Optional output JSON path");

  DistGridArgs dg;
  auto* grid = app.add_subcommand("dist-grid", "Discretized implicit distribution of a policy");
  grid->add_option("--env", dg.env, "Environment JSON")->required();
  grid->add_option("--policy", dg.policy, "Policy checkpoint")->required();
  grid->add_option("--resolution", dg.resolution, "Grid resolution per axis");
  grid->add_option("--snapshot-samples", dg.snapshot_samples,
                   "Planner samples drawn before the tree snapshot");
  grid->add_option("--seed", dg.seed, "Snapshot run seed");
  grid->add_option("--start", dg.start, "Start x y")->expected(2)->required();
  grid->add_option("--goal", dg.goal, "Goal x y")->expected(2)->required();
  grid->add_option("--out", dg.out, "Output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_env(ge);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*cmp) return cmd_compare(cp);
    if (*grid) return cmd_dist_grid(dg);
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
