#include "rsplan/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rsplan/text.hpp"

namespace rsplan {

using nlohmann::json;

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  if (xs.empty()) return a;
  for (double x : xs) a.mean += x;
  a.mean /= static_cast<double>(xs.size());
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return a;
}

RunStats RunStats::from_trials(std::vector<TrialRecord> trials) {
  RunStats s;
  s.trials = std::move(trials);
  std::vector<double> samples, checks, nodes, steering, lengths, wall;
  for (const TrialRecord& t : s.trials) {
    samples.push_back(static_cast<double>(t.counters.samples_drawn));
    checks.push_back(static_cast<double>(t.counters.collision_checks));
    nodes.push_back(static_cast<double>(t.counters.nodes_added));
    steering.push_back(static_cast<double>(t.counters.steering_calls));
    wall.push_back(t.wall_ms);
    if (t.success) {
      lengths.push_back(t.path_length);
      ++s.successes;
    }
  }
  s.samples_drawn = aggregate(samples);
  s.collision_checks = aggregate(checks);
  s.nodes_added = aggregate(nodes);
  s.steering_calls = aggregate(steering);
  s.path_length = aggregate(lengths);
  s.wall_ms = aggregate(wall);
  s.success_rate =
      s.trials.empty() ? 0.0 : static_cast<double>(s.successes) / s.trials.size();
  return s;
}

SamplingPolicy PolicySpec::instantiate(FeatureMapKind map) const {
  if (!checkpoint_path.empty()) {
    SamplingPolicy p = SamplingPolicy::load(checkpoint_path);
    if (p.kind() == PolicyKind::learned && p.feature_map() != map) {
      throw ValidationError("policy checkpoint feature map '" +
                            feature_map_to_string(p.feature_map()) +
                            "' does not match the planner");
    }
    return p;
  }
  if (kind == PolicyKind::learned) {
    throw ValidationError("learned policy requires a checkpoint path");
  }
  return SamplingPolicy::heuristic(kind, map);
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw ValidationError("trials must be >= 1");
  planner_cfg.validate();
  if (planner == PlannerKind::pendulum) {
    if (!model) throw ValidationError("pendulum experiment requires a pendulum model");
    model->validate();
  } else if (!env) {
    throw ValidationError("geometric experiment requires an environment");
  }
}

namespace {

PlannerConfig planner_cfg_from_json(const json& j) {
  PlannerConfig pc;
  if (j.contains("step_size")) pc.step_size = j["step_size"].get<double>();
  if (j.contains("goal_bias")) pc.goal_bias = j["goal_bias"].get<double>();
  if (j.contains("goal_tolerance")) pc.goal_tolerance = j["goal_tolerance"].get<double>();
  if (j.contains("sample_budget")) pc.sample_budget = j["sample_budget"].get<std::uint64_t>();
  if (j.contains("est_radius")) pc.est_radius = j["est_radius"].get<double>();
  if (j.contains("resolution")) pc.resolution = j["resolution"].get<double>();
  return pc;
}

PendulumModel pendulum_from_json(const json& j) {
  PendulumModel m;
  if (j.contains("mass")) m.mass = j["mass"].get<double>();
  if (j.contains("length")) m.length = j["length"].get<double>();
  if (j.contains("gravity")) m.gravity = j["gravity"].get<double>();
  if (j.contains("damping")) m.damping = j["damping"].get<double>();
  if (j.contains("torque_limit")) m.torque_limit = j["torque_limit"].get<double>();
  if (j.contains("dt")) m.dt = j["dt"].get<double>();
  if (j.contains("t_prop_max")) m.t_prop_max = j["t_prop_max"].get<double>();
  if (j.contains("omega_max")) m.omega_max = j["omega_max"].get<double>();
  if (j.contains("goal_angle")) m.goal_angle = j["goal_angle"].get<double>();
  if (j.contains("goal_tol_angle")) m.goal_tol_angle = j["goal_tol_angle"].get<double>();
  if (j.contains("goal_tol_omega")) m.goal_tol_omega = j["goal_tol_omega"].get<double>();
  m.validate();
  return m;
}

FlytrapParams flytrap_from_json(const json& j) {
  FlytrapParams p;
  if (j.contains("arena_side")) p.arena_side = j["arena_side"].get<double>();
  if (j.contains("trap_side")) p.trap_side = j["trap_side"].get<double>();
  if (j.contains("wall_thickness")) p.wall_thickness = j["wall_thickness"].get<double>();
  if (j.contains("tunnel_width")) p.tunnel_width = j["tunnel_width"].get<double>();
  if (j.contains("tunnel_side")) p.tunnel_side = side_from_string(j["tunnel_side"].get<std::string>());
  if (j.contains("trap_center")) {
    p.trap_center = Point{j["trap_center"].at(0).get<double>(), j["trap_center"].at(1).get<double>()};
  }
  return p;
}

Environment environment_from_spec(const json& j, const std::string& field) {
  if (j.contains("file")) return Environment::load(j["file"].get<std::string>());
  if (j.contains("flytrap")) return make_flytrap(flytrap_from_json(j["flytrap"]));
  if (j.contains("preset")) {
    const std::string preset = j["preset"].get<std::string>();
    if (preset == "flytrap_train") return make_flytrap(FlytrapParams::train_default());
    if (preset == "flytrap_test") return make_flytrap(FlytrapParams::test_default());
    throw ValidationError(field + ".preset: expected flytrap_train|flytrap_test");
  }
  throw ValidationError(field + ": expected {file}, {flytrap} or {preset}");
}

Point point_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) throw ValidationError(field + ": expected [x, y]");
  return Point{j.at(0).get<double>(), j.at(1).get<double>()};
}

PolicySpec policy_from_json(const json& j) {
  PolicySpec spec;
  if (j.contains("checkpoint")) {
    spec.kind = PolicyKind::learned;
    spec.checkpoint_path = j["checkpoint"].get<std::string>();
  } else if (j.contains("kind")) {
    spec.kind = policy_kind_from_string(j["kind"].get<std::string>());
    if (spec.kind == PolicyKind::learned) {
      throw ValidationError("policy: learned kind requires {\"checkpoint\": path}");
    }
  } else {
    throw ValidationError("policy: expected {kind} or {checkpoint}");
  }
  return spec;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("experiment config parse error: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.planner = planner_kind_from_string(j.at("planner").get<std::string>());
  if (cfg.planner == PlannerKind::pendulum) {
    cfg.model = pendulum_from_json(j.value("environment", json::object()).value("pendulum", json::object()));
    if (j.contains("start")) {
      const auto& s = j["start"];
      cfg.pend_start = PendulumState{s.at(0).get<double>(), s.at(1).get<double>()};
    }
  } else {
    if (!j.contains("environment")) throw ValidationError("environment: missing");
    cfg.env = environment_from_spec(j["environment"], "environment");
    cfg.start = point_from_json(j.at("start"), "start");
    cfg.goal = point_from_json(j.at("goal"), "goal");
  }
  cfg.policy = policy_from_json(j.at("policy"));
  cfg.trials = j.value("trials", 100);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.planner_cfg = planner_cfg_from_json(j.value("planner_config", json::object()));
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open experiment config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_string(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

namespace {

TrialRecord run_trial(const ExperimentConfig& cfg, SamplingPolicy& policy, int trial) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = cfg.seed + static_cast<std::uint64_t>(trial);
  Rng rng(rec.seed);

  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.planner == PlannerKind::pendulum) {
    PendPlanResult res =
        plan_kinodynamic_rrt(*cfg.model, cfg.pend_start, policy, cfg.planner_cfg, rng);
    rec.success = res.success;
    rec.counters = res.counters;
    if (res.success) {
      if (!at_goal(*cfg.model, res.path.back())) {
        throw std::logic_error("path audit failed: pendulum path does not end at goal");
      }
      rec.path_length = path_length(std::span<const PendulumState>(res.path));
    }
  } else {
    GeomPlanResult res;
    switch (cfg.planner) {
      case PlannerKind::rrt_connect:
        res = plan_rrt_connect(*cfg.env, cfg.start, cfg.goal, policy, cfg.planner_cfg, rng);
        break;
      case PlannerKind::birrt:
        res = plan_birrt(*cfg.env, cfg.start, cfg.goal, policy, cfg.planner_cfg, rng);
        break;
      case PlannerKind::est:
        res = plan_est(*cfg.env, cfg.start, cfg.goal, policy, cfg.planner_cfg, rng);
        break;
      case PlannerKind::pendulum:
        break;
    }
    rec.success = res.success;
    rec.counters = res.counters;
    if (res.success) {
      if (!validate_path(*cfg.env, res.path, cfg.start, cfg.goal, cfg.planner_cfg)) {
        throw std::logic_error("path audit failed: reported path is not valid");
      }
      rec.path_length = path_length(std::span<const Point>(res.path));
    }
  }
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

RunStats evaluate(const ExperimentConfig& cfg) {
  cfg.validate();
  SamplingPolicy policy = cfg.policy.instantiate(feature_map_for(cfg.planner));
  policy.set_training(false);

  std::vector<TrialRecord> records(cfg.trials);
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers = std::max(1, std::min<int>(cfg.trials, hw == 0 ? 1 : static_cast<int>(hw)));

  if (workers == 1) {
    for (int i = 0; i < cfg.trials; ++i) records[i] = run_trial(cfg, policy, i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::string failure;
    std::mutex failure_mutex;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const int i = next.fetch_add(1);
          if (i >= cfg.trials) return;
          try {
            records[i] = run_trial(cfg, policy, i);
          } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (failure.empty()) failure = e.what();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (!failure.empty()) throw std::runtime_error(failure);
  }
  return RunStats::from_trials(std::move(records));
}

std::string trials_to_csv(const RunStats& stats) {
  std::string out =
      "trial,seed,success,samples_drawn,collision_checks,nodes_added,steering_calls,"
      "path_length\n";
  for (const TrialRecord& t : stats.trials) {
    out += std::to_string(t.trial) + "," + std::to_string(t.seed) + "," +
           (t.success ? "1" : "0") + "," + std::to_string(t.counters.samples_drawn) + "," +
           std::to_string(t.counters.collision_checks) + "," +
           std::to_string(t.counters.nodes_added) + "," +
           std::to_string(t.counters.steering_calls) + ",";
    out += t.success ? fmt_double(t.path_length) : std::string();
    out += "\n";
  }
  return out;
}

namespace {

json aggregate_to_json(const Aggregate& a) {
  return json{{"mean", a.mean}, {"stddev", a.stddev}};
}

}  // namespace

std::string summary_to_json(const ExperimentConfig& cfg, const RunStats& stats) {
  json j;
  j["planner"] = planner_kind_to_string(cfg.planner);
  j["environment"] = cfg.env ? cfg.env->name() : "pendulum";
  j["policy"] = cfg.policy.checkpoint_path.empty() ? policy_kind_to_string(cfg.policy.kind)
                                                   : cfg.policy.checkpoint_path;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["sample_budget"] = cfg.planner_cfg.sample_budget;
  j["success_rate"] = stats.success_rate;
  j["successes"] = stats.successes;
  j["samples_drawn"] = aggregate_to_json(stats.samples_drawn);
  j["collision_checks"] = aggregate_to_json(stats.collision_checks);
  j["nodes_added"] = aggregate_to_json(stats.nodes_added);
  j["steering_calls"] = aggregate_to_json(stats.steering_calls);
  j["path_length_successes"] = aggregate_to_json(stats.path_length);
  // Wall time is hardware-dependent and sits outside the reproducibility
  // contract; it is reported here but never in the per-trial CSV.
  j["wall_ms"] = aggregate_to_json(stats.wall_ms);
  return j.dump(2);
}

CompareTable compare(const RunStats& learned, const RunStats& baseline) {
  CompareTable t;
  auto add = [&t](const std::string& name, const Aggregate& l, const Aggregate& b) {
    CompareRow row;
    row.metric = name;
    row.learned_mean = l.mean;
    row.baseline_mean = b.mean;
    row.ratio_percent =
        b.mean != 0.0 ? 100.0 * l.mean / b.mean : std::numeric_limits<double>::quiet_NaN();
    t.rows.push_back(row);
  };
  add("samples_drawn", learned.samples_drawn, baseline.samples_drawn);
  add("collision_checks", learned.collision_checks, baseline.collision_checks);
  add("nodes_added", learned.nodes_added, baseline.nodes_added);
  add("steering_calls", learned.steering_calls, baseline.steering_calls);
  add("path_length", learned.path_length, baseline.path_length);
  t.learned_success_rate = learned.success_rate;
  t.baseline_success_rate = baseline.success_rate;
  return t;
}

namespace {

RunStats stats_from_summary_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("summary parse error: ") + e.what());
  }
  // Rebuild just enough of RunStats for ratio computation.
  RunStats s;
  auto agg = [&j](const char* key) {
    Aggregate a;
    a.mean = j.at(key).at("mean").get<double>();
    a.stddev = j.at(key).at("stddev").get<double>();
    return a;
  };
  s.samples_drawn = agg("samples_drawn");
  s.collision_checks = agg("collision_checks");
  s.nodes_added = agg("nodes_added");
  s.steering_calls = agg("steering_calls");
  s.path_length = agg("path_length_successes");
  s.success_rate = j.at("success_rate").get<double>();
  return s;
}

}  // namespace

CompareTable compare_summaries(const std::string& learned_json,
                               const std::string& baseline_json) {
  return compare(stats_from_summary_json(learned_json), stats_from_summary_json(baseline_json));
}

std::string compare_to_text(const CompareTable& t) {
  std::ostringstream os;
  os << "metric               learned      baseline     ratio\n";
  for (const CompareRow& r : t.rows) {
    char buf[160];
    if (std::isnan(r.ratio_percent)) {
      std::snprintf(buf, sizeof(buf), "%-20s %-12.4g %-12.4g n/a\n", r.metric.c_str(),
                    r.learned_mean, r.baseline_mean);
    } else {
      std::snprintf(buf, sizeof(buf), "%-20s %-12.4g %-12.4g %.1f%%\n", r.metric.c_str(),
                    r.learned_mean, r.baseline_mean, r.ratio_percent);
    }
    os << buf;
  }
  os << "success rate         " << t.learned_success_rate << " vs " << t.baseline_success_rate
     << "\n";
  return os.str();
}

std::string compare_to_json(const CompareTable& t) {
  json rows = json::array();
  for (const CompareRow& r : t.rows) {
    json jr{{"metric", r.metric},
            {"learned_mean", r.learned_mean},
            {"baseline_mean", r.baseline_mean}};
    if (std::isnan(r.ratio_percent)) {
      jr["ratio_percent"] = nullptr;
    } else {
      jr["ratio_percent"] = r.ratio_percent;
    }
    rows.push_back(jr);
  }
  json j{{"rows", rows},
         {"learned_success_rate", t.learned_success_rate},
         {"baseline_success_rate", t.baseline_success_rate}};
  return j.dump(2);
}

TrainFileConfig TrainFileConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("train config parse error: ") + e.what());
  }
  TrainFileConfig cfg;
  cfg.planner = planner_kind_from_string(j.at("planner").get<std::string>());
  if (!j.contains("environments") || !j["environments"].is_array() || j["environments"].empty()) {
    throw ValidationError("environments: expected a non-empty array");
  }
  std::size_t i = 0;
  for (const auto& je : j["environments"]) {
    const std::string field = "environments[" + std::to_string(i) + "]";
    TrainEnv te;
    if (cfg.planner == PlannerKind::pendulum) {
      te.model = pendulum_from_json(je.value("pendulum", json::object()));
      if (je.contains("start")) {
        te.pend_start =
            PendulumState{je["start"].at(0).get<double>(), je["start"].at(1).get<double>()};
      }
    } else {
      te.env = environment_from_spec(je, field);
      te.start = point_from_json(je.at("start"), field + ".start");
      te.goal = point_from_json(je.at("goal"), field + ".goal");
    }
    cfg.envs.push_back(std::move(te));
    ++i;
  }

  TrainConfig& t = cfg.train;
  t.iterations = j.value("iterations", t.iterations);
  t.rollouts_per_env = j.value("rollouts_per_env", t.rollouts_per_env);
  t.restarts = j.value("restarts", t.restarts);
  t.policy_lr = j.value("policy_lr", t.policy_lr);
  t.value_lr = j.value("value_lr", t.value_lr);
  if (j.contains("lambda")) {
    const auto& jl = j["lambda"];
    t.lambda1 = jl.at(0).get<double>();
    t.lambda2 = jl.at(1).get<double>();
    t.lambda3 = jl.at(2).get<double>();
  }
  t.seed = j.value("seed", t.seed);
  t.value_warmup_steps = j.value("value_warmup_steps", t.value_warmup_steps);
  t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
  t.average_env_gradients = j.value("average_env_gradients", t.average_env_gradients);
  t.eval_rollouts = j.value("eval_rollouts", t.eval_rollouts);
  t.validate();

  cfg.planner_cfg = planner_cfg_from_json(j.value("planner_config", json::object()));
  if (j.contains("episode_cap")) {
    cfg.planner_cfg.sample_budget = j["episode_cap"].get<std::uint64_t>();
  }
  cfg.planner_cfg.validate();
  return cfg;
}

TrainFileConfig TrainFileConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open train config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_string(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace rsplan
