#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsplan/planners.hpp"
#include "rsplan/training.hpp"

namespace rsplan {

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  Counters counters;
  double path_length = 0.0;  // meaningful only on success
  double wall_ms = 0.0;      // informational; excluded from the deterministic CSV
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

Aggregate aggregate(const std::vector<double>& xs);

/// Per-trial records plus their aggregates. Counter statistics cover all
/// trials; path_length covers successful trials only.
struct RunStats {
  std::vector<TrialRecord> trials;
  double success_rate = 0.0;
  Aggregate samples_drawn, collision_checks, nodes_added, steering_calls;
  Aggregate path_length;  // over successes
  Aggregate wall_ms;
  int successes = 0;

  static RunStats from_trials(std::vector<TrialRecord> trials);
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::always_accept;
  std::string checkpoint_path;  // set when the policy comes from a file

  SamplingPolicy instantiate(FeatureMapKind map) const;
};

struct ExperimentConfig {
  PlannerKind planner = PlannerKind::rrt_connect;
  std::optional<Environment> env;
  Point start{}, goal{};
  std::optional<PendulumModel> model;
  PendulumState pend_start{};
  PolicySpec policy;
  int trials = 100;
  std::uint64_t seed = 0;
  PlannerConfig planner_cfg;

  void validate() const;
  static ExperimentConfig load(const std::string& path);
  static ExperimentConfig from_json_string(const std::string& text);
};

/// Runs the planner `trials` times with seeds base_seed + trial index. Trials
/// execute in parallel on frozen policy parameters; every reported success is
/// re-validated against the environment before inclusion.
RunStats evaluate(const ExperimentConfig& cfg);

std::string trials_to_csv(const RunStats& stats);
std::string summary_to_json(const ExperimentConfig& cfg, const RunStats& stats);

struct CompareRow {
  std::string metric;
  double learned_mean = 0.0;
  double baseline_mean = 0.0;
  double ratio_percent = 0.0;  // NaN when the baseline mean is zero
};

struct CompareTable {
  std::vector<CompareRow> rows;
  double learned_success_rate = 0.0;
  double baseline_success_rate = 0.0;
};

/// Per-metric ratio of means (learned/baseline) in percent; success rates are
/// reported separately, not as a ratio.
CompareTable compare(const RunStats& learned, const RunStats& baseline);

/// Same comparison computed from two summary JSON files.
CompareTable compare_summaries(const std::string& learned_json, const std::string& baseline_json);

std::string compare_to_text(const CompareTable& t);
std::string compare_to_json(const CompareTable& t);

/// Train-config file schema used by the CLI.
struct TrainFileConfig {
  TrainConfig train;
  PlannerKind planner = PlannerKind::rrt_connect;
  std::vector<TrainEnv> envs;
  PlannerConfig planner_cfg;

  static TrainFileConfig load(const std::string& path);
  static TrainFileConfig from_json_string(const std::string& text);
};

}  // namespace rsplan
