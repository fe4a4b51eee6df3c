#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsplan/planners.hpp"
#include "rsplan/policy.hpp"
#include "rsplan/rollout.hpp"

namespace rsplan {

/// Welford accumulator used for reward normalization.
struct RunningStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  double stddev() const {
    return count >= 2 ? std::sqrt(m2 / static_cast<double>(count - 1)) : 0.0;
  }
};

/// -(lambda1 + lambda2*n_node + lambda3*n_collision): the per-step cost of one
/// sample, the nodes it added, and the collision checks it triggered.
inline double compute_reward(std::uint32_t n_node, std::uint32_t n_collision, double lambda1,
                             double lambda2, double lambda3) {
  return -(lambda1 * 1.0 + lambda2 * n_node + lambda3 * n_collision);
}

/// Updates the running statistics with r, then returns (r - mean)/max(std, 1e-6).
inline double normalize_reward(RunningStats& stats, double r) {
  stats.push(r);
  return (r - stats.mean) / std::max(stats.stddev(), 1e-6);
}

/// Reverse cumulative sums of the normalized rewards: R_t = sum_{k>=t} r_k.
std::vector<double> returns(const Rollout& rollout);

/// Likelihood-ratio gradient: (1/N) sum_t grad log pi(a_t|phi_t) * (R_t - V(phi_t)),
/// computed over the combined transition batch of the N rollouts with a
/// train-mode forward. The sign is the ascent direction on the expected return.
/// Features are standardized with the policy's frozen statistics.
Gradients policy_gradient(std::span<const Rollout> rollouts, SamplingPolicy& policy,
                          NeuralNet& value_net);

/// Gradient of the mean squared error between V(phi_t) and R_t over all
/// transitions (descent direction).
Gradients value_update(std::span<const Rollout> rollouts, const SamplingPolicy& policy,
                       NeuralNet& value_net);

struct TrainConfig {
  int iterations = 150;
  int rollouts_per_env = 10;
  int restarts = 3;
  double policy_lr = 0.001;
  double value_lr = 0.001;
  double lambda1 = 0.01;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  std::uint64_t seed = 1;
  int value_warmup_steps = 50;
  int checkpoint_every = 0;          // 0 disables periodic checkpoints
  std::string checkpoint_prefix;     // "<prefix>_iter<N>.json"
  bool average_env_gradients = false;
  int eval_rollouts = 10;            // per env, used to pick the best restart

  void validate() const {
    if (iterations < 1) throw ValidationError("iterations must be >= 1");
    if (rollouts_per_env < 1) throw ValidationError("rollouts_per_env must be >= 1");
    if (restarts < 1) throw ValidationError("restarts must be >= 1");
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw ValidationError("lambda weights must be >= 0");
  }
};

struct TrainLogRow {
  int restart = 0;
  int iteration = 0;  // 0 = warmup collection under the initial policy
  int env_index = 0;
  double mean_return = 0.0;      // normalized
  double mean_raw_return = 0.0;
  double mean_samples = 0.0;
  double mean_collision_checks = 0.0;
  double mean_nodes = 0.0;
  double success_rate = 0.0;
};

struct TrainResult {
  SamplingPolicy policy;
  std::vector<TrainLogRow> log;
  int best_restart = 0;
  double best_eval_return = 0.0;
};

std::string train_log_to_csv(const std::vector<TrainLogRow>& log);

/// Produces one recorded rollout under the given policy. env_index selects the
/// training environment; the rng is derived per rollout by the trainer.
using RolloutFn = std::function<Rollout(SamplingPolicy& policy, int env_index, Rng& rng)>;

/// Algorithm core: per restart, initialize policy/value nets, warm-start the
/// value net on rollouts from the initial policy, then alternate policy-ascent
/// and value-descent steps per environment per iteration. The restart with the
/// best mean evaluation return wins.
TrainResult train_core(const TrainConfig& cfg, int n_envs, int input_dim, FeatureMapKind map,
                       const RolloutFn& collect);

/// One training environment: a 2D world with start/goal, or a pendulum model.
struct TrainEnv {
  std::optional<Environment> env;
  Point start{}, goal{};
  std::optional<PendulumModel> model;
  PendulumState pend_start{};
};

enum class PlannerKind { rrt_connect, birrt, est, pendulum };
PlannerKind planner_kind_from_string(const std::string& s);
std::string planner_kind_to_string(PlannerKind k);
FeatureMapKind feature_map_for(PlannerKind k);

/// Binds the planner family to train_core. planner_cfg.sample_budget acts as
/// the per-episode cap during training.
TrainResult train(const TrainConfig& cfg, PlannerKind planner, const std::vector<TrainEnv>& envs,
                  const PlannerConfig& planner_cfg);

struct DistributionGrid {
  int resolution = 0;
  Rect bounds;
  std::vector<double> p;  // row-major [iy*resolution + ix], sums to 1 over free cells

  double& at(int ix, int iy) { return p[std::size_t(iy) * resolution + ix]; }
  double at(int ix, int iy) const { return p[std::size_t(iy) * resolution + ix]; }
  Point cell_center(int ix, int iy) const;
};

/// Evaluates the acceptance probability at every grid cell center against the
/// given tree state and normalizes over free cells: the discretized implicit
/// sampling distribution induced by rejection.
DistributionGrid distribution_grid(const SamplingPolicy& policy, const Environment& env,
                                   const GeomTree& tree, int resolution);

std::string grid_to_csv(const DistributionGrid& grid);

}  // namespace rsplan
