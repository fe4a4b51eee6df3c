#pragma once

#include <span>
#include <vector>

#include "rsplan/dynamics.hpp"
#include "rsplan/geometry.hpp"
#include "rsplan/policy.hpp"
#include "rsplan/rollout.hpp"
#include "rsplan/rng.hpp"
#include "rsplan/search_tree.hpp"

namespace rsplan {

struct PlannerConfig {
  double step_size = 2.0;
  double goal_bias = 0.05;
  double goal_tolerance = 1.0;
  std::uint64_t sample_budget = 50000;
  double est_radius = 5.0;
  double resolution = 0.5;

  void validate() const {
    if (step_size <= 0.0) throw ValidationError("step_size must be > 0");
    if (goal_bias < 0.0 || goal_bias >= 1.0) throw ValidationError("goal_bias must be in [0, 1)");
    if (sample_budget == 0) throw ValidationError("sample_budget must be > 0");
    if (goal_tolerance <= 0.0) throw ValidationError("goal_tolerance must be > 0");
    if (est_radius <= 0.0) throw ValidationError("est_radius must be > 0");
    if (resolution <= 0.0) throw ValidationError("resolution must be > 0");
  }
};

enum class ExtendOutcome { reached, advanced, trapped };

struct ExtendResult {
  ExtendOutcome outcome = ExtendOutcome::trapped;
  int node = -1;  // index of the appended node, or the existing node when the
                  // target coincides with it; -1 when trapped
};

/// One step of length <= step_size from the given node toward target. Appends
/// a node on a collision-free segment; reached means the new node sits exactly
/// at the target. A zero-distance target returns reached without duplicating
/// the node.
ExtendResult extend(GeomTree& tree, int from, const Point& target, const PlannerConfig& cfg,
                    const Environment& env, Counters& counters);

struct ConnectResult {
  bool reached = false;
  int last = -1;  // last node the walk stood on
};

/// Repeats extend from each new node until the target is reached or a step is
/// trapped.
ConnectResult connect(GeomTree& tree, int from, const Point& target, const PlannerConfig& cfg,
                      const Environment& env, Counters& counters);

template <typename Config>
struct PlanResult {
  bool success = false;
  std::vector<Config> path;  // empty on failure
  Counters counters;
  std::vector<Transition> transitions;  // filled only when recording
};

using GeomPlanResult = PlanResult<Point>;
using PendPlanResult = PlanResult<PendulumState>;

/// RRT with the connect extension. Every draw (goal-biased ones included)
/// passes through the policy filter; one Transition is recorded per draw.
GeomPlanResult plan_rrt_connect(const Environment& env, const Point& start, const Point& goal,
                                SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                                bool record = false);

/// Bidirectional RRT: extend the active tree toward the filtered sample, then
/// try to connect the other tree to the new node; trees swap every iteration.
GeomPlanResult plan_birrt(const Environment& env, const Point& start, const Point& goal,
                          SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                          bool record = false);

/// Draws a tree index with probability proportional to 1/weight[i].
int est_select_candidate(std::span<const double> weights, Rng& rng);

/// EST variant: candidate expansion nodes are drawn with probability
/// proportional to 1/w(x) and the policy filters the candidate node itself.
GeomPlanResult plan_est(const Environment& env, const Point& start, const Point& goal,
                        SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                        bool record = false);

/// Kinodynamic RRT for the pendulum: accepted state samples pull the nearest
/// node through one randomly sampled (torque, duration) propagation. Nodes are
/// added unconditionally; there are no obstacles.
PendPlanResult plan_kinodynamic_rrt(const PendulumModel& model, const PendulumState& start,
                                    SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                                    bool record = false);

double path_length(std::span<const Point> path);
double path_length(std::span<const PendulumState> path);

/// Re-checks that a returned geometric path is collision-free edge by edge and
/// hits the endpoints within tolerance.
bool validate_path(const Environment& env, std::span<const Point> path, const Point& start,
                   const Point& goal, const PlannerConfig& cfg);

}  // namespace rsplan
