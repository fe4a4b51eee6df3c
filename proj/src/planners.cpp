#include "rsplan/planners.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rsplan {

namespace {

void record_transition(std::vector<Transition>& transitions, bool record, Vec features,
                       bool accepted, const Counters& before, const Counters& after) {
  if (!record) return;
  Transition t;
  t.features = std::move(features);
  t.accepted = accepted;
  t.n_node = static_cast<std::uint32_t>(after.nodes_added - before.nodes_added);
  t.n_collision = static_cast<std::uint32_t>(after.collision_checks - before.collision_checks);
  transitions.push_back(std::move(t));
}

void check_endpoint(const Environment& env, const Point& p, const char* label) {
  if (env.point_in_collision(p)) {
    throw ValidationError(std::string(label) + " configuration is in collision");
  }
}

}  // namespace

ExtendResult extend(GeomTree& tree, int from, const Point& target, const PlannerConfig& cfg,
                    const Environment& env, Counters& counters) {
  const Point& origin = tree.nodes[from].q;
  const double d = distance(origin, target);
  if (d == 0.0) return ExtendResult{ExtendOutcome::reached, from};

  const bool reaches = d <= cfg.step_size;
  const double step = reaches ? d : cfg.step_size;
  const Point next{origin.x + (target.x - origin.x) * step / d,
                   origin.y + (target.y - origin.y) * step / d};

  const SegmentQuery seg = env.segment_in_collision(origin, next, cfg.resolution);
  counters.collision_checks += seg.points_tested;
  if (seg.hit) return ExtendResult{ExtendOutcome::trapped, -1};

  const int idx = tree.add(next, from, env.distance_to_obstacles(next));
  ++counters.nodes_added;
  return ExtendResult{reaches ? ExtendOutcome::reached : ExtendOutcome::advanced, idx};
}

ConnectResult connect(GeomTree& tree, int from, const Point& target, const PlannerConfig& cfg,
                      const Environment& env, Counters& counters) {
  int cur = from;
  for (;;) {
    const ExtendResult r = extend(tree, cur, target, cfg, env, counters);
    switch (r.outcome) {
      case ExtendOutcome::reached:
        return ConnectResult{true, r.node};
      case ExtendOutcome::advanced:
        cur = r.node;
        break;
      case ExtendOutcome::trapped:
        return ConnectResult{false, cur};
    }
  }
}

GeomPlanResult plan_rrt_connect(const Environment& env, const Point& start, const Point& goal,
                                SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                                bool record) {
  cfg.validate();
  check_endpoint(env, start, "start");
  check_endpoint(env, goal, "goal");

  GeomPlanResult result;
  GeomTree tree;
  tree.add(start, -1, env.distance_to_obstacles(start));

  if (distance(start, goal) <= cfg.goal_tolerance) {
    result.success = true;
    result.path = {start};
    return result;
  }

  const Rect& b = env.bounds();
  while (result.counters.samples_drawn < cfg.sample_budget) {
    const Point x = rng.bernoulli(cfg.goal_bias)
                        ? goal
                        : Point{rng.uniform(b.xmin, b.xmax), rng.uniform(b.ymin, b.ymax)};
    ++result.counters.samples_drawn;

    const int nn = nearest(tree, x);
    Vec features{distance(x, tree.nodes[nn].q) - tree.nodes[nn].clearance};
    const Decision decision = policy.decide(features, rng);

    const Counters before = result.counters;
    bool done = false;
    if (decision.accept) {
      const ConnectResult c = connect(tree, nn, x, cfg, env, result.counters);
      if (c.reached && distance(x, goal) <= cfg.goal_tolerance) {
        result.success = true;
        result.path = tree.path_from_root(c.last);
        done = true;
      }
    }
    record_transition(result.transitions, record, std::move(features), decision.accept, before,
                      result.counters);
    if (done) break;
  }
  return result;
}

GeomPlanResult plan_birrt(const Environment& env, const Point& start, const Point& goal,
                          SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                          bool record) {
  cfg.validate();
  check_endpoint(env, start, "start");
  check_endpoint(env, goal, "goal");

  GeomPlanResult result;
  GeomTree start_tree, goal_tree;
  start_tree.add(start, -1, env.distance_to_obstacles(start));
  goal_tree.add(goal, -1, env.distance_to_obstacles(goal));

  if (distance(start, goal) <= cfg.goal_tolerance) {
    result.success = true;
    result.path = {start};
    return result;
  }

  // Samples are drawn uniformly: with two trees the connect step supplies the
  // pull toward the goal, so no goal bias is applied here.
  const Rect& b = env.bounds();
  bool active_is_start = true;
  while (result.counters.samples_drawn < cfg.sample_budget) {
    GeomTree& active = active_is_start ? start_tree : goal_tree;
    GeomTree& other = active_is_start ? goal_tree : start_tree;

    const Point x{rng.uniform(b.xmin, b.xmax), rng.uniform(b.ymin, b.ymax)};
    ++result.counters.samples_drawn;

    const int nn = nearest(active, x);
    Vec features{distance(x, active.nodes[nn].q) - active.nodes[nn].clearance};
    const Decision decision = policy.decide(features, rng);

    const Counters before = result.counters;
    bool done = false;
    if (decision.accept) {
      const ExtendResult e = extend(active, nn, x, cfg, env, result.counters);
      if (e.outcome != ExtendOutcome::trapped) {
        const Point q_new = active.nodes[e.node].q;
        const int nn_other = nearest(other, q_new);
        const ConnectResult c = connect(other, nn_other, q_new, cfg, env, result.counters);
        if (c.reached) {
          const int meet_start = active_is_start ? e.node : c.last;
          const int meet_goal = active_is_start ? c.last : e.node;
          result.path = start_tree.path_from_root(meet_start);
          std::vector<Point> tail = goal_tree.path_from_root(meet_goal);
          // tail runs goal -> meeting point; append it reversed, dropping the
          // duplicated meeting configuration.
          for (auto it = std::next(tail.rbegin()); it != tail.rend(); ++it) {
            result.path.push_back(*it);
          }
          result.success = true;
          done = true;
        }
      }
    }
    record_transition(result.transitions, record, std::move(features), decision.accept, before,
                      result.counters);
    if (done) break;
    active_is_start = !active_is_start;
  }
  return result;
}

int est_select_candidate(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += 1.0 / w;
  const double u = rng.uniform() * total;
  int candidate = static_cast<int>(weights.size()) - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += 1.0 / weights[i];
    if (u < acc) {
      candidate = static_cast<int>(i);
      break;
    }
  }
  return candidate;
}

GeomPlanResult plan_est(const Environment& env, const Point& start, const Point& goal,
                        SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                        bool record) {
  cfg.validate();
  check_endpoint(env, start, "start");
  check_endpoint(env, goal, "goal");

  GeomPlanResult result;
  GeomTree tree;
  tree.add(start, -1, env.distance_to_obstacles(start));
  std::vector<double> weight{1.0};  // maintained incrementally, equals est_weight

  if (distance(start, goal) <= cfg.goal_tolerance) {
    result.success = true;
    result.path = {start};
    return result;
  }

  while (result.counters.samples_drawn < cfg.sample_budget) {
    const int candidate = est_select_candidate(weight, rng);
    ++result.counters.samples_drawn;

    Vec features{tree.nodes[candidate].clearance, weight[candidate]};
    const Decision decision = policy.decide(features, rng);

    const Counters before = result.counters;
    bool done = false;
    if (decision.accept) {
      const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double r = cfg.est_radius * std::sqrt(rng.uniform());
      const Point target{tree.nodes[candidate].q.x + r * std::cos(ang),
                         tree.nodes[candidate].q.y + r * std::sin(ang)};
      const SegmentQuery seg =
          env.segment_in_collision(tree.nodes[candidate].q, target, cfg.resolution);
      result.counters.collision_checks += seg.points_tested;
      if (!seg.hit) {
        const int idx = tree.add(target, candidate, env.distance_to_obstacles(target));
        ++result.counters.nodes_added;
        weight.push_back(1.0);
        for (int i = 0; i < idx; ++i) {
          if (distance(tree.nodes[i].q, target) <= cfg.est_radius) {
            weight[i] += 1.0;
            weight[idx] += 1.0;
          }
        }
        if (distance(target, goal) <= cfg.goal_tolerance) {
          result.success = true;
          result.path = tree.path_from_root(idx);
          done = true;
        }
      }
    }
    record_transition(result.transitions, record, std::move(features), decision.accept, before,
                      result.counters);
    if (done) break;
  }
  return result;
}

PendPlanResult plan_kinodynamic_rrt(const PendulumModel& model, const PendulumState& start,
                                    SamplingPolicy& policy, const PlannerConfig& cfg, Rng& rng,
                                    bool record) {
  model.validate();
  cfg.validate();

  PendPlanResult result;
  PendTree tree;
  tree.add(start, -1, 0.0);
  const PendulumState goal = goal_state(model);

  if (at_goal(model, start)) {
    result.success = true;
    result.path = {start};
    return result;
  }

  while (result.counters.samples_drawn < cfg.sample_budget) {
    PendulumState x;
    if (rng.bernoulli(cfg.goal_bias)) {
      x = goal;
    } else {
      // angle uniform over (-pi, pi], matching the wrap convention
      x.angle = std::numbers::pi - 2.0 * std::numbers::pi * rng.uniform();
      x.omega = rng.uniform(-model.omega_max, model.omega_max);
    }
    ++result.counters.samples_drawn;

    Vec features = features_pendulum(x, goal);
    const Decision decision = policy.decide(features, rng);

    const Counters before = result.counters;
    bool done = false;
    if (decision.accept) {
      const int nn = nearest(tree, x);
      const ControlSample ctrl = sample_control(rng, model);
      const PendulumState s_new = propagate(model, tree.nodes[nn].q, ctrl.torque, ctrl.duration);
      ++result.counters.steering_calls;
      const int idx = tree.add(s_new, nn, 0.0);
      ++result.counters.nodes_added;
      if (at_goal(model, s_new)) {
        result.success = true;
        result.path = tree.path_from_root(idx);
        done = true;
      }
    }
    record_transition(result.transitions, record, std::move(features), decision.accept, before,
                      result.counters);
    if (done) break;
  }
  return result;
}

double path_length(std::span<const Point> path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += distance(path[i - 1], path[i]);
  return len;
}

double path_length(std::span<const PendulumState> path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += pendulum_distance(path[i - 1], path[i]);
  return len;
}

bool validate_path(const Environment& env, std::span<const Point> path, const Point& start,
                   const Point& goal, const PlannerConfig& cfg) {
  if (path.empty()) return false;
  if (distance(path.front(), start) != 0.0) return false;
  if (distance(path.back(), goal) > cfg.goal_tolerance) return false;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (env.point_in_collision(path[i])) return false;
    if (i > 0 && env.segment_in_collision(path[i - 1], path[i], cfg.resolution).hit) return false;
  }
  return true;
}

}  // namespace rsplan
