#pragma once

#include <cstdint>
#include <vector>

#include "rsplan/nn.hpp"

namespace rsplan {

/// Per-run work counters. samples_drawn counts draws from the base
/// distribution (one MDP step each), collision_checks counts point queries
/// issued inside the planning loop.
struct Counters {
  std::uint64_t samples_drawn = 0;
  std::uint64_t collision_checks = 0;
  std::uint64_t nodes_added = 0;
  std::uint64_t steering_calls = 0;
};

/// One MDP step record. The planner fills features, the action, and the raw
/// per-step counts; the trainer fills the rewards and the value estimate.
struct Transition {
  Vec features;
  bool accepted = false;
  std::uint32_t n_node = 0;
  std::uint32_t n_collision = 0;
  double raw_reward = 0.0;
  double reward = 0.0;  // normalized
  double value_estimate = 0.0;
};

struct Rollout {
  std::vector<Transition> transitions;
  int env_index = 0;
  bool success = false;
  Counters counters;
  double total_return = 0.0;      // sum of normalized rewards
  double total_raw_return = 0.0;  // sum of raw rewards
};

}  // namespace rsplan
