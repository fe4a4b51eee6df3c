#pragma once

#include <string>
#include <vector>

#include "rsplan/nn.hpp"
#include "rsplan/rng.hpp"
#include "rsplan/search_tree.hpp"

namespace rsplan {

enum class PolicyKind { learned, always_accept, dynamic_domain, ball_tree };
enum class FeatureMapKind { rrt, birrt, est, pendulum, raw };

PolicyKind policy_kind_from_string(const std::string& s);
std::string policy_kind_to_string(PolicyKind k);
FeatureMapKind feature_map_from_string(const std::string& s);
std::string feature_map_to_string(FeatureMapKind m);

/// Width of the feature vector each extractor produces. raw is the pass-through
/// map used by synthetic tasks, whose width is fixed by the network instead.
int feature_dim(FeatureMapKind m);

/// [ dist(x, nearest node) - cached clearance of that node ]
Vec features_rrt(const GeomTree& tree, const Point& x, const Environment& env);

/// Same feature against the tree currently being expanded.
Vec features_birrt(const GeomTree& active_tree, const Point& x, const Environment& env);

/// [ clearance(candidate), node count within radius of candidate ]
Vec features_est(const GeomTree& tree, int candidate, const Environment& env, double radius);

/// [ wrap(goal.angle - x.angle), goal.omega - x.omega ]
Vec features_pendulum(const PendulumState& x, const PendulumState& goal);

struct Decision {
  bool accept = true;
  double p_accept = 1.0;
};

/// Running per-feature mean/variance (Welford); standardizes features before
/// the network. Updated during training, frozen at evaluation.
class FeatureStats {
public:
  FeatureStats() = default;
  explicit FeatureStats(int dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  void update(const Vec& f);
  Vec standardize(const Vec& f) const;

  std::uint64_t count() const { return count_; }
  const Vec& mean() const { return mean_; }
  const Vec& m2() const { return m2_; }
  static FeatureStats from_parts(std::uint64_t count, Vec mean, Vec m2);

private:
  std::uint64_t count_ = 0;
  Vec mean_;
  Vec m2_;
};

/// Accept/reject policy consulted once per planner MDP step. The learned kind
/// squashes the softmax over two logits into [clamp_low, clamp_high] so no
/// state is ever rejected (or accepted) with probability 1. The heuristic
/// kinds are deterministic references: dynamic_domain rejects samples farther
/// from the tree than the nearest node's clearance, ball_tree rejects samples
/// closer than it; equality accepts for both.
class SamplingPolicy {
public:
  SamplingPolicy() = default;

  static SamplingPolicy heuristic(PolicyKind kind, FeatureMapKind map);
  static SamplingPolicy learned(NeuralNet net, FeatureMapKind map);

  PolicyKind kind() const { return kind_; }
  FeatureMapKind feature_map() const { return map_; }
  double clamp_low() const { return clamp_low_; }
  double clamp_high() const { return clamp_high_; }

  /// Deterministic acceptance probability for a feature vector.
  double accept_probability(const Vec& features) const;

  /// Samples the action. In training mode the feature running statistics are
  /// updated with the raw features first.
  Decision decide(const Vec& features, Rng& rng);

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }

  NeuralNet& net() { return net_; }
  const NeuralNet& net() const { return net_; }
  FeatureStats& feature_stats() { return stats_; }
  const FeatureStats& feature_stats() const { return stats_; }

  std::string to_json_string() const;
  static SamplingPolicy from_json_string(const std::string& text);
  static SamplingPolicy load(const std::string& path);
  void save(const std::string& path) const;

private:
  PolicyKind kind_ = PolicyKind::always_accept;
  FeatureMapKind map_ = FeatureMapKind::rrt;
  double clamp_low_ = 0.05;
  double clamp_high_ = 0.95;
  bool training_ = false;
  NeuralNet net_;
  FeatureStats stats_;
};

}  // namespace rsplan
