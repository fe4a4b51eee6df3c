#include "rsplan/policy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace rsplan {

using nlohmann::json;

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "learned") return PolicyKind::learned;
  if (s == "always_accept") return PolicyKind::always_accept;
  if (s == "dynamic_domain") return PolicyKind::dynamic_domain;
  if (s == "ball_tree") return PolicyKind::ball_tree;
  throw ValidationError("policy kind: expected learned|always_accept|dynamic_domain|ball_tree, got '" + s + "'");
}

std::string policy_kind_to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::learned: return "learned";
    case PolicyKind::always_accept: return "always_accept";
    case PolicyKind::dynamic_domain: return "dynamic_domain";
    case PolicyKind::ball_tree: return "ball_tree";
  }
  return "always_accept";
}

FeatureMapKind feature_map_from_string(const std::string& s) {
  if (s == "rrt") return FeatureMapKind::rrt;
  if (s == "birrt") return FeatureMapKind::birrt;
  if (s == "est") return FeatureMapKind::est;
  if (s == "pendulum") return FeatureMapKind::pendulum;
  if (s == "raw") return FeatureMapKind::raw;
  throw ValidationError("feature map: expected rrt|birrt|est|pendulum|raw, got '" + s + "'");
}

std::string feature_map_to_string(FeatureMapKind m) {
  switch (m) {
    case FeatureMapKind::rrt: return "rrt";
    case FeatureMapKind::birrt: return "birrt";
    case FeatureMapKind::est: return "est";
    case FeatureMapKind::pendulum: return "pendulum";
    case FeatureMapKind::raw: return "raw";
  }
  return "rrt";
}

int feature_dim(FeatureMapKind m) {
  switch (m) {
    case FeatureMapKind::rrt: return 1;
    case FeatureMapKind::birrt: return 1;
    case FeatureMapKind::est: return 2;
    case FeatureMapKind::pendulum: return 2;
    case FeatureMapKind::raw: return 0;
  }
  return 0;
}

Vec features_rrt(const GeomTree& tree, const Point& x, const Environment&) {
  const int idx = nearest(tree, x);
  return {distance(x, tree.nodes[idx].q) - tree.nodes[idx].clearance};
}

Vec features_birrt(const GeomTree& active_tree, const Point& x, const Environment& env) {
  return features_rrt(active_tree, x, env);
}

Vec features_est(const GeomTree& tree, int candidate, const Environment&, double radius) {
  return {tree.nodes[candidate].clearance,
          static_cast<double>(est_weight(tree, candidate, radius))};
}

Vec features_pendulum(const PendulumState& x, const PendulumState& goal) {
  return {wrap_angle(goal.angle - x.angle), goal.omega - x.omega};
}

void FeatureStats::update(const Vec& f) {
  if (mean_.empty()) {
    mean_.assign(f.size(), 0.0);
    m2_.assign(f.size(), 0.0);
  }
  if (f.size() != mean_.size()) throw ValidationError("feature width changed mid-stream");
  ++count_;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double delta = f[i] - mean_[i];
    mean_[i] += delta / static_cast<double>(count_);
    m2_[i] += delta * (f[i] - mean_[i]);
  }
}

Vec FeatureStats::standardize(const Vec& f) const {
  if (count_ == 0 || mean_.size() != f.size()) return f;
  Vec out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double sd =
        count_ >= 2 ? std::sqrt(m2_[i] / static_cast<double>(count_ - 1)) : 0.0;
    out[i] = (f[i] - mean_[i]) / std::max(sd, 1e-8);
    if (count_ < 2) out[i] = f[i] - mean_[i];
  }
  return out;
}

FeatureStats FeatureStats::from_parts(std::uint64_t count, Vec mean, Vec m2) {
  FeatureStats s;
  s.count_ = count;
  s.mean_ = std::move(mean);
  s.m2_ = std::move(m2);
  if (s.mean_.size() != s.m2_.size()) throw ValidationError("feature_stats: array sizes disagree");
  return s;
}

SamplingPolicy SamplingPolicy::heuristic(PolicyKind kind, FeatureMapKind map) {
  if (kind == PolicyKind::learned) throw ValidationError("heuristic() called with learned kind");
  if ((kind == PolicyKind::dynamic_domain || kind == PolicyKind::ball_tree) &&
      map != FeatureMapKind::rrt && map != FeatureMapKind::birrt) {
    throw ValidationError("dynamic_domain/ball_tree require the rrt or birrt feature map");
  }
  SamplingPolicy p;
  p.kind_ = kind;
  p.map_ = map;
  return p;
}

SamplingPolicy SamplingPolicy::learned(NeuralNet net, FeatureMapKind map) {
  const int want = feature_dim(map);
  if (want > 0 && net.input_dim() != want) {
    throw ValidationError("network input width does not match the feature map");
  }
  if (net.output_dim() != 2) throw ValidationError("policy network must output 2 logits");
  SamplingPolicy p;
  p.kind_ = PolicyKind::learned;
  p.map_ = map;
  p.net_ = std::move(net);
  p.stats_ = FeatureStats(p.net_.input_dim());
  return p;
}

double SamplingPolicy::accept_probability(const Vec& features) const {
  switch (kind_) {
    case PolicyKind::always_accept:
      return 1.0;
    case PolicyKind::dynamic_domain:
      // Reject samples farther from the tree than the nearest node's clearance.
      return features.at(0) > 0.0 ? 0.0 : 1.0;
    case PolicyKind::ball_tree:
      // Reject samples closer to the tree than the nearest node's clearance.
      return features.at(0) < 0.0 ? 0.0 : 1.0;
    case PolicyKind::learned: {
      const Vec z = net_.infer_one(stats_.standardize(features));
      // Softmax over [accept, reject] logits, squashed into the clamp band.
      const double m = std::max(z[0], z[1]);
      const double ea = std::exp(z[0] - m), er = std::exp(z[1] - m);
      return clamp_low_ + (clamp_high_ - clamp_low_) * ea / (ea + er);
    }
  }
  return 1.0;
}

Decision SamplingPolicy::decide(const Vec& features, Rng& rng) {
  if (kind_ == PolicyKind::learned) {
    const int want = net_.input_dim();
    if (static_cast<int>(features.size()) != want) {
      throw ValidationError("feature width does not match policy");
    }
    if (training_) stats_.update(features);
    const double p = accept_probability(features);
    return Decision{rng.bernoulli(p), p};
  }
  const double p = accept_probability(features);
  return Decision{p >= 1.0, p};
}

std::string SamplingPolicy::to_json_string() const {
  json j;
  j["format_version"] = 1;
  j["kind"] = policy_kind_to_string(kind_);
  j["feature_map"] = feature_map_to_string(map_);
  j["clamp"] = {clamp_low_, clamp_high_};
  if (kind_ == PolicyKind::learned) {
    j["feature_stats"] = {
        {"count", stats_.count()}, {"mean", stats_.mean()}, {"m2", stats_.m2()}};
    j["net"] = json::parse(net_.to_json_string());
  }
  return j.dump();
}

SamplingPolicy SamplingPolicy::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("policy JSON parse error: ") + e.what());
  }
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw ValidationError("policy checkpoint: unsupported format_version");
  }
  const PolicyKind kind = policy_kind_from_string(j.at("kind").get<std::string>());
  const FeatureMapKind map = feature_map_from_string(j.at("feature_map").get<std::string>());
  if (kind != PolicyKind::learned) return heuristic(kind, map);

  SamplingPolicy p = learned(NeuralNet::from_json_string(j.at("net").dump()), map);
  const auto& jc = j.at("clamp");
  p.clamp_low_ = jc.at(0).get<double>();
  p.clamp_high_ = jc.at(1).get<double>();
  if (!(p.clamp_low_ > 0.0 && p.clamp_low_ < p.clamp_high_ && p.clamp_high_ < 1.0)) {
    throw ValidationError("policy clamp: need 0 < low < high < 1");
  }
  const auto& js = j.at("feature_stats");
  p.stats_ = FeatureStats::from_parts(js.at("count").get<std::uint64_t>(),
                                      js.at("mean").get<Vec>(), js.at("m2").get<Vec>());
  return p;
}

SamplingPolicy SamplingPolicy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open policy checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json_string(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void SamplingPolicy::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write policy checkpoint: " + path);
  out << to_json_string() << "\n";
}

}  // namespace rsplan
