#include "rsplan/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rsplan/text.hpp"

namespace rsplan {

std::vector<double> returns(const Rollout& rollout) {
  if (rollout.transitions.empty()) throw ValidationError("returns: empty rollout");
  std::vector<double> r(rollout.transitions.size());
  double acc = 0.0;
  for (int t = static_cast<int>(r.size()) - 1; t >= 0; --t) {
    acc += rollout.transitions[t].reward;
    r[t] = acc;
  }
  return r;
}

namespace {

struct FlatBatch {
  Batch features;            // standardized
  std::vector<double> advantage_or_target;  // filled by caller
  std::vector<int> action;   // 0 = accept, 1 = reject
};

/// Combined transition batch over all rollouts, features standardized with the
/// policy's current (frozen for this pass) statistics.
FlatBatch flatten(std::span<const Rollout> rollouts, const SamplingPolicy& policy) {
  std::size_t total = 0;
  for (const Rollout& r : rollouts) total += r.transitions.size();
  if (total == 0) throw ValidationError("gradient step: no transitions");
  const int dim = policy.net().input_dim();
  FlatBatch fb;
  fb.features = Batch::zeros(static_cast<int>(total), dim);
  fb.action.reserve(total);
  int row = 0;
  for (const Rollout& r : rollouts) {
    for (const Transition& t : r.transitions) {
      const Vec std_f = policy.feature_stats().standardize(t.features);
      if (static_cast<int>(std_f.size()) != dim) {
        throw ValidationError("gradient step: feature width mismatch");
      }
      for (int j = 0; j < dim; ++j) fb.features.at(row, j) = std_f[j];
      fb.action.push_back(t.accepted ? 0 : 1);
      ++row;
    }
  }
  return fb;
}

std::vector<double> all_returns(std::span<const Rollout> rollouts) {
  std::vector<double> out;
  for (const Rollout& r : rollouts) {
    const std::vector<double> rr = returns(r);
    out.insert(out.end(), rr.begin(), rr.end());
  }
  return out;
}

}  // namespace

Gradients policy_gradient(std::span<const Rollout> rollouts, SamplingPolicy& policy,
                          NeuralNet& value_net) {
  if (rollouts.empty()) throw ValidationError("policy_gradient: no rollouts");
  if (policy.kind() != PolicyKind::learned) {
    throw ValidationError("policy_gradient: policy is not learned");
  }
  FlatBatch fb = flatten(rollouts, policy);
  const int n = fb.features.n;
  if (n < 2) throw ValidationError("policy_gradient: need at least 2 transitions");

  const std::vector<double> rets = all_returns(rollouts);
  const Batch values = value_net.infer(fb.features);

  ForwardCache cache;
  const Batch logits = policy.net().train_forward(fb.features, cache);

  const double lo = policy.clamp_low(), hi = policy.clamp_high();
  const double inv_n_rollouts = 1.0 / static_cast<double>(rollouts.size());
  Batch dout = Batch::zeros(n, 2);
  for (int i = 0; i < n; ++i) {
    const double m = std::max(logits.at(i, 0), logits.at(i, 1));
    const double ea = std::exp(logits.at(i, 0) - m);
    const double er = std::exp(logits.at(i, 1) - m);
    const double s0 = ea / (ea + er);
    const double s[2] = {s0, 1.0 - s0};
    const int a = fb.action[i];
    const double p = lo + (hi - lo) * s[a];
    const double adv = rets[i] - values.at(i, 0);
    for (int j = 0; j < 2; ++j) {
      const double dlogp = (hi - lo) * s[a] * ((j == a ? 1.0 : 0.0) - s[j]) / p;
      dout.at(i, j) = inv_n_rollouts * adv * dlogp;
    }
  }
  return policy.net().backward(cache, dout);
}

Gradients value_update(std::span<const Rollout> rollouts, const SamplingPolicy& policy,
                       NeuralNet& value_net) {
  if (rollouts.empty()) throw ValidationError("value_update: no rollouts");
  FlatBatch fb = flatten(rollouts, policy);
  const int n = fb.features.n;
  if (n < 2) throw ValidationError("value_update: need at least 2 transitions");

  const std::vector<double> rets = all_returns(rollouts);
  ForwardCache cache;
  const Batch v = value_net.train_forward(fb.features, cache);

  Batch dout = Batch::zeros(n, 1);
  for (int i = 0; i < n; ++i) {
    dout.at(i, 0) = 2.0 * (v.at(i, 0) - rets[i]) / static_cast<double>(n);
  }
  return value_net.backward(cache, dout);
}

namespace {

void finalize_rollout(Rollout& r, RunningStats& stats) {
  r.total_return = 0.0;
  r.total_raw_return = 0.0;
  for (Transition& t : r.transitions) {
    // Scale-only normalization. Centering rewards would turn the cheap
    // per-step sampling cost into a positive reward, and with variable-length
    // episodes that makes indefinite rejection the optimum of the normalized
    // objective; dividing by the running spread keeps the cost ordering while
    // still putting all problem types on a similar range.
    stats.push(t.raw_reward);
    t.reward = t.raw_reward / std::max(stats.stddev(), 1e-6);
    r.total_raw_return += t.raw_reward;
    r.total_return += t.reward;
  }
}

void fill_value_estimates(std::vector<Rollout>& rollouts, const SamplingPolicy& policy,
                          const NeuralNet& value_net) {
  for (Rollout& r : rollouts) {
    for (Transition& t : r.transitions) {
      t.value_estimate =
          value_net.infer_one(policy.feature_stats().standardize(t.features))[0];
    }
  }
}

TrainLogRow summarize(int restart, int iteration, int env_index,
                      std::span<const Rollout> rollouts) {
  TrainLogRow row;
  row.restart = restart;
  row.iteration = iteration;
  row.env_index = env_index;
  const double n = static_cast<double>(rollouts.size());
  for (const Rollout& r : rollouts) {
    row.mean_return += r.total_return / n;
    row.mean_raw_return += r.total_raw_return / n;
    row.mean_samples += static_cast<double>(r.counters.samples_drawn) / n;
    row.mean_collision_checks += static_cast<double>(r.counters.collision_checks) / n;
    row.mean_nodes += static_cast<double>(r.counters.nodes_added) / n;
    row.success_rate += (r.success ? 1.0 : 0.0) / n;
  }
  return row;
}

std::uint64_t rollout_stream(int restart, int iteration, int env, int j) {
  return ((static_cast<std::uint64_t>(restart) * 100003ULL + iteration) * 1009ULL + env) *
             10007ULL +
         static_cast<std::uint64_t>(j);
}

std::size_t batch_size_of(std::span<const Rollout> rollouts) {
  std::size_t n = 0;
  for (const Rollout& r : rollouts) n += r.transitions.size();
  return n;
}

}  // namespace

std::string train_log_to_csv(const std::vector<TrainLogRow>& log) {
  std::string out =
      "restart,iteration,environment,mean_return,mean_raw_return,mean_samples,"
      "mean_collision_checks,mean_nodes,success_rate\n";
  for (const TrainLogRow& r : log) {
    out += std::to_string(r.restart) + "," + std::to_string(r.iteration) + "," +
           std::to_string(r.env_index) + "," + fmt_double(r.mean_return) + "," +
           fmt_double(r.mean_raw_return) + "," + fmt_double(r.mean_samples) + "," +
           fmt_double(r.mean_collision_checks) + "," + fmt_double(r.mean_nodes) + "," +
           fmt_double(r.success_rate) + "\n";
  }
  return out;
}

TrainResult train_core(const TrainConfig& cfg, int n_envs, int input_dim, FeatureMapKind map,
                       const RolloutFn& collect) {
  cfg.validate();
  if (n_envs < 1) throw ValidationError("train: empty environment list");
  if (input_dim < 1) throw ValidationError("train: input_dim must be >= 1");

  TrainResult best;
  double best_eval = -std::numeric_limits<double>::infinity();
  std::vector<TrainLogRow> all_log;

  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Rng init_rng(Rng::mix(cfg.seed, 0xA11CE000ULL + restart));
    SamplingPolicy policy =
        SamplingPolicy::learned(NeuralNet::mlp(input_dim, {32, 16}, 2, init_rng), map);
    policy.set_training(true);
    NeuralNet value_net = NeuralNet::mlp(input_dim, {32, 16}, 1, init_rng);
    Adam adam_policy(cfg.policy_lr);
    Adam adam_value(cfg.value_lr);
    RunningStats reward_stats;

    // Warmup: rollouts under the initial policy fit the value baseline first.
    std::vector<Rollout> warmup;
    for (int e = 0; e < n_envs; ++e) {
      std::vector<Rollout> env_rollouts;
      for (int j = 0; j < cfg.rollouts_per_env; ++j) {
        Rng rng(Rng::mix(cfg.seed, rollout_stream(restart, 0, e, j)));
        Rollout r = collect(policy, e, rng);
        r.env_index = e;
        finalize_rollout(r, reward_stats);
        env_rollouts.push_back(std::move(r));
      }
      all_log.push_back(summarize(restart, 0, e, env_rollouts));
      for (Rollout& r : env_rollouts) warmup.push_back(std::move(r));
    }
    fill_value_estimates(warmup, policy, value_net);
    if (batch_size_of(warmup) >= 2) {
      for (int k = 0; k < cfg.value_warmup_steps; ++k) {
        adam_value.step(value_net, value_update(warmup, policy, value_net));
      }
    }

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
      Gradients avg_pg, avg_vg;
      bool have_avg = false;
      for (int e = 0; e < n_envs; ++e) {
        std::vector<Rollout> rollouts;
        for (int j = 0; j < cfg.rollouts_per_env; ++j) {
          Rng rng(Rng::mix(cfg.seed, rollout_stream(restart, iter, e, j)));
          Rollout r = collect(policy, e, rng);
          r.env_index = e;
          finalize_rollout(r, reward_stats);
          rollouts.push_back(std::move(r));
        }
        fill_value_estimates(rollouts, policy, value_net);
        all_log.push_back(summarize(restart, iter, e, rollouts));
        if (batch_size_of(rollouts) < 2) continue;

        Gradients pg = policy_gradient(rollouts, policy, value_net);
        Gradients vg = value_update(rollouts, policy, value_net);
        if (cfg.average_env_gradients) {
          if (!have_avg) {
            avg_pg = std::move(pg);
            avg_vg = std::move(vg);
            have_avg = true;
          } else {
            avg_pg.accumulate(pg);
            avg_vg.accumulate(vg);
          }
        } else {
          pg.scale(-1.0);  // ascent on the return
          adam_policy.step(policy.net(), pg);
          adam_value.step(value_net, vg);
        }
      }
      if (cfg.average_env_gradients && have_avg) {
        avg_pg.scale(-1.0 / n_envs);
        avg_vg.scale(1.0 / n_envs);
        adam_policy.step(policy.net(), avg_pg);
        adam_value.step(value_net, avg_vg);
      }
      if (cfg.checkpoint_every > 0 && !cfg.checkpoint_prefix.empty() &&
          iter % cfg.checkpoint_every == 0) {
        SamplingPolicy snapshot = policy;
        snapshot.set_training(false);
        snapshot.save(cfg.checkpoint_prefix + "_r" + std::to_string(restart) + "_iter" +
                      std::to_string(iter) + ".json");
      }
    }

    // Score this restart with the frozen policy.
    policy.set_training(false);
    double eval_sum = 0.0;
    int eval_count = 0;
    for (int e = 0; e < n_envs; ++e) {
      for (int j = 0; j < cfg.eval_rollouts; ++j) {
        Rng rng(Rng::mix(cfg.seed, 0xE7A10000ULL + rollout_stream(restart, 1, e, j)));
        Rollout r = collect(policy, e, rng);
        double raw = 0.0;
        for (const Transition& t : r.transitions) raw += t.raw_reward;
        eval_sum += raw;
        ++eval_count;
      }
    }
    const double eval_return = eval_count > 0 ? eval_sum / eval_count : 0.0;
    if (eval_return > best_eval) {
      best_eval = eval_return;
      best.policy = policy;
      best.best_restart = restart;
      best.best_eval_return = eval_return;
    }
  }

  best.log = std::move(all_log);
  return best;
}

PlannerKind planner_kind_from_string(const std::string& s) {
  if (s == "rrt_connect") return PlannerKind::rrt_connect;
  if (s == "birrt") return PlannerKind::birrt;
  if (s == "est") return PlannerKind::est;
  if (s == "pendulum") return PlannerKind::pendulum;
  throw ValidationError("planner: expected rrt_connect|birrt|est|pendulum, got '" + s + "'");
}

std::string planner_kind_to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::rrt_connect: return "rrt_connect";
    case PlannerKind::birrt: return "birrt";
    case PlannerKind::est: return "est";
    case PlannerKind::pendulum: return "pendulum";
  }
  return "rrt_connect";
}

FeatureMapKind feature_map_for(PlannerKind k) {
  switch (k) {
    case PlannerKind::rrt_connect: return FeatureMapKind::rrt;
    case PlannerKind::birrt: return FeatureMapKind::birrt;
    case PlannerKind::est: return FeatureMapKind::est;
    case PlannerKind::pendulum: return FeatureMapKind::pendulum;
  }
  return FeatureMapKind::rrt;
}

TrainResult train(const TrainConfig& cfg, PlannerKind planner, const std::vector<TrainEnv>& envs,
                  const PlannerConfig& planner_cfg) {
  if (envs.empty()) throw ValidationError("train: empty environment list");
  for (const TrainEnv& te : envs) {
    if (planner == PlannerKind::pendulum) {
      if (!te.model) throw ValidationError("train: pendulum planner needs a pendulum model");
    } else if (!te.env) {
      throw ValidationError("train: geometric planner needs an environment");
    }
  }
  const FeatureMapKind map = feature_map_for(planner);

  RolloutFn collect = [&, planner](SamplingPolicy& policy, int e, Rng& rng) {
    const TrainEnv& te = envs[e];
    Rollout out;
    if (planner == PlannerKind::pendulum) {
      PendPlanResult res =
          plan_kinodynamic_rrt(*te.model, te.pend_start, policy, planner_cfg, rng, true);
      out.transitions = std::move(res.transitions);
      out.counters = res.counters;
      out.success = res.success;
    } else {
      GeomPlanResult res;
      switch (planner) {
        case PlannerKind::rrt_connect:
          res = plan_rrt_connect(*te.env, te.start, te.goal, policy, planner_cfg, rng, true);
          break;
        case PlannerKind::birrt:
          res = plan_birrt(*te.env, te.start, te.goal, policy, planner_cfg, rng, true);
          break;
        case PlannerKind::est:
          res = plan_est(*te.env, te.start, te.goal, policy, planner_cfg, rng, true);
          break;
        case PlannerKind::pendulum:
          break;
      }
      out.transitions = std::move(res.transitions);
      out.counters = res.counters;
      out.success = res.success;
    }
    for (Transition& t : out.transitions) {
      t.raw_reward = compute_reward(t.n_node, t.n_collision, cfg.lambda1, cfg.lambda2,
                                    cfg.lambda3);
    }
    return out;
  };

  return train_core(cfg, static_cast<int>(envs.size()), feature_dim(map), map, collect);
}

Point DistributionGrid::cell_center(int ix, int iy) const {
  return Point{bounds.xmin + (ix + 0.5) * bounds.width() / resolution,
               bounds.ymin + (iy + 0.5) * bounds.height() / resolution};
}

DistributionGrid distribution_grid(const SamplingPolicy& policy, const Environment& env,
                                   const GeomTree& tree, int resolution) {
  if (resolution < 2) throw ValidationError("distribution_grid: resolution must be >= 2");
  if (policy.feature_map() != FeatureMapKind::rrt &&
      policy.feature_map() != FeatureMapKind::birrt) {
    throw ValidationError("distribution_grid: requires an rrt or birrt feature-map policy");
  }
  if (tree.empty()) throw ValidationError("distribution_grid: empty tree");

  DistributionGrid grid;
  grid.resolution = resolution;
  grid.bounds = env.bounds();
  grid.p.assign(std::size_t(resolution) * resolution, 0.0);

  double total = 0.0;
  int free_cells = 0;
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      const Point c = grid.cell_center(ix, iy);
      if (env.point_in_collision(c)) continue;
      ++free_cells;
      const double p = policy.accept_probability(features_rrt(tree, c, env));
      grid.at(ix, iy) = p;
      total += p;
    }
  }
  if (free_cells == 0) throw ValidationError("distribution_grid: no free cells");
  if (total > 0.0) {
    for (double& v : grid.p) v /= total;
  } else {
    // Deterministic heuristics can zero out every free cell; fall back to
    // uniform over free space so the grid still integrates to one.
    for (int iy = 0; iy < resolution; ++iy) {
      for (int ix = 0; ix < resolution; ++ix) {
        const Point c = grid.cell_center(ix, iy);
        if (!env.point_in_collision(c)) grid.at(ix, iy) = 1.0 / free_cells;
      }
    }
  }
  return grid;
}

std::string grid_to_csv(const DistributionGrid& grid) {
  std::string out = "x,y,probability\n";
  for (int iy = 0; iy < grid.resolution; ++iy) {
    for (int ix = 0; ix < grid.resolution; ++ix) {
      const Point c = grid.cell_center(ix, iy);
      out += fmt_double(c.x) + "," + fmt_double(c.y) + "," + fmt_double(grid.at(ix, iy)) + "\n";
    }
  }
  return out;
}

}  // namespace rsplan
