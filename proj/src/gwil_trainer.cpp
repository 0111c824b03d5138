#include "gwil/gwil_trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "gwil/error.hpp"
#include "gwil/reward_synth.hpp"

namespace gwil {

namespace {

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double top = x.maxCoeff();
  return top + std::log((x.array() - top).exp().sum());
}

// Soft state value tau * logsumexp(Q / tau); the hard max when tau is 0.
double soft_value(const Matrix& q, int s, double tau) {
  if (tau <= 0.0) return q.row(s).maxCoeff();
  return tau * log_sum_exp(q.row(s) / tau);
}

int boltzmann_action(const Matrix& q, int s, double tau, std::mt19937_64& rng) {
  if (tau <= 0.0) {
    Eigen::Index best = 0;
    q.row(s).maxCoeff(&best);
    return static_cast<int>(best);
  }
  const Eigen::RowVectorXd logits = q.row(s) / tau;
  const Eigen::RowVectorXd probs = (logits.array() - logits.maxCoeff()).exp();
  return sample_index(probs, rng);
}

double temperature(const TrainConfig& cfg, int episode) {
  if (cfg.episodes <= 1) return cfg.entropy_temp;
  const double frac = static_cast<double>(episode) / (cfg.episodes - 1);
  return cfg.entropy_temp + (cfg.final_temp - cfg.entropy_temp) * frac;
}

double discounted_env_return(const Trajectory& traj, double gamma) {
  double ret = 0.0;
  double disc = 1.0;
  for (const Step& st : traj.steps) {
    ret += disc * st.env_reward;
    disc *= gamma;
  }
  return ret;
}

Vector env_rewards(const Trajectory& traj) {
  Vector r(static_cast<Eigen::Index>(traj.size()));
  for (std::size_t t = 0; t < traj.size(); ++t) {
    r[static_cast<Eigen::Index>(t)] = traj.steps[t].env_reward;
  }
  return r;
}

struct Proxy {
  Vector rewards;
  double gw_sq = 0.0;
};

}  // namespace

GWOptions TrainConfig::default_gw_options() {
  GWOptions o;
  o.restarts = 5;
  o.northwest_init = true;
  return o;
}

void TrainConfig::validate() const {
  if (episodes < 1) throw InvalidInput("episodes must be at least 1");
  if (horizon < 1) throw InvalidInput("horizon must be at least 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (!(entropy_temp >= 0.0) || !(final_temp >= 0.0)) {
    throw InvalidInput("temperatures must be nonnegative");
  }
  if (gamma && !(*gamma >= 0.0 && *gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
  if (eval_every < 1) throw InvalidInput("eval_every must be at least 1");
  if (td_sweeps < 1) throw InvalidInput("td_sweeps must be at least 1");
}

Policy greedy_policy(const Matrix& q) {
  std::vector<int> acts(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q.cols(); ++a) {
      if (q(s, a) > q(s, best)) best = a;
    }
    acts[static_cast<std::size_t>(s)] = static_cast<int>(best);
  }
  return Policy::deterministic(acts, static_cast<int>(q.cols()));
}

EvalResult evaluate(const TabularMetricMDP& mdp, const Policy& policy, int n_rollouts,
                    std::uint64_t seed, int horizon, bool greedy) {
  if (n_rollouts < 1) throw InvalidInput("n_rollouts must be at least 1");
  std::mt19937_64 rng(seed);
  const std::vector<int> acts = policy.greedy_actions();
  const ActionSampler choose = [&](int s, std::mt19937_64& g) {
    return greedy ? acts[static_cast<std::size_t>(s)] : sample_index(policy.pi.row(s), g);
  };
  double sum = 0.0;
  double sq = 0.0;
  double len = 0.0;
  int wins = 0;
  for (int i = 0; i < n_rollouts; ++i) {
    const Episode ep = sample_episode(mdp, choose, horizon, rng);
    const double ret = discounted_env_return(ep.trajectory, mdp.gamma);
    sum += ret;
    sq += ret * ret;
    len += static_cast<double>(ep.trajectory.size());
    wins += ep.terminated ? 1 : 0;
  }
  EvalResult out;
  out.mean_return = sum / n_rollouts;
  out.std_return = std::sqrt(std::max(0.0, sq / n_rollouts - out.mean_return * out.mean_return));
  out.success_rate = static_cast<double>(wins) / n_rollouts;
  out.mean_length = len / n_rollouts;
  return out;
}

TrainResult train(const TabularMetricMDP& agent_mdp, const Trajectory* expert,
                  const TrainConfig& cfg, RewardSource source) {
  cfg.validate();
  agent_mdp.validate();
  const double gamma = cfg.gamma.value_or(agent_mdp.gamma);
  const int ns = agent_mdp.num_states;
  const int na = agent_mdp.num_actions;

  std::optional<MetricMeasureSpace> expert_space;
  Matrix expert_features;
  if (source != RewardSource::kEnvOnly) {
    if (expert == nullptr || expert->size() == 0) throw InvalidInput("expert trajectory is empty");
    expert->validate();
    expert_space = from_trajectory(*expert, cfg.space_opts);
    expert_features = trajectory_features(*expert, cfg.space_opts);
    if (source == RewardSource::kWasserstein) {
      const auto probe = trajectory_features(
          rollout(agent_mdp, Policy::uniform(ns, na), 1, cfg.seed), cfg.space_opts);
      if (probe.cols() != expert_features.cols()) {
        throw InvalidInput("expert and agent feature dimensions differ");
      }
    }
  }

  auto pseudo_rewards = [&](const Trajectory& traj, int episode) {
    Proxy out;
    if (source == RewardSource::kEnvOnly) {
      out.rewards = Vector::Zero(static_cast<Eigen::Index>(traj.size()));
      return out;
    }
    const MetricMeasureSpace agent_space = from_trajectory(traj, cfg.space_opts);
    if (source == RewardSource::kGromovWasserstein) {
      GWOptions opts = cfg.gw_opts;
      opts.seed = cfg.gw_opts.seed + cfg.seed * 1000003ULL + static_cast<std::uint64_t>(episode);
      const GWSolveResult sol = solve_gw(*expert_space, agent_space, opts);
      const auto assign = trajectory_rewards(*expert_space, agent_space, sol.coupling,
                                             cfg.include_T_A);
      out.rewards = assign.rewards;
      out.gw_sq = assign.gw_sq;
    } else {
      const Matrix cost =
          squared_euclidean_cost(expert_features, trajectory_features(traj, cfg.space_opts));
      const auto plan = wasserstein_sq(*expert_space, agent_space, cost);
      const auto assign = wasserstein_rewards(cost, plan.coupling, cfg.include_T_A);
      out.rewards = assign.rewards;
      out.gw_sq = assign.gw_sq;
    }
    return out;
  };

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.q = Matrix::Zero(ns, na);
  Matrix& q = result.q;
  double eval_return = 0.0;
  bool success = false;
  int failures = 0;

  for (int e = 0; e < cfg.episodes; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const double tau = temperature(cfg, e);
    const ActionSampler explore = [&](int s, std::mt19937_64& g) {
      return boltzmann_action(q, s, tau, g);
    };
    const Episode ep = sample_episode(agent_mdp, explore, cfg.horizon, rng);

    EpisodeRecord rec;
    rec.episode = e;
    rec.steps = static_cast<int>(ep.trajectory.size());
    rec.env_return = discounted_env_return(ep.trajectory, gamma);

    Proxy proxy;
    try {
      proxy = pseudo_rewards(ep.trajectory, e);
      failures = 0;
    } catch (const std::exception&) {
      rec.skipped = true;
      if (++failures > cfg.max_consecutive_failures) {
        throw TrainingAborted("too many consecutive failed episodes (last at episode " +
                              std::to_string(e) + ")");
      }
    }

    if (!rec.skipped) {
      rec.proxy_return = proxy.rewards.sum();
      rec.gw_sq = proxy.gw_sq;
      Vector r = proxy.rewards;
      if (source == RewardSource::kEnvOnly) {
        r = env_rewards(ep.trajectory);
      } else if (cfg.include_env_reward) {
        r = combine_rewards(r, env_rewards(ep.trajectory), cfg.beta);
      }
      for (int sweep = 0; sweep < cfg.td_sweeps; ++sweep) {
        for (std::size_t t = 0; t < ep.states.size(); ++t) {
          const int s = ep.states[t];
          const int a = ep.actions[t];
          const int next = ep.next_states[t];
          const bool terminal = agent_mdp.is_absorbing(next);
          const double target =
              r[static_cast<Eigen::Index>(t)] + (terminal ? 0.0 : gamma * soft_value(q, next, tau));
          q(s, a) += cfg.learning_rate * (target - q(s, a));
        }
      }
    } else {
      rec.gw_sq = std::numeric_limits<double>::quiet_NaN();
    }

    if (e % cfg.eval_every == 0 || e + 1 == cfg.episodes) {
      const auto ev = evaluate(agent_mdp, greedy_policy(q), 1, cfg.seed, cfg.horizon, true);
      eval_return = ev.mean_return;
      success = ev.success_rate == 1.0;
      if (success && !result.first_success) result.first_success = e;
    }
    rec.eval_return = eval_return;
    rec.success = success;
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
  }
  result.policy = greedy_policy(q);
  return result;
}

TrainResult train_gwil(const TabularMetricMDP& agent_mdp, const Trajectory& expert,
                       const TrainConfig& cfg) {
  return train(agent_mdp, &expert, cfg, RewardSource::kGromovWasserstein);
}

TrainResult train_wasserstein_baseline(const TabularMetricMDP& agent_mdp,
                                       const Trajectory& expert, const TrainConfig& cfg) {
  return train(agent_mdp, &expert, cfg, RewardSource::kWasserstein);
}

TrainResult train_soft_q(const TabularMetricMDP& agent_mdp, const TrainConfig& cfg) {
  return train(agent_mdp, nullptr, cfg, RewardSource::kEnvOnly);
}

}  // namespace gwil
