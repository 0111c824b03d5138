#include "gwil/gwil_trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gwil/env_suite.hpp"
#include "gwil/error.hpp"

namespace gwil {
namespace {

struct ReflectedSetup {
  TabularMetricMDP expert_mdp;
  TabularMetricMDP agent_mdp;
  Trajectory expert;
};

ReflectedSetup reflected(const std::string& name) {
  auto spec = builtin_maze(name);
  const auto ref = reflect_maze(spec);
  ReflectedSetup out;
  out.expert_mdp = build_maze(spec);
  out.agent_mdp = build_maze(ref.spec);
  out.expert = rollout(out.expert_mdp, value_iteration(out.expert_mdp).policy, 200, 0);
  return out;
}

// Probability that the sampled policy enters an absorbing state within the horizon.
double exact_success(const TabularMetricMDP& m, const Policy& pol, int horizon) {
  Vector alive = m.initial;
  double done = 0.0;
  for (int t = 0; t < horizon; ++t) {
    Vector next = Vector::Zero(m.num_states);
    for (int s = 0; s < m.num_states; ++s)
      for (int a = 0; a < m.num_actions; ++a)
        for (int s2 = 0; s2 < m.num_states; ++s2) next[s2] += alive[s] * pol.pi(s, a) * m.p(s, a, s2);
    for (int s = 0; s < m.num_states; ++s) {
      if (m.is_absorbing(s)) {
        done += next[s];
        next[s] = 0.0;
      }
    }
    alive = next;
  }
  return done;
}

TEST(TrainGwil, SingleEpisodeLogsOneRecord) {
  const auto setup = reflected("maze5");
  TrainConfig cfg;
  cfg.episodes = 1;
  const auto res = train_gwil(setup.agent_mdp, setup.expert, cfg);
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_EQ(res.log[0].episode, 0);
  EXPECT_GE(res.log[0].gw_sq, 0.0);
}

TEST(TrainGwil, SameSeedSameLog) {
  const auto setup = reflected("maze5");
  TrainConfig cfg;
  cfg.episodes = 40;
  cfg.seed = 7;
  const auto a = train_gwil(setup.agent_mdp, setup.expert, cfg);
  const auto b = train_gwil(setup.agent_mdp, setup.expert, cfg);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].proxy_return, b.log[i].proxy_return);
    EXPECT_EQ(a.log[i].gw_sq, b.log[i].gw_sq);
    EXPECT_EQ(a.log[i].env_return, b.log[i].env_return);
    EXPECT_EQ(a.log[i].eval_return, b.log[i].eval_return);
    EXPECT_EQ(a.log[i].steps, b.log[i].steps);
  }
  EXPECT_EQ(a.q, b.q);
}

TEST(TrainGwil, ProxyReturnMatchesObjective) {
  const auto setup = reflected("maze5");
  for (bool with_ta : {true, false}) {
    TrainConfig cfg;
    cfg.episodes = 30;
    cfg.include_T_A = with_ta;
    const auto res = train_gwil(setup.agent_mdp, setup.expert, cfg);
    for (const auto& rec : res.log) {
      const double factor = with_ta ? rec.steps : 1.0;
      EXPECT_NEAR(rec.proxy_return, -factor * rec.gw_sq, 1e-9 * std::max(1.0, factor));
      EXPECT_GE(rec.gw_sq, 0.0);
    }
  }
}

TEST(TrainGwil, RecoversReflectedOptimum) {
  const auto setup = reflected("maze5");
  TrainConfig cfg;
  cfg.seed = 0;
  const auto res = train_gwil(setup.agent_mdp, setup.expert, cfg);
  const auto ev = evaluate(setup.agent_mdp, res.policy, 1, 0);
  EXPECT_EQ(ev.success_rate, 1.0);
  EXPECT_GE(ev.mean_return, 0.95 * value_iteration(setup.agent_mdp).expected_return);
  ASSERT_TRUE(res.first_success.has_value());
  EXPECT_TRUE(res.log[static_cast<std::size_t>(*res.first_success)].success);
}

TEST(TrainGwil, RejectsBadConfig) {
  const auto setup = reflected("corridor");
  TrainConfig cfg;
  cfg.episodes = 0;
  EXPECT_THROW(train_gwil(setup.agent_mdp, setup.expert, cfg), InvalidInput);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train_gwil(setup.agent_mdp, setup.expert, cfg), InvalidInput);
  EXPECT_THROW(train_gwil(setup.agent_mdp, Trajectory{}, TrainConfig{}), InvalidInput);
}

TEST(TrainGwil, SolverFailuresAreSkippedThenAbort) {
  const auto setup = reflected("maze5");
  TrainConfig cfg;
  cfg.episodes = 5;
  cfg.gw_opts.initial_couplings = {Matrix::Ones(2, 2)};
  cfg.max_consecutive_failures = 10;
  const auto res = train_gwil(setup.agent_mdp, setup.expert, cfg);
  ASSERT_EQ(res.log.size(), 5u);
  for (const auto& rec : res.log) {
    EXPECT_TRUE(rec.skipped);
    EXPECT_TRUE(std::isnan(rec.gw_sq));
  }
  cfg.episodes = 20;
  cfg.max_consecutive_failures = 3;
  EXPECT_THROW(train_gwil(setup.agent_mdp, setup.expert, cfg), TrainingAborted);
}

TEST(WassersteinBaseline, RewardSumIsNegativeValue) {
  const auto setup = reflected("maze5");
  const auto same = rollout(setup.agent_mdp, value_iteration(setup.agent_mdp).policy, 200, 0);
  TrainConfig cfg;
  cfg.episodes = 20;
  cfg.include_T_A = false;
  const auto res = train_wasserstein_baseline(setup.agent_mdp, same, cfg);
  for (const auto& rec : res.log) EXPECT_NEAR(rec.proxy_return, -rec.gw_sq, 1e-9);
}

TEST(WassersteinBaseline, LearnsSameDomainMaze) {
  const auto setup = reflected("maze5");
  const auto same = rollout(setup.agent_mdp, value_iteration(setup.agent_mdp).policy, 200, 0);
  TrainConfig cfg;
  cfg.episodes = 300;
  const auto res = train_wasserstein_baseline(setup.agent_mdp, same, cfg);
  EXPECT_EQ(evaluate(setup.agent_mdp, res.policy, 1, 0).success_rate, 1.0);
}

TEST(WassersteinBaseline, RejectsFeatureMismatch) {
  const auto maze = build_maze(builtin_maze("open5"));
  const auto chain = build_chain_env(4, 3);
  const auto expert = rollout(chain, value_iteration(chain).policy, 50, 0);
  EXPECT_THROW(train_wasserstein_baseline(maze, expert, TrainConfig{}), InvalidInput);
}

TEST(SoftQ, LearnsCorridor) {
  const auto m = build_maze(builtin_maze("corridor"));
  TrainConfig cfg;
  cfg.episodes = 20;
  // At high temperature the entropy bonus outweighs the goal, so stay cool.
  cfg.entropy_temp = 0.02;
  cfg.final_temp = 0.0;
  const auto res = train_soft_q(m, cfg);
  EXPECT_EQ(res.policy.greedy_actions()[0], kRight);
}

TEST(Evaluate, OptimalPolicySucceeds) {
  const auto m = build_maze(builtin_maze("maze5"));
  const auto sol = value_iteration(m);
  const auto ev = evaluate(m, sol.policy, 3, 0);
  EXPECT_EQ(ev.success_rate, 1.0);
  EXPECT_NEAR(ev.mean_return, sol.expected_return, 1e-12);
  EXPECT_EQ(ev.std_return, 0.0);
}

TEST(Evaluate, RandomPolicyOnSerpentine) {
  const auto m = build_maze(builtin_maze("serpentine7"));
  const auto uniform = Policy::uniform(m.num_states, m.num_actions);
  // The goal is 30 moves away, so 25 steps can never reach it.
  EXPECT_EQ(exact_success(m, uniform, 25), 0.0);
  EXPECT_EQ(evaluate(m, uniform, 500, 1, 25, false).success_rate, 0.0);
  // With 200 steps the exact probability is small but positive.
  const double p = exact_success(m, uniform, 200);
  const int n = 4000;
  const auto ev = evaluate(m, uniform, n, 2, 200, false);
  const double se = std::sqrt(std::max(p * (1 - p), 1e-6) / n);
  EXPECT_LT(p, 0.05);
  EXPECT_NEAR(ev.success_rate, p, 3 * se + 1.0 / n);
}

TEST(Evaluate, MeanReturnMatchesOccupancy) {
  auto spec = builtin_maze("maze5");
  spec.slip_prob = 0.2;
  const auto m = build_maze(spec);
  const auto sol = value_iteration(m);
  const int n = 5000;
  const auto ev = evaluate(m, sol.policy, n, 3, 400);
  const double se = ev.std_return / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(ev.mean_return, sol.expected_return, 3 * se);
}

TEST(Evaluate, RejectsZeroRollouts) {
  const auto m = build_maze(builtin_maze("corridor"));
  EXPECT_THROW(evaluate(m, Policy::uniform(2, 4), 0, 0), InvalidInput);
}

}  // namespace
}  // namespace gwil
