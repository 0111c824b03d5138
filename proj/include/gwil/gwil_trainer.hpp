#ifndef GWIL_GWIL_TRAINER_HPP_
#define GWIL_GWIL_TRAINER_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gwil/gw_solver.hpp"
#include "gwil/mmspace.hpp"
#include "gwil/tabular_mdp.hpp"

namespace gwil {

/// Raised when training cannot continue (too many consecutive failed episodes).
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RewardSource { kGromovWasserstein, kWasserstein, kEnvOnly };

struct TrainConfig {
  int episodes = 500;
  int horizon = 200;
  double learning_rate = 0.3;
  // Boltzmann temperature, decayed linearly from entropy_temp to final_temp.
  double entropy_temp = 1.0;
  double final_temp = 0.05;
  std::optional<double> gamma;  // defaults to the agent MDP's discount
  GWOptions gw_opts = default_gw_options();
  std::uint64_t seed = 0;
  bool include_env_reward = false;
  double beta = 1.0;
  bool include_T_A = true;
  int eval_every = 1;
  int td_sweeps = 1;
  TrajectorySpaceOptions space_opts;
  int max_consecutive_failures = 25;

  static GWOptions default_gw_options();
  void validate() const;
};

struct EpisodeRecord {
  int episode = 0;
  double proxy_return = 0.0;  // sum of pseudo-rewards over the episode
  double env_return = 0.0;    // discounted environment return of the episode
  double gw_sq = 0.0;         // NaN when the solve failed and the episode was skipped
  double eval_return = 0.0;   // greedy policy, carried over between evaluations
  bool success = false;       // greedy policy reaches an absorbing state
  int steps = 0;
  bool skipped = false;
  double wall_ms = 0.0;
};

struct TrainResult {
  Policy policy;  // greedy in Q
  Matrix q;
  std::vector<EpisodeRecord> log;
  std::optional<int> first_success;  // first episode whose greedy evaluation succeeded
};

/// Episodic imitation: each episode is rolled out with a Boltzmann policy over
/// Q, matched to the expert trajectory, and the resulting per-step
/// pseudo-rewards drive soft Q-learning updates over that episode only.
TrainResult train_gwil(const TabularMetricMDP& agent_mdp, const Trajectory& expert,
                       const TrainConfig& cfg);

/// Same loop with a Wasserstein coupling on squared Euclidean feature costs.
/// The expert must live in the agent's feature space.
TrainResult train_wasserstein_baseline(const TabularMetricMDP& agent_mdp,
                                       const Trajectory& expert, const TrainConfig& cfg);

/// Soft Q-learning on the environment reward alone.
TrainResult train_soft_q(const TabularMetricMDP& agent_mdp, const TrainConfig& cfg);

TrainResult train(const TabularMetricMDP& agent_mdp, const Trajectory* expert,
                  const TrainConfig& cfg, RewardSource source);

struct EvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
  double success_rate = 0.0;
  double mean_length = 0.0;
};

/// Discounted environment return over n rollouts. With greedy set, actions
/// are the policy's argmax; otherwise they are sampled from it. Success means
/// an absorbing state was entered within the horizon.
EvalResult evaluate(const TabularMetricMDP& mdp, const Policy& policy, int n_rollouts,
                    std::uint64_t seed, int horizon = 200, bool greedy = true);

/// Greedy policy from a Q table, ties toward the lowest action index.
Policy greedy_policy(const Matrix& q);

}  // namespace gwil

#endif  // GWIL_GWIL_TRAINER_HPP_
