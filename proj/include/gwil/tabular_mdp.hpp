#ifndef GWIL_TABULAR_MDP_HPP_
#define GWIL_TABULAR_MDP_HPP_

#include <functional>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "gwil/gw_solver.hpp"
#include "gwil/mmspace.hpp"

namespace gwil {

/// Finite discounted MDP with separate metrics on states and actions.
///
/// Transitions are stored as an (nS * nA) x nS matrix whose row s * nA + a is
/// the next-state distribution P(. | s, a).
struct TabularMetricMDP {
  int num_states = 0;
  int num_actions = 0;
  Matrix transitions;
  Matrix rewards;  // nS x nA
  Vector initial;  // p0
  double gamma = 0.9;
  Matrix state_dist;
  Matrix action_dist;
  std::optional<Matrix> state_features;   // nS x k
  std::optional<Matrix> action_features;  // nA x l
  std::vector<bool> absorbing;            // empty means none

  double p(int s, int a, int next) const { return transitions(s * num_actions + a, next); }
  bool is_absorbing(int s) const {
    return !absorbing.empty() && absorbing[static_cast<std::size_t>(s)];
  }

  // Feature rows used for trajectories: the stored features, or one-hot codes.
  Matrix state_feature_rows() const;
  Matrix action_feature_rows() const;

  void validate() const;
};

struct Policy {
  Matrix pi;  // nS x nA, rows are distributions

  static Policy uniform(int num_states, int num_actions);
  static Policy deterministic(const std::vector<int>& actions, int num_actions);
  // Lowest-index argmax of each row.
  std::vector<int> greedy_actions() const;
  void validate() const;
};

struct OccupancyMeasure {
  Matrix rho;  // nS x nA, total mass 1 / (1 - gamma)
};

/// Discounted state-action visitation from an exact linear solve of the
/// Bellman flow equations.
OccupancyMeasure occupancy(const TabularMetricMDP& mdp, const Policy& policy);

/// max_s |sum_a rho(s,a) - p0(s) - gamma sum_{s',a'} P(s|s',a') rho(s',a')|.
double flow_residual(const TabularMetricMDP& mdp, const OccupancyMeasure& occ);

/// Expected discounted return, sum_{s,a} rho(s,a) R(s,a).
double expected_return(const TabularMetricMDP& mdp, const Policy& policy);

struct OptimalSolution {
  Policy policy;
  double expected_return = 0.0;
  Vector values;
  double bellman_residual = 0.0;
};

/// Optimal deterministic policy (ties toward the lowest action index) by value
/// iteration, polished with exact policy evaluation.
OptimalSolution value_iteration(const TabularMetricMDP& mdp, double tol = 1e-12);

/// Affine map applied to feature rows: x -> linear * x + offset.
struct RigidMap {
  Matrix linear;
  Vector offset;

  Matrix apply(const Matrix& rows) const;
};

/// Relabels states by phi and actions by psi. Rewards, transitions, the
/// initial distribution, metrics and absorbing flags are carried over so that
/// phi and psi are isometries by construction. Features are permuted and, when
/// a map is supplied, transformed.
TabularMetricMDP apply_isometry(const TabularMetricMDP& mdp, const std::vector<int>& phi,
                                const std::vector<int>& psi,
                                const std::optional<RigidMap>& state_map = std::nullopt,
                                const std::optional<RigidMap>& action_map = std::nullopt);

/// The policy acting on the relabelled MDP the way `policy` acts on the original.
Policy permute_policy(const Policy& policy, const std::vector<int>& phi,
                      const std::vector<int>& psi);

/// Occupancy support as a metric measure space under the sum metric
/// dS(s,s') + dA(a,a'), mass normalized by (1 - gamma). Atoms below 1e-12 are
/// pruned and the rest ordered by decreasing mass (ties by (s, a)).
struct PolicySpace {
  MetricMeasureSpace space;
  std::vector<std::pair<int, int>> atoms;
};
PolicySpace policy_space(const TabularMetricMDP& mdp, const OccupancyMeasure& occ);

/// GW distance between the occupancy measures of two policies.
GWSolveResult gw_between_policies(const TabularMetricMDP& mdp_e, const Policy& pi_e,
                                  const TabularMetricMDP& mdp_a, const Policy& pi_a,
                                  GWOptions opts = {});

struct IsometryCheck {
  bool isometric = false;
  // witness[i] is the atom of the second support matched to atom i of the
  // first; empty when no bijection was found.
  std::vector<int> witness;
  bool brute_force = true;
};

/// Searches for a distance-preserving bijection between the supports (atoms
/// of positive mass) of two spaces. Supports of up to kMaxBruteForce atoms are
/// searched exhaustively; larger ones fall back to a GW ~ 0 test on the
/// uniform measures over the supports.
IsometryCheck is_isometric(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                           double tol);
IsometryCheck is_isometric(const TabularMetricMDP& mdp_x, const OccupancyMeasure& occ_x,
                           const TabularMetricMDP& mdp_y, const OccupancyMeasure& occ_y,
                           double tol);
inline constexpr int kMaxBruteForce = 9;

/// One sampled episode with both index and feature views.
struct Episode {
  Trajectory trajectory;
  std::vector<int> states;
  std::vector<int> actions;
  std::vector<int> next_states;
  // True when the episode ended by entering an absorbing state.
  bool terminated = false;
};

using ActionSampler = std::function<int(int state, std::mt19937_64& rng)>;

/// Rolls out `choose` from s0 ~ p0 for up to `horizon` steps, stopping after
/// the step that enters an absorbing state.
Episode sample_episode(const TabularMetricMDP& mdp, const ActionSampler& choose, int horizon,
                       std::mt19937_64& rng);

Trajectory rollout(const TabularMetricMDP& mdp, const Policy& policy, int horizon,
                   std::uint64_t seed);

// Draws an index from a discrete distribution given as a row of probabilities.
int sample_index(const Eigen::Ref<const Eigen::RowVectorXd>& probs, std::mt19937_64& rng);

}  // namespace gwil

#endif  // GWIL_TABULAR_MDP_HPP_
