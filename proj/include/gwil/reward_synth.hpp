#ifndef GWIL_REWARD_SYNTH_HPP_
#define GWIL_REWARD_SYNTH_HPP_

#include "gwil/gw_solver.hpp"
#include "gwil/mmspace.hpp"

namespace gwil {

struct PseudoRewardAssignment {
  Vector rewards;  // one per agent step
  double gw_sq = 0.0;
  bool includes_T_A_factor = false;
};

/// Per-step GW pseudo-rewards for an agent trajectory:
///   r_j = -c * sum_{i,i',j'} |dE(i,i') - dA(j,j')|^2 theta[i][j] theta[i'][j']
/// with c = T_A when include_T_A is set and c = 1 otherwise. Both spaces must
/// carry uniform masses.
PseudoRewardAssignment trajectory_rewards(const MetricMeasureSpace& expert,
                                          const MetricMeasureSpace& agent,
                                          const Coupling& theta, bool include_T_A = false);

/// GW reward over the atoms of a general agent measure, divided by the agent
/// mass rho of each atom. rho-weighted, the rewards sum to -gw_objective.
Vector occupancy_rewards(const MetricMeasureSpace& expert, const MetricMeasureSpace& agent,
                         const Coupling& u, const Vector& rho_agent);

/// Same decomposition for a Wasserstein plan: r_j = -c * sum_i cost[i][j] plan[i][j].
PseudoRewardAssignment wasserstein_rewards(const Matrix& cost, const Coupling& plan,
                                           bool include_T_A = false);

/// proxy + beta * env.
Vector combine_rewards(const Vector& proxy, const Vector& env, double beta);

}  // namespace gwil

#endif  // GWIL_REWARD_SYNTH_HPP_
