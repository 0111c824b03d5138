#include "gwil/reward_synth.hpp"

#include <algorithm>

#include "gwil/error.hpp"

namespace gwil {

namespace {

// Column sums of theta .* T, i.e. the GW cost charged to each agent atom.
Vector per_agent_cost(const MetricMeasureSpace& expert, const MetricMeasureSpace& agent,
                      const Coupling& theta) {
  theta.check_feasible();
  if (theta.u.rows() != expert.size() || theta.u.cols() != agent.size()) {
    throw InvalidInput("coupling shape does not match the spaces");
  }
  if ((theta.row_mass - expert.mass()).cwiseAbs().maxCoeff() > 1e-9 ||
      (theta.col_mass - agent.mass()).cwiseAbs().maxCoeff() > 1e-9) {
    throw Infeasible("coupling marginals do not match the space masses");
  }
  const Matrix t = detail::tensor_product(expert.dist(), agent.dist(), theta.u);
  return (theta.u.array() * t.array()).colwise().sum().transpose();
}

}  // namespace

PseudoRewardAssignment trajectory_rewards(const MetricMeasureSpace& expert,
                                          const MetricMeasureSpace& agent,
                                          const Coupling& theta, bool include_T_A) {
  if (!expert.is_uniform() || !agent.is_uniform()) {
    throw InvalidInput("trajectory rewards need uniform masses");
  }
  const Vector cost = per_agent_cost(expert, agent, theta);
  const double scale = include_T_A ? static_cast<double>(agent.size()) : 1.0;
  PseudoRewardAssignment out;
  out.rewards = -scale * cost;
  out.gw_sq = std::max(0.0, cost.sum());
  out.includes_T_A_factor = include_T_A;
  return out;
}

Vector occupancy_rewards(const MetricMeasureSpace& expert, const MetricMeasureSpace& agent,
                         const Coupling& u, const Vector& rho_agent) {
  if (rho_agent.size() != agent.size()) throw InvalidInput("rho has the wrong length");
  const Vector cost = per_agent_cost(expert, agent, u);
  Vector r(cost.size());
  for (Eigen::Index j = 0; j < cost.size(); ++j) {
    if (!(rho_agent[j] > 0.0)) throw InvalidInput("zero-mass agent atom on the support");
    r[j] = -cost[j] / rho_agent[j];
  }
  return r;
}

PseudoRewardAssignment wasserstein_rewards(const Matrix& cost, const Coupling& plan,
                                           bool include_T_A) {
  if (cost.rows() != plan.u.rows() || cost.cols() != plan.u.cols()) {
    throw InvalidInput("cost and plan shapes differ");
  }
  plan.check_feasible();
  const Vector per_step = (cost.array() * plan.u.array()).colwise().sum().transpose();
  const double scale = include_T_A ? static_cast<double>(plan.u.cols()) : 1.0;
  PseudoRewardAssignment out;
  out.rewards = -scale * per_step;
  out.gw_sq = per_step.sum();
  out.includes_T_A_factor = include_T_A;
  return out;
}

Vector combine_rewards(const Vector& proxy, const Vector& env, double beta) {
  if (proxy.size() != env.size()) throw InvalidInput("reward vectors differ in length");
  return proxy + beta * env;
}

}  // namespace gwil
