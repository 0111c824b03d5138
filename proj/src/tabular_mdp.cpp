#include "gwil/tabular_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gwil/error.hpp"

namespace gwil {

namespace {

constexpr double kProbTol = 1e-12;
constexpr double kPruneMass = 1e-12;

void check_distribution(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                        const std::string& what) {
  if ((row.array() < 0.0).any() || !row.allFinite()) {
    throw InvalidInput(what + " has a negative or non-finite entry");
  }
  if (std::abs(row.sum() - 1.0) > kProbTol) throw InvalidInput(what + " does not sum to 1");
}

void check_permutation(const std::vector<int>& perm, int size, const char* what) {
  if (static_cast<int>(perm.size()) != size) {
    throw InvalidInput(std::string(what) + " has the wrong length");
  }
  std::vector<char> hit(static_cast<std::size_t>(size), 0);
  for (int v : perm) {
    if (v < 0 || v >= size || hit[static_cast<std::size_t>(v)]) {
      throw InvalidInput(std::string(what) + " is not a bijection");
    }
    hit[static_cast<std::size_t>(v)] = 1;
  }
}

// State-to-state matrix under a policy: P_pi(s, s') = sum_a pi(a|s) P(s'|s,a).
Matrix policy_transitions(const TabularMetricMDP& mdp, const Policy& policy) {
  Matrix pp = Matrix::Zero(mdp.num_states, mdp.num_states);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      const double w = policy.pi(s, a);
      if (w != 0.0) pp.row(s) += w * mdp.transitions.row(s * mdp.num_actions + a);
    }
  }
  return pp;
}

Vector evaluate_policy(const TabularMetricMDP& mdp, const Policy& policy) {
  const Matrix pp = policy_transitions(mdp, policy);
  const Vector r = (policy.pi.array() * mdp.rewards.array()).rowwise().sum();
  const Matrix system = Matrix::Identity(mdp.num_states, mdp.num_states) - mdp.gamma * pp;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw Infeasible("policy evaluation system is singular");
  return lu.solve(r);
}

Matrix q_values(const TabularMetricMDP& mdp, const Vector& v) {
  const Vector next = mdp.transitions * v;
  Matrix q(mdp.num_states, mdp.num_actions);
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      q(s, a) = mdp.rewards(s, a) + mdp.gamma * next[s * mdp.num_actions + a];
    }
  }
  return q;
}

std::vector<int> greedy_with_ties(const Matrix& q) {
  const double tie = 1e-10 * (1.0 + q.cwiseAbs().maxCoeff());
  std::vector<int> best(static_cast<std::size_t>(q.rows()), 0);
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double top = q.row(s).maxCoeff();
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      if (q(s, a) >= top - tie) {
        best[static_cast<std::size_t>(s)] = static_cast<int>(a);
        break;
      }
    }
  }
  return best;
}

// Backtracking search for a bijection preserving all pairwise distances.
bool extend_bijection(const Matrix& dx, const Matrix& dy, double tol, std::vector<int>& map,
                      std::vector<char>& used, std::size_t depth) {
  const std::size_t n = map.size();
  if (depth == n) return true;
  for (std::size_t cand = 0; cand < n; ++cand) {
    if (used[cand]) continue;
    bool ok = true;
    for (std::size_t prev = 0; prev < depth && ok; ++prev) {
      const auto pi = static_cast<Eigen::Index>(prev);
      const auto ci = static_cast<Eigen::Index>(depth);
      ok = std::abs(dx(pi, ci) - dy(map[prev], static_cast<Eigen::Index>(cand))) <= tol;
    }
    if (!ok) continue;
    map[depth] = static_cast<int>(cand);
    used[cand] = 1;
    if (extend_bijection(dx, dy, tol, map, used, depth + 1)) return true;
    used[cand] = 0;
  }
  return false;
}

std::vector<Eigen::Index> support_of(const MetricMeasureSpace& x) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x.mass()[i] > 0.0) idx.push_back(i);
  }
  return idx;
}

Matrix restrict(const Matrix& d, const std::vector<Eigen::Index>& idx) {
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix out(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      out(i, j) = d(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

}  // namespace

Matrix TabularMetricMDP::state_feature_rows() const {
  if (state_features) return *state_features;
  return Matrix::Identity(num_states, num_states);
}

Matrix TabularMetricMDP::action_feature_rows() const {
  if (action_features) return *action_features;
  return Matrix::Identity(num_actions, num_actions);
}

void TabularMetricMDP::validate() const {
  if (num_states <= 0 || num_actions <= 0) throw InvalidInput("MDP needs states and actions");
  if (transitions.rows() != num_states * num_actions || transitions.cols() != num_states) {
    throw InvalidInput("transition table has the wrong shape");
  }
  for (Eigen::Index r = 0; r < transitions.rows(); ++r) {
    check_distribution(transitions.row(r), "transition row " + std::to_string(r));
  }
  if (rewards.rows() != num_states || rewards.cols() != num_actions || !rewards.allFinite()) {
    throw InvalidInput("reward table has the wrong shape or non-finite entries");
  }
  if (initial.size() != num_states) throw InvalidInput("initial distribution has the wrong length");
  check_distribution(initial.transpose(), "initial distribution");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("discount must lie in [0, 1)");
  if (state_dist.rows() != num_states) throw InvalidInput("state metric has the wrong size");
  if (action_dist.rows() != num_actions) throw InvalidInput("action metric has the wrong size");
  check_distance_matrix(state_dist);
  check_distance_matrix(action_dist);
  if (state_features && state_features->rows() != num_states) {
    throw InvalidInput("state features have the wrong number of rows");
  }
  if (action_features && action_features->rows() != num_actions) {
    throw InvalidInput("action features have the wrong number of rows");
  }
  if (!absorbing.empty() && static_cast<int>(absorbing.size()) != num_states) {
    throw InvalidInput("absorbing flags have the wrong length");
  }
}

Policy Policy::uniform(int num_states, int num_actions) {
  return Policy{Matrix::Constant(num_states, num_actions, 1.0 / num_actions)};
}

Policy Policy::deterministic(const std::vector<int>& actions, int num_actions) {
  Matrix pi = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) throw InvalidInput("action out of range");
    pi(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return Policy{std::move(pi)};
}

std::vector<int> Policy::greedy_actions() const {
  std::vector<int> out(static_cast<std::size_t>(pi.rows()));
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < pi.cols(); ++a) {
      if (pi(s, a) > pi(s, best)) best = a;
    }
    out[static_cast<std::size_t>(s)] = static_cast<int>(best);
  }
  return out;
}

void Policy::validate() const {
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    check_distribution(pi.row(s), "policy row " + std::to_string(s));
  }
}

OccupancyMeasure occupancy(const TabularMetricMDP& mdp, const Policy& policy) {
  if (policy.pi.rows() != mdp.num_states || policy.pi.cols() != mdp.num_actions) {
    throw InvalidInput("policy shape does not match the MDP");
  }
  const Matrix pp = policy_transitions(mdp, policy);
  const Matrix system =
      Matrix::Identity(mdp.num_states, mdp.num_states) - mdp.gamma * pp.transpose();
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) throw Infeasible("occupancy flow system is singular");
  const Vector visits = lu.solve(mdp.initial);
  OccupancyMeasure occ{policy.pi};
  for (int s = 0; s < mdp.num_states; ++s) occ.rho.row(s) *= visits[s];
  return occ;
}

double flow_residual(const TabularMetricMDP& mdp, const OccupancyMeasure& occ) {
  Vector inflow = mdp.initial;
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      inflow += mdp.gamma * occ.rho(s, a) *
                mdp.transitions.row(s * mdp.num_actions + a).transpose();
    }
  }
  return (occ.rho.rowwise().sum() - inflow).cwiseAbs().maxCoeff();
}

double expected_return(const TabularMetricMDP& mdp, const Policy& policy) {
  return (occupancy(mdp, policy).rho.array() * mdp.rewards.array()).sum();
}

OptimalSolution value_iteration(const TabularMetricMDP& mdp, double tol) {
  mdp.validate();
  Vector v = Vector::Zero(mdp.num_states);
  const int max_sweeps = 100000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector next = q_values(mdp, v).rowwise().maxCoeff();
    const double change = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (change <= tol) break;
  }

  // Exact polish: evaluate the greedy policy and re-improve until stable.
  std::vector<int> actions = greedy_with_ties(q_values(mdp, v));
  Policy policy = Policy::deterministic(actions, mdp.num_actions);
  for (int round = 0; round < 1000; ++round) {
    v = evaluate_policy(mdp, policy);
    std::vector<int> improved = greedy_with_ties(q_values(mdp, v));
    if (improved == actions) break;
    actions = std::move(improved);
    policy = Policy::deterministic(actions, mdp.num_actions);
  }

  OptimalSolution sol;
  sol.policy = policy;
  sol.values = v;
  sol.bellman_residual = (q_values(mdp, v).rowwise().maxCoeff() - v).cwiseAbs().maxCoeff();
  sol.expected_return = (occupancy(mdp, policy).rho.array() * mdp.rewards.array()).sum();
  return sol;
}

Matrix RigidMap::apply(const Matrix& rows) const {
  if (linear.cols() != rows.cols() || linear.rows() != offset.size()) {
    throw InvalidInput("feature map dimensions do not match the features");
  }
  Matrix out = rows * linear.transpose();
  out.rowwise() += offset.transpose();
  return out;
}

TabularMetricMDP apply_isometry(const TabularMetricMDP& mdp, const std::vector<int>& phi,
                                const std::vector<int>& psi,
                                const std::optional<RigidMap>& state_map,
                                const std::optional<RigidMap>& action_map) {
  mdp.validate();
  check_permutation(phi, mdp.num_states, "state map");
  check_permutation(psi, mdp.num_actions, "action map");
  const int ns = mdp.num_states;
  const int na = mdp.num_actions;

  TabularMetricMDP out = mdp;
  out.transitions = Matrix::Zero(ns * na, ns);
  out.rewards = Matrix::Zero(ns, na);
  out.initial = Vector::Zero(ns);
  out.state_dist = Matrix::Zero(ns, ns);
  out.action_dist = Matrix::Zero(na, na);
  for (int s = 0; s < ns; ++s) {
    const int fs = phi[static_cast<std::size_t>(s)];
    out.initial[fs] = mdp.initial[s];
    for (int s2 = 0; s2 < ns; ++s2) {
      out.state_dist(fs, phi[static_cast<std::size_t>(s2)]) = mdp.state_dist(s, s2);
    }
    for (int a = 0; a < na; ++a) {
      const int fa = psi[static_cast<std::size_t>(a)];
      out.rewards(fs, fa) = mdp.rewards(s, a);
      for (int s2 = 0; s2 < ns; ++s2) {
        out.transitions(fs * na + fa, phi[static_cast<std::size_t>(s2)]) = mdp.p(s, a, s2);
      }
    }
  }
  for (int a = 0; a < na; ++a) {
    for (int a2 = 0; a2 < na; ++a2) {
      out.action_dist(psi[static_cast<std::size_t>(a)], psi[static_cast<std::size_t>(a2)]) =
          mdp.action_dist(a, a2);
    }
  }
  if (mdp.state_features) {
    const Matrix src = state_map ? state_map->apply(*mdp.state_features) : *mdp.state_features;
    Matrix feats(ns, src.cols());
    for (int s = 0; s < ns; ++s) feats.row(phi[static_cast<std::size_t>(s)]) = src.row(s);
    out.state_features = std::move(feats);
  }
  if (mdp.action_features) {
    const Matrix src =
        action_map ? action_map->apply(*mdp.action_features) : *mdp.action_features;
    Matrix feats(na, src.cols());
    for (int a = 0; a < na; ++a) feats.row(psi[static_cast<std::size_t>(a)]) = src.row(a);
    out.action_features = std::move(feats);
  }
  if (!mdp.absorbing.empty()) {
    out.absorbing.assign(static_cast<std::size_t>(ns), false);
    for (int s = 0; s < ns; ++s) {
      out.absorbing[static_cast<std::size_t>(phi[static_cast<std::size_t>(s)])] =
          mdp.absorbing[static_cast<std::size_t>(s)];
    }
  }
  return out;
}

Policy permute_policy(const Policy& policy, const std::vector<int>& phi,
                      const std::vector<int>& psi) {
  const auto ns = static_cast<int>(policy.pi.rows());
  const auto na = static_cast<int>(policy.pi.cols());
  check_permutation(phi, ns, "state map");
  check_permutation(psi, na, "action map");
  Matrix pi(ns, na);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      pi(phi[static_cast<std::size_t>(s)], psi[static_cast<std::size_t>(a)]) = policy.pi(s, a);
    }
  }
  return Policy{std::move(pi)};
}

PolicySpace policy_space(const TabularMetricMDP& mdp, const OccupancyMeasure& occ) {
  const double scale = 1.0 - mdp.gamma;
  std::vector<std::pair<int, int>> atoms;
  for (int s = 0; s < mdp.num_states; ++s) {
    for (int a = 0; a < mdp.num_actions; ++a) {
      if (occ.rho(s, a) * scale >= kPruneMass) atoms.emplace_back(s, a);
    }
  }
  if (atoms.empty()) throw Infeasible("occupancy measure has empty support");
  std::stable_sort(atoms.begin(), atoms.end(), [&](const auto& l, const auto& r) {
    return occ.rho(l.first, l.second) > occ.rho(r.first, r.second);
  });
  const auto k = static_cast<Eigen::Index>(atoms.size());
  Matrix d(k, k);
  Vector mass(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto [s, a] = atoms[static_cast<std::size_t>(i)];
    mass[i] = occ.rho(s, a);
    for (Eigen::Index j = 0; j < k; ++j) {
      const auto [s2, a2] = atoms[static_cast<std::size_t>(j)];
      d(i, j) = mdp.state_dist(s, s2) + mdp.action_dist(a, a2);
    }
  }
  mass /= mass.sum();
  return PolicySpace{from_distance_matrix(d, mass), std::move(atoms)};
}

GWSolveResult gw_between_policies(const TabularMetricMDP& mdp_e, const Policy& pi_e,
                                  const TabularMetricMDP& mdp_a, const Policy& pi_a,
                                  GWOptions opts) {
  mdp_e.validate();
  mdp_a.validate();
  const PolicySpace xe = policy_space(mdp_e, occupancy(mdp_e, pi_e));
  const PolicySpace xa = policy_space(mdp_a, occupancy(mdp_a, pi_a));
  // Atoms are sorted by mass, so the northwest start pairs equal quantiles.
  opts.northwest_init = true;
  return solve_gw(xe.space, xa.space, opts);
}

IsometryCheck is_isometric(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                           double tol) {
  const auto sx = support_of(x);
  const auto sy = support_of(y);
  IsometryCheck check;
  if (sx.size() != sy.size()) return check;
  const Matrix dx = restrict(x.dist(), sx);
  const Matrix dy = restrict(y.dist(), sy);
  const std::size_t n = sx.size();

  if (static_cast<int>(n) <= kMaxBruteForce) {
    std::vector<int> map(n, -1);
    std::vector<char> used(n, 0);
    if (extend_bijection(dx, dy, tol, map, used, 0)) {
      check.isometric = true;
      for (std::size_t i = 0; i < n; ++i) {
        check.witness.push_back(static_cast<int>(sy[static_cast<std::size_t>(map[i])]));
      }
    }
    return check;
  }

  check.brute_force = false;
  const Vector uniform = Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  GWOptions opts;
  opts.northwest_init = true;
  opts.restarts = 10;
  const auto result = solve_gw(from_distance_matrix(dx, uniform), from_distance_matrix(dy, uniform), opts);
  if (result.gw_sq > tol) return check;
  check.isometric = true;
  for (Eigen::Index i = 0; i < result.coupling.u.rows(); ++i) {
    Eigen::Index j = 0;
    result.coupling.u.row(i).maxCoeff(&j);
    check.witness.push_back(static_cast<int>(sy[static_cast<std::size_t>(j)]));
  }
  return check;
}

IsometryCheck is_isometric(const TabularMetricMDP& mdp_x, const OccupancyMeasure& occ_x,
                           const TabularMetricMDP& mdp_y, const OccupancyMeasure& occ_y,
                           double tol) {
  return is_isometric(policy_space(mdp_x, occ_x).space, policy_space(mdp_y, occ_y).space, tol);
}

int sample_index(const Eigen::Ref<const Eigen::RowVectorXd>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double draw = unif(rng) * probs.sum();
  double acc = 0.0;
  int last_positive = 0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    acc += probs[k];
    last_positive = static_cast<int>(k);
    if (draw < acc) return last_positive;
  }
  return last_positive;
}

Episode sample_episode(const TabularMetricMDP& mdp, const ActionSampler& choose, int horizon,
                       std::mt19937_64& rng) {
  if (horizon < 1) throw InvalidInput("horizon must be at least 1");
  const Matrix sf = mdp.state_feature_rows();
  const Matrix af = mdp.action_feature_rows();
  Episode ep;
  int s = sample_index(mdp.initial.transpose(), rng);
  for (int t = 0; t < horizon; ++t) {
    const int a = choose(s, rng);
    const int next = sample_index(mdp.transitions.row(s * mdp.num_actions + a), rng);
    Step step;
    step.state.resize(static_cast<std::size_t>(sf.cols()));
    for (Eigen::Index c = 0; c < sf.cols(); ++c) step.state[static_cast<std::size_t>(c)] = sf(s, c);
    step.action.resize(static_cast<std::size_t>(af.cols()));
    for (Eigen::Index c = 0; c < af.cols(); ++c) step.action[static_cast<std::size_t>(c)] = af(a, c);
    step.env_reward = mdp.rewards(s, a);
    step.t = t;
    ep.trajectory.steps.push_back(std::move(step));
    ep.states.push_back(s);
    ep.actions.push_back(a);
    ep.next_states.push_back(next);
    s = next;
    if (mdp.is_absorbing(s)) {
      ep.terminated = true;
      break;
    }
  }
  return ep;
}

Trajectory rollout(const TabularMetricMDP& mdp, const Policy& policy, int horizon,
                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ActionSampler choose = [&](int s, std::mt19937_64& g) {
    return sample_index(policy.pi.row(s), g);
  };
  return sample_episode(mdp, choose, horizon, rng).trajectory;
}

}  // namespace gwil
