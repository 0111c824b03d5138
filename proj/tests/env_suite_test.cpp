#include "gwil/env_suite.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <deque>

#include "gwil/error.hpp"

namespace gwil {
namespace {

// Steps taken by the greedy policy from the start until the goal.
int greedy_path_length(const TabularMetricMDP& m, const Policy& pol) {
  int s = 0;
  for (int i = 0; i < m.num_states; ++i) {
    if (m.initial[i] > 0) s = i;
  }
  const auto acts = pol.greedy_actions();
  for (int t = 0; t < 1000; ++t) {
    if (m.is_absorbing(s)) return t;
    Eigen::Index next = 0;
    m.transitions.row(s * m.num_actions + acts[s]).maxCoeff(&next);
    s = static_cast<int>(next);
  }
  return -1;
}

// Breadth-first shortest path on the free cells.
int bfs_distance(const MazeSpec& spec) {
  std::vector<int> dist(static_cast<std::size_t>(spec.width * spec.height), -1);
  std::deque<Cell> q{spec.start};
  dist[static_cast<std::size_t>(spec.start.y * spec.width + spec.start.x)] = 0;
  const int dx[] = {0, 0, -1, 1};
  const int dy[] = {1, -1, 0, 0};
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    for (int d = 0; d < 4; ++d) {
      const Cell n{c.x + dx[d], c.y + dy[d]};
      if (!spec.in_bounds(n) || spec.is_wall(n)) continue;
      auto& v = dist[static_cast<std::size_t>(n.y * spec.width + n.x)];
      if (v < 0) {
        v = dist[static_cast<std::size_t>(c.y * spec.width + c.x)] + 1;
        q.push_back(n);
      }
    }
  }
  return dist[static_cast<std::size_t>(spec.goal.y * spec.width + spec.goal.x)];
}

void expect_conjugate(const MazeSpec& spec) {
  const auto ref = reflect_maze(spec);
  const auto direct = build_maze(ref.spec);
  const auto conj = apply_isometry(build_maze(spec), ref.phi, ref.psi, ref.state_map, ref.action_map);
  EXPECT_EQ(direct.transitions, conj.transitions);
  EXPECT_EQ(direct.rewards, conj.rewards);
  EXPECT_EQ(direct.initial, conj.initial);
  EXPECT_EQ(direct.state_dist, conj.state_dist);
  EXPECT_EQ(direct.action_dist, conj.action_dist);
  EXPECT_EQ(*direct.state_features, *conj.state_features);
  EXPECT_EQ(*direct.action_features, *conj.action_features);
  EXPECT_EQ(direct.absorbing, conj.absorbing);
}

TEST(BuildMaze, CorridorOneStep) {
  const auto spec = builtin_maze("corridor");
  const auto m = build_maze(spec);
  EXPECT_EQ(m.num_states, 2);
  const auto sol = value_iteration(m);
  EXPECT_EQ(sol.policy.greedy_actions()[0], kRight);
  EXPECT_NEAR(sol.expected_return, spec.goal_reward, 1e-12);
}

TEST(BuildMaze, OpenMazePathIsManhattan) {
  const auto spec = builtin_maze("open5");
  const auto m = build_maze(spec);
  EXPECT_EQ(m.num_states, 25);
  const int manhattan = std::abs(spec.goal.x - spec.start.x) + std::abs(spec.goal.y - spec.start.y);
  EXPECT_EQ(greedy_path_length(m, value_iteration(m).policy), manhattan);
}

TEST(BuildMaze, WalledMazesFollowShortestPaths) {
  for (const auto& name : builtin_maze_names()) {
    auto spec = builtin_maze(name);
    spec.sparse = false;
    const auto m = build_maze(spec);
    EXPECT_EQ(greedy_path_length(m, value_iteration(m).policy), bfs_distance(spec)) << name;
    spec.sparse = true;
    const auto ms = build_maze(spec);
    EXPECT_EQ(greedy_path_length(ms, value_iteration(ms).policy), bfs_distance(spec)) << name;
  }
}

TEST(BuildMaze, ActionMetric) {
  const auto m = build_maze(builtin_maze("open5"));
  EXPECT_DOUBLE_EQ(m.action_dist(kUp, kDown), 2.0);
  EXPECT_DOUBLE_EQ(m.action_dist(kLeft, kRight), 2.0);
  EXPECT_DOUBLE_EQ(m.action_dist(kUp, kLeft), std::sqrt(2.0));
}

TEST(BuildMaze, SatisfiesInvariantsWithSlip) {
  auto spec = builtin_maze("maze5");
  spec.slip_prob = 0.2;
  const auto m = build_maze(spec);
  EXPECT_NO_THROW(m.validate());
  // From the start, moving up bumps the wall-free cell above; slips spread 0.2/3.
  const int s0 = spec.state_of(spec.start);
  EXPECT_NEAR(m.p(s0, kUp, spec.state_of({0, 1})), 0.8, 1e-15);
  EXPECT_NEAR(m.p(s0, kUp, spec.state_of({1, 0})), 0.2 / 3.0, 1e-15);
  EXPECT_NEAR(m.p(s0, kUp, s0), 0.4 / 3.0, 1e-15);
}

TEST(BuildMaze, SparseRewardsOnlyEnterGoal) {
  auto spec = builtin_maze("maze5");
  spec.sparse = true;
  spec.slip_prob = 0.1;
  const auto m = build_maze(spec);
  const int goal = spec.state_of(spec.goal);
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      const bool enters = s != goal && m.p(s, a, goal) > 0;
      if (enters) {
        EXPECT_GT(m.rewards(s, a), 0.0);
      } else {
        EXPECT_EQ(m.rewards(s, a), 0.0);
      }
    }
  }
  EXPECT_TRUE(m.is_absorbing(goal));
  EXPECT_EQ(m.p(goal, kLeft, goal), 1.0);
}

TEST(BuildMaze, RejectsBadSpecs) {
  auto spec = builtin_maze("open5");
  spec.walls = {{0, 1}, {1, 0}};
  EXPECT_THROW(build_maze(spec), Infeasible);
  spec = builtin_maze("open5");
  spec.goal = spec.start;
  EXPECT_THROW(build_maze(spec), InvalidInput);
  spec = builtin_maze("open5");
  spec.walls = {spec.goal};
  EXPECT_THROW(build_maze(spec), InvalidInput);
  spec = builtin_maze("open5");
  spec.slip_prob = 1.0;
  EXPECT_THROW(build_maze(spec), InvalidInput);
}

TEST(ReflectMaze, ConjugationIsExact) {
  for (const auto& name : builtin_maze_names()) expect_conjugate(builtin_maze(name));
  auto slippery = builtin_maze("maze5");
  slippery.slip_prob = 0.3;
  expect_conjugate(slippery);
}

TEST(ReflectMaze, SymmetricMazeGivesInvolution) {
  const auto spec = parse_ascii_maze(
      "..G..\n"
      ".#.#.\n"
      ".....\n"
      "..S..\n");
  const auto ref = reflect_maze(spec);
  EXPECT_EQ(to_ascii(ref.spec), to_ascii(spec));
  for (std::size_t i = 0; i < ref.phi.size(); ++i) {
    EXPECT_EQ(ref.phi[static_cast<std::size_t>(ref.phi[i])], static_cast<int>(i));
  }
}

TEST(ReflectMaze, LShapeKeepsOptimalValue) {
  const auto spec = builtin_maze("lshape");
  const auto ref = reflect_maze(spec);
  EXPECT_EQ(to_ascii(ref.spec),
            "###.S\n"
            "###..\n"
            "###..\n"
            ".....\n"
            "G....\n");
  EXPECT_NEAR(value_iteration(build_maze(ref.spec)).expected_return,
              value_iteration(build_maze(spec)).expected_return, 1e-12);
}

TEST(ReflectMaze, TwiceIsIdentity) {
  const auto spec = builtin_maze("maze5");
  const auto back = reflect_maze(reflect_maze(spec).spec);
  EXPECT_EQ(to_ascii(back.spec), to_ascii(spec));
  EXPECT_EQ(back.spec.start, spec.start);
  EXPECT_EQ(back.spec.goal, spec.goal);
}

TEST(AsciiMaze, RoundTrip) {
  const std::string text =
      "...#G\n"
      ".#.#.\n"
      ".#...\n"
      ".###.\n"
      "S....\n";
  const auto spec = parse_ascii_maze(text);
  EXPECT_EQ(spec.width, 5);
  EXPECT_EQ(spec.height, 5);
  EXPECT_EQ(spec.walls.size(), 7u);
  EXPECT_EQ(spec.start, (Cell{0, 0}));
  EXPECT_EQ(spec.goal, (Cell{4, 4}));
  EXPECT_EQ(to_ascii(spec), text);
  EXPECT_EQ(build_maze(spec).num_states, 25 - 7);
}

TEST(AsciiMaze, RejectsMalformed) {
  EXPECT_THROW(parse_ascii_maze(""), InvalidInput);
  EXPECT_THROW(parse_ascii_maze("S.\nG\n"), InvalidInput);
  EXPECT_THROW(parse_ascii_maze("S..\n...\n"), InvalidInput);
  EXPECT_THROW(parse_ascii_maze("SSG\n"), InvalidInput);
}

TEST(ChainEnv, TwoStatesBanditLike) {
  const auto m = build_chain_env(2, 2);
  EXPECT_EQ(m.num_states, 2);
  EXPECT_EQ(m.num_actions, 2);
  const auto sol = value_iteration(m);
  EXPECT_EQ(sol.policy.greedy_actions()[0], 1);
  EXPECT_NEAR(sol.expected_return, 1.0, 1e-12);
}

TEST(ChainEnv, OptimalPolicyPushesRight) {
  const auto m = build_chain_env(6, 5);
  EXPECT_NO_THROW(m.validate());
  const auto acts = value_iteration(m).policy.greedy_actions();
  for (int s = 0; s < 5; ++s) EXPECT_EQ(acts[static_cast<std::size_t>(s)], 4);
  EXPECT_NEAR(value_iteration(m).expected_return, std::pow(0.9, 4), 1e-12);
}

TEST(ChainEnv, CrossDimensionGW) {
  const auto chain = build_chain_env(5, 3);
  const auto maze = build_maze(builtin_maze("open5"));
  const auto tc = rollout(chain, value_iteration(chain).policy, 50, 0);
  const auto tm = rollout(maze, value_iteration(maze).policy, 50, 0);
  EXPECT_EQ(tc.state_dim(), 1);
  EXPECT_EQ(tm.state_dim(), 2);
  const auto res = solve_gw(from_trajectory(tc, {}), from_trajectory(tm, {}), {});
  EXPECT_GE(res.gw_sq, 0.0);
  EXPECT_TRUE(std::isfinite(res.gw_sq));
}

}  // namespace
}  // namespace gwil
