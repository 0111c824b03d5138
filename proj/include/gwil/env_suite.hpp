#ifndef GWIL_ENV_SUITE_HPP_
#define GWIL_ENV_SUITE_HPP_

#include <string>
#include <vector>

#include "gwil/tabular_mdp.hpp"

namespace gwil {

/// Grid cell with x to the right and y upward.
struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

enum MazeAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kNumMazeActions = 4;

struct MazeSpec {
  int width = 0;
  int height = 0;
  std::vector<Cell> walls;
  Cell start;
  Cell goal;
  double step_reward = -0.01;
  double goal_reward = 1.0;
  bool sparse = false;  // only goal-entering moves are rewarded
  double slip_prob = 0.0;
  double gamma = 0.95;

  bool is_wall(Cell c) const;
  bool in_bounds(Cell c) const;
  // Free cells in scan order (y, then x); state i of build_maze is cells()[i].
  std::vector<Cell> cells() const;
  int state_of(Cell c) const;
  void validate() const;
};

/// Gridworld MDP: states are free cells, actions move one cell. A slip sends
/// the agent in one of the other three directions uniformly. Moving into a
/// wall or off the grid stays put. The goal is absorbing with zero reward.
TabularMetricMDP build_maze(const MazeSpec& spec);

struct ReflectedMaze {
  MazeSpec spec;
  std::vector<int> phi;  // state i of the original -> state phi[i] of the mirror
  std::vector<int> psi;  // swaps left and right
  RigidMap state_map;    // x -> width - 1 - x on cell coordinates
  RigidMap action_map;   // mirrors direction vectors
};

/// Mirror image about the vertical center axis.
ReflectedMaze reflect_maze(const MazeSpec& spec);

/// ASCII layout, top row first: '#' wall, 'S' start, 'G' goal, anything else free.
MazeSpec parse_ascii_maze(const std::string& text);
std::string to_ascii(const MazeSpec& spec);

/// 1-D chain of n positions with k push actions spread evenly over [-1, 1].
/// Push p moves right with probability (1 + p) / 2 and left otherwise
/// (clamped at 0). The last position is an absorbing goal worth 1 on entry.
TabularMetricMDP build_chain_env(int n, int k, double gamma = 0.9);

/// Shipped layouts: "corridor" (1x2), "open5", "lshape", "serpentine7".
MazeSpec builtin_maze(const std::string& name);
std::vector<std::string> builtin_maze_names();

}  // namespace gwil

#endif  // GWIL_ENV_SUITE_HPP_
