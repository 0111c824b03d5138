#include "gwil/env_suite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <sstream>

#include "gwil/error.hpp"

namespace gwil {

namespace {

constexpr std::array<Cell, kNumMazeActions> kMoves{{{0, 1}, {0, -1}, {-1, 0}, {1, 0}}};

Cell step_from(const MazeSpec& spec, Cell c, int dir) {
  const Cell next{c.x + kMoves[static_cast<std::size_t>(dir)].x,
                  c.y + kMoves[static_cast<std::size_t>(dir)].y};
  if (!spec.in_bounds(next) || spec.is_wall(next)) return c;
  return next;
}

Matrix action_directions() {
  Matrix dirs(kNumMazeActions, 2);
  for (int a = 0; a < kNumMazeActions; ++a) {
    dirs(a, 0) = kMoves[static_cast<std::size_t>(a)].x;
    dirs(a, 1) = kMoves[static_cast<std::size_t>(a)].y;
  }
  return dirs;
}

bool reachable(const MazeSpec& spec, Cell from, Cell to) {
  std::vector<char> seen(static_cast<std::size_t>(spec.width * spec.height), 0);
  std::deque<Cell> queue{from};
  seen[static_cast<std::size_t>(from.y * spec.width + from.x)] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == to) return true;
    for (int d = 0; d < kNumMazeActions; ++d) {
      const Cell n = step_from(spec, c, d);
      auto& mark = seen[static_cast<std::size_t>(n.y * spec.width + n.x)];
      if (!mark) {
        mark = 1;
        queue.push_back(n);
      }
    }
  }
  return false;
}

MazeSpec from_rows(const std::vector<std::string>& rows) {
  MazeSpec spec;
  spec.height = static_cast<int>(rows.size());
  spec.width = static_cast<int>(rows.front().size());
  for (int r = 0; r < spec.height; ++r) {
    const std::string& line = rows[static_cast<std::size_t>(r)];
    const int y = spec.height - 1 - r;
    for (int x = 0; x < spec.width; ++x) {
      switch (line[static_cast<std::size_t>(x)]) {
        case '#': spec.walls.push_back({x, y}); break;
        case 'S': spec.start = {x, y}; break;
        case 'G': spec.goal = {x, y}; break;
        default: break;
      }
    }
  }
  return spec;
}

}  // namespace

bool MazeSpec::is_wall(Cell c) const {
  return std::find(walls.begin(), walls.end(), c) != walls.end();
}

bool MazeSpec::in_bounds(Cell c) const {
  return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
}

std::vector<Cell> MazeSpec::cells() const {
  std::vector<Cell> out;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!is_wall({x, y})) out.push_back({x, y});
    }
  }
  return out;
}

int MazeSpec::state_of(Cell c) const {
  const auto all = cells();
  const auto it = std::find(all.begin(), all.end(), c);
  if (it == all.end()) throw InvalidInput("cell is not a free maze cell");
  return static_cast<int>(it - all.begin());
}

void MazeSpec::validate() const {
  if (width < 1 || height < 1) throw InvalidInput("maze needs positive width and height");
  for (const Cell& w : walls) {
    if (!in_bounds(w)) throw InvalidInput("wall outside the maze");
  }
  if (!in_bounds(start) || !in_bounds(goal)) throw InvalidInput("start or goal outside the maze");
  if (is_wall(start) || is_wall(goal)) throw InvalidInput("start or goal is a wall");
  if (start == goal) throw InvalidInput("start and goal coincide");
  if (!(slip_prob >= 0.0 && slip_prob < 1.0)) throw InvalidInput("slip_prob must lie in [0, 1)");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("discount must lie in [0, 1)");
  if (!reachable(*this, start, goal)) throw Infeasible("maze goal is unreachable from the start");
}

TabularMetricMDP build_maze(const MazeSpec& spec) {
  spec.validate();
  const auto cells = spec.cells();
  const int ns = static_cast<int>(cells.size());
  const int na = kNumMazeActions;
  std::vector<int> index(static_cast<std::size_t>(spec.width * spec.height), -1);
  for (int s = 0; s < ns; ++s) {
    const Cell c = cells[static_cast<std::size_t>(s)];
    index[static_cast<std::size_t>(c.y * spec.width + c.x)] = s;
  }
  const int goal = index[static_cast<std::size_t>(spec.goal.y * spec.width + spec.goal.x)];
  const double step_reward = spec.sparse ? 0.0 : spec.step_reward;

  TabularMetricMDP m;
  m.num_states = ns;
  m.num_actions = na;
  m.gamma = spec.gamma;
  m.transitions = Matrix::Zero(ns * na, ns);
  m.rewards = Matrix::Zero(ns, na);
  m.initial = Vector::Zero(ns);
  m.initial[index[static_cast<std::size_t>(spec.start.y * spec.width + spec.start.x)]] = 1.0;
  m.absorbing.assign(static_cast<std::size_t>(ns), false);
  m.absorbing[static_cast<std::size_t>(goal)] = true;

  for (int s = 0; s < ns; ++s) {
    const Cell c = cells[static_cast<std::size_t>(s)];
    for (int a = 0; a < na; ++a) {
      const int row = s * na + a;
      if (s == goal) {
        m.transitions(row, s) = 1.0;
        continue;
      }
      // Probabilities are assembled from counts so that mirrored mazes get
      // bit-identical entries regardless of direction order.
      std::vector<int> slips(static_cast<std::size_t>(ns), 0);
      int intended = -1;
      for (int d = 0; d < na; ++d) {
        const Cell n = step_from(spec, c, d);
        const int t = index[static_cast<std::size_t>(n.y * spec.width + n.x)];
        if (d == a) {
          intended = t;
        } else {
          ++slips[static_cast<std::size_t>(t)];
        }
      }
      for (int t = 0; t < ns; ++t) {
        double p = slips[static_cast<std::size_t>(t)] * (spec.slip_prob / 3.0);
        if (t == intended) p += 1.0 - spec.slip_prob;
        m.transitions(row, t) = p;
      }
      const double p_goal = m.transitions(row, goal);
      m.rewards(s, a) = p_goal * spec.goal_reward + (1.0 - p_goal) * step_reward;
    }
  }

  Matrix pos(ns, 2);
  for (int s = 0; s < ns; ++s) {
    pos(s, 0) = cells[static_cast<std::size_t>(s)].x;
    pos(s, 1) = cells[static_cast<std::size_t>(s)].y;
  }
  const Matrix dirs = action_directions();
  m.state_dist = euclidean_distances(pos);
  m.action_dist = euclidean_distances(dirs);
  m.state_features = pos;
  m.action_features = dirs;
  return m;
}

ReflectedMaze reflect_maze(const MazeSpec& spec) {
  spec.validate();
  auto mirror = [&](Cell c) { return Cell{spec.width - 1 - c.x, c.y}; };
  ReflectedMaze out;
  out.spec = spec;
  out.spec.walls.clear();
  for (const Cell& w : spec.walls) out.spec.walls.push_back(mirror(w));
  std::sort(out.spec.walls.begin(), out.spec.walls.end(),
            [](Cell l, Cell r) { return l.y != r.y ? l.y < r.y : l.x < r.x; });
  out.spec.start = mirror(spec.start);
  out.spec.goal = mirror(spec.goal);

  const auto src = spec.cells();
  for (const Cell& c : src) out.phi.push_back(out.spec.state_of(mirror(c)));
  out.psi = {kUp, kDown, kRight, kLeft};

  Matrix flip = Matrix::Identity(2, 2);
  flip(0, 0) = -1.0;
  Vector shift = Vector::Zero(2);
  shift[0] = spec.width - 1;
  out.state_map = RigidMap{flip, shift};
  out.action_map = RigidMap{flip, Vector::Zero(2)};
  return out;
}

MazeSpec parse_ascii_maze(const std::string& text) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw InvalidInput("empty ASCII maze");
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw InvalidInput("ASCII maze rows differ in length");
  }
  int starts = 0;
  int goals = 0;
  for (const auto& r : rows) {
    starts += static_cast<int>(std::count(r.begin(), r.end(), 'S'));
    goals += static_cast<int>(std::count(r.begin(), r.end(), 'G'));
  }
  if (starts != 1 || goals != 1) throw InvalidInput("ASCII maze needs exactly one S and one G");
  return from_rows(rows);
}

std::string to_ascii(const MazeSpec& spec) {
  std::string out;
  for (int y = spec.height - 1; y >= 0; --y) {
    for (int x = 0; x < spec.width; ++x) {
      const Cell c{x, y};
      if (c == spec.start) {
        out += 'S';
      } else if (c == spec.goal) {
        out += 'G';
      } else {
        out += spec.is_wall(c) ? '#' : '.';
      }
    }
    out += '\n';
  }
  return out;
}

TabularMetricMDP build_chain_env(int n, int k, double gamma) {
  if (n < 2 || k < 2) throw InvalidInput("chain needs n >= 2 and k >= 2");
  TabularMetricMDP m;
  m.num_states = n;
  m.num_actions = k;
  m.gamma = gamma;
  m.transitions = Matrix::Zero(n * k, n);
  m.rewards = Matrix::Zero(n, k);
  m.initial = Vector::Zero(n);
  m.initial[0] = 1.0;
  m.absorbing.assign(static_cast<std::size_t>(n), false);
  m.absorbing[static_cast<std::size_t>(n - 1)] = true;
  Matrix push(k, 1);
  for (int a = 0; a < k; ++a) push(a, 0) = -1.0 + 2.0 * a / (k - 1);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) {
      const int row = s * k + a;
      if (s == n - 1) {
        m.transitions(row, s) = 1.0;
        continue;
      }
      const double right = (1.0 + push(a, 0)) / 2.0;
      m.transitions(row, s + 1) += right;
      m.transitions(row, std::max(s - 1, 0)) += 1.0 - right;
      if (s + 1 == n - 1) m.rewards(s, a) = right;
    }
  }
  Matrix pos(n, 1);
  for (int s = 0; s < n; ++s) pos(s, 0) = s;
  m.state_features = pos;
  m.action_features = push;
  m.state_dist = euclidean_distances(pos);
  m.action_dist = euclidean_distances(push);
  return m;
}

MazeSpec builtin_maze(const std::string& name) {
  if (name == "corridor") return parse_ascii_maze("SG\n");
  if (name == "open5") {
    return parse_ascii_maze(
        "....G\n"
        ".....\n"
        ".....\n"
        ".....\n"
        "S....\n");
  }
  if (name == "maze5") {
    return parse_ascii_maze(
        "...#G\n"
        ".#.#.\n"
        ".#...\n"
        ".###.\n"
        "S....\n");
  }
  if (name == "lshape") {
    return parse_ascii_maze(
        "S.###\n"
        "..###\n"
        "..###\n"
        ".....\n"
        "....G\n");
  }
  if (name == "serpentine7") {
    MazeSpec spec = parse_ascii_maze(
        "G......\n"
        "######.\n"
        ".......\n"
        ".######\n"
        ".......\n"
        "######.\n"
        "S......\n");
    spec.sparse = true;
    return spec;
  }
  throw InvalidInput("unknown builtin maze: " + name);
}

std::vector<std::string> builtin_maze_names() {
  return {"corridor", "open5", "maze5", "lshape", "serpentine7"};
}

}  // namespace gwil
