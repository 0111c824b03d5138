#include "gwil/exact_ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gwil/error.hpp"

namespace gwil {

namespace {

constexpr double kMarginalTol = 1e-9;

}  // namespace

TransportSolver::TransportSolver(const Vector& supply, const Vector& demand)
    : n_(supply.size()), m_(demand.size()), supply_(supply), demand_(demand) {
  if (n_ == 0 || m_ == 0) throw InvalidInput("transport marginals must be nonempty");
  if ((supply.array() < 0.0).any() || (demand.array() < 0.0).any()) {
    throw InvalidInput("transport marginals must be nonnegative");
  }
  if (std::abs(supply.sum() - demand.sum()) > kMarginalTol) {
    throw Infeasible("transport marginals have different total mass");
  }
  const auto nodes = static_cast<std::size_t>(n_ + m_);
  adj_.assign(nodes, {});
  parent_.assign(nodes, -1);
  seen_.assign(nodes, 0);
  u_ = Vector::Zero(n_);
  v_ = Vector::Zero(m_);
  northwest_corner();
}

void TransportSolver::add_edge(int i, int j) {
  basic_[static_cast<std::size_t>(i * m_ + j)] = 1;
  adj_[static_cast<std::size_t>(i)].push_back(static_cast<int>(n_) + j);
  adj_[static_cast<std::size_t>(n_ + j)].push_back(i);
}

void TransportSolver::remove_edge(int i, int j) {
  basic_[static_cast<std::size_t>(i * m_ + j)] = 0;
  auto drop = [](std::vector<int>& list, int node) {
    list.erase(std::find(list.begin(), list.end(), node));
  };
  drop(adj_[static_cast<std::size_t>(i)], static_cast<int>(n_) + j);
  drop(adj_[static_cast<std::size_t>(n_ + j)], i);
}

// Staircase initial basis: exactly n + m - 1 cells forming a spanning tree,
// including zero-flow cells where a row and a column exhaust together.
void TransportSolver::northwest_corner() {
  flow_ = Matrix::Zero(n_, m_);
  basic_.assign(static_cast<std::size_t>(n_ * m_), 0);
  Vector a = supply_;
  Vector b = demand_;
  int i = 0;
  int j = 0;
  while (true) {
    const double x = std::max(0.0, std::min(a[i], b[j]));
    flow_(i, j) = x;
    add_edge(i, j);
    a[i] -= x;
    b[j] -= x;
    if (i == n_ - 1 && j == m_ - 1) break;
    if (i == n_ - 1) {
      ++j;
    } else if (j == m_ - 1) {
      ++i;
    } else if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
}

void TransportSolver::compute_potentials(const Matrix& cost) {
  std::fill(seen_.begin(), seen_.end(), 0);
  stack_.clear();
  stack_.push_back(0);
  seen_[0] = 1;
  u_[0] = 0.0;
  while (!stack_.empty()) {
    const int node = stack_.back();
    stack_.pop_back();
    for (int next : adj_[static_cast<std::size_t>(node)]) {
      if (seen_[static_cast<std::size_t>(next)]) continue;
      seen_[static_cast<std::size_t>(next)] = 1;
      if (node < n_) {
        const int col = next - static_cast<int>(n_);
        v_[col] = cost(node, col) - u_[node];
      } else {
        const int col = node - static_cast<int>(n_);
        u_[next] = cost(next, col) - v_[col];
      }
      stack_.push_back(next);
    }
  }
}

std::vector<int> TransportSolver::tree_path(int from, int to) {
  std::fill(seen_.begin(), seen_.end(), 0);
  stack_.clear();
  stack_.push_back(from);
  seen_[static_cast<std::size_t>(from)] = 1;
  parent_[static_cast<std::size_t>(from)] = -1;
  while (!stack_.empty()) {
    const int node = stack_.back();
    stack_.pop_back();
    if (node == to) break;
    for (int next : adj_[static_cast<std::size_t>(node)]) {
      if (seen_[static_cast<std::size_t>(next)]) continue;
      seen_[static_cast<std::size_t>(next)] = 1;
      parent_[static_cast<std::size_t>(next)] = node;
      stack_.push_back(next);
    }
  }
  std::vector<int> path;
  for (int node = to; node != -1; node = parent_[static_cast<std::size_t>(node)]) {
    path.push_back(node);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

TransportPlan TransportSolver::solve(const Matrix& cost) {
  if (cost.rows() != n_ || cost.cols() != m_) {
    throw InvalidInput("cost matrix shape does not match transport marginals");
  }
  if (!cost.allFinite()) throw InvalidInput("cost matrix has non-finite entries");

  const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
  const double eps = 1e-12 * scale;
  const int degenerate_limit = static_cast<int>(n_ + m_);
  const int max_pivots = 200 * static_cast<int>((n_ + m_) * (n_ + m_)) + 1000;

  TransportPlan result;
  bool bland = false;
  int degenerate_run = 0;
  for (;;) {
    compute_potentials(cost);

    int enter_i = -1;
    int enter_j = -1;
    double best = -eps;
    for (int i = 0; i < n_ && !(bland && enter_i >= 0); ++i) {
      const double ui = u_[i];
      for (int j = 0; j < m_; ++j) {
        if (basic_[static_cast<std::size_t>(i * m_ + j)]) continue;
        const double reduced = cost(i, j) - ui - v_[j];
        if (reduced < best) {
          best = reduced;
          enter_i = i;
          enter_j = j;
          if (bland) break;
        }
      }
    }
    if (enter_i < 0) {
      result.optimal = true;
      break;
    }
    if (result.pivots >= max_pivots) break;

    // Cycle: entering cell (+), then alternating -, +, ... along the tree path
    // from row enter_i to column enter_j.
    const std::vector<int> path = tree_path(enter_i, static_cast<int>(n_) + enter_j);
    double theta = std::numeric_limits<double>::infinity();
    int leave_i = -1;
    int leave_j = -1;
    for (std::size_t k = 0; k + 1 < path.size(); k += 2) {
      const int r = path[k];
      const int c = path[k + 1] - static_cast<int>(n_);
      const double x = flow_(r, c);
      if (x < theta || (x == theta && std::make_pair(r, c) < std::make_pair(leave_i, leave_j))) {
        theta = x;
        leave_i = r;
        leave_j = c;
      }
    }
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const bool minus = (k % 2 == 0);
      const int a = path[k];
      const int b = path[k + 1];
      const int r = minus ? a : b;
      const int c = (minus ? b : a) - static_cast<int>(n_);
      flow_(r, c) += minus ? -theta : theta;
    }
    flow_(enter_i, enter_j) = theta;
    flow_(leave_i, leave_j) = 0.0;
    remove_edge(leave_i, leave_j);
    add_edge(enter_i, enter_j);
    ++result.pivots;

    if (theta <= 0.0) {
      if (++degenerate_run > degenerate_limit) bland = true;
    } else {
      degenerate_run = 0;
    }
  }

  result.plan = flow_;
  result.cost = (cost.array() * flow_.array()).sum();
  return result;
}

TransportPlan solve_transport(const Vector& supply, const Vector& demand,
                              const Matrix& cost) {
  TransportSolver solver(supply, demand);
  return solver.solve(cost);
}

}  // namespace gwil
