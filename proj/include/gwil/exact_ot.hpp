#ifndef GWIL_EXACT_OT_HPP_
#define GWIL_EXACT_OT_HPP_

#include <vector>

#include "gwil/mmspace.hpp"

namespace gwil {

struct TransportPlan {
  Matrix plan;
  double cost = 0.0;
  bool optimal = false;
  int pivots = 0;
};

/// Exact solver for the discrete optimal transport linear program
///
///   min <C, X>  s.t.  X 1 = supply,  X^T 1 = demand,  X >= 0
///
/// using the network simplex method on the bipartite transportation tree.
/// The spanning-tree basis persists across calls to solve(), so a sequence of
/// cost matrices over the same marginals (as in Frank-Wolfe) is warm-started.
///
/// Entering cells follow Dantzig's rule with lexicographic tie-breaking; after
/// a run of degenerate pivots the solver switches to Bland's rule, which
/// cannot cycle. Leaving ties are broken toward the lexicographically smallest
/// cell. Results are therefore fully deterministic.
class TransportSolver {
 public:
  TransportSolver(const Vector& supply, const Vector& demand);

  TransportPlan solve(const Matrix& cost);

  Eigen::Index rows() const { return n_; }
  Eigen::Index cols() const { return m_; }

 private:
  void northwest_corner();
  void compute_potentials(const Matrix& cost);
  // Tree path from row node i to column node (n_ + j), as a node sequence.
  std::vector<int> tree_path(int from, int to);
  void add_edge(int i, int j);
  void remove_edge(int i, int j);

  Eigen::Index n_;
  Eigen::Index m_;
  Vector supply_;
  Vector demand_;
  Matrix flow_;
  std::vector<char> basic_;
  std::vector<std::vector<int>> adj_;
  Vector u_;
  Vector v_;
  std::vector<int> parent_;
  std::vector<int> stack_;
  std::vector<char> seen_;
};

/// One-shot convenience wrapper.
TransportPlan solve_transport(const Vector& supply, const Vector& demand,
                              const Matrix& cost);

}  // namespace gwil

#endif  // GWIL_EXACT_OT_HPP_
