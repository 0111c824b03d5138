#ifndef GWIL_GW_SOLVER_HPP_
#define GWIL_GW_SOLVER_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "gwil/mmspace.hpp"

namespace gwil {

/// A transport plan together with the marginals it must satisfy.
struct Coupling {
  Matrix u;
  Vector row_mass;
  Vector col_mass;

  static Coupling product(const Vector& row_mass, const Vector& col_mass);
  // Northwest-corner plan: pairs atoms in index order. For equal-size uniform
  // marginals this is the identity coupling diag(1/n).
  static Coupling northwest(const Vector& row_mass, const Vector& col_mass);

  Coupling transposed() const;

  // Largest absolute violation of the two marginal constraints.
  double marginal_error() const;
  // Throws Infeasible on a negative entry or a marginal error above `tol`.
  void check_feasible(double tol = 1e-8) const;
};

struct GWOptions {
  int max_iters = 500;
  double rel_tol = 1e-9;
  // Product coupling plus (restarts - 1) seeded random extreme points.
  int restarts = 5;
  std::uint64_t seed = 0;
  // Adds every permutation coupling as a start when both measures are uniform
  // with n == m <= kMaxExhaustive.
  bool exhaustive = false;
  // Adds the northwest-corner coupling (index-order alignment) as a start.
  bool northwest_init = false;
  // Caller-supplied starting couplings, tried after the ones above.
  std::vector<Matrix> initial_couplings;
  // Sinkhorn settings for the entropic solver.
  int sinkhorn_max_iters = 20000;
  double sinkhorn_tol = 1e-11;

  static constexpr int kMaxExhaustive = 7;
};

struct GWSolveResult {
  Coupling coupling;
  double gw_sq = 0.0;
  std::vector<double> objective_history;
  int restarts_run = 0;
  bool converged = false;
};

/// Squared-loss GW objective sum |dX(i,i') - dY(j,j')|^2 u(i,j) u(i',j'),
/// evaluated through the O(n^2 m + n m^2) factorization.
double gw_objective(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                    const Coupling& u);

/// Gradient of gw_objective with respect to the entries of u.
Matrix gw_gradient(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                   const Coupling& u);

/// Local minimizer of the GW objective by Frank-Wolfe with an exact linear
/// transport oracle and exact line search, best over a set of restarts.
GWSolveResult solve_gw(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                       const GWOptions& opts = {});

/// Entropic variant: KL mirror descent with step 1/epsilon,
/// u <- Sinkhorn(u * exp(-grad(u) / epsilon)), iterated to a fixed point.
/// Zero entries of a start stay zero, so a start on a face stays on it.
/// gw_sq is the unregularized objective at the returned coupling.
GWSolveResult solve_gw_entropic(const MetricMeasureSpace& x,
                                const MetricMeasureSpace& y, double epsilon,
                                const GWOptions& opts = {});

struct WassersteinResult {
  double value = 0.0;
  Coupling coupling;
};

/// Exact linear optimal transport between the two measures for a given
/// cross-cost matrix.
WassersteinResult wasserstein_sq(const MetricMeasureSpace& x,
                                 const MetricMeasureSpace& y, const Matrix& cost);

/// Pairwise squared Euclidean distances between rows of `a` and rows of `b`.
Matrix squared_euclidean_cost(const Matrix& a, const Matrix& b);

namespace detail {

// L (x) u for the squared loss: constC - 2 dX u dY with constC built from the
// row and column sums of u. Shared by the objective, the gradient and the
// pseudo-reward decomposition.
Matrix tensor_product(const Matrix& dx, const Matrix& dy, const Matrix& u);

// Entropic projection of exp(log_kernel) onto the coupling polytope, in the
// log domain. Returns nullopt when the tolerance is not reached.
std::optional<Matrix> sinkhorn_log(const Matrix& log_kernel, const Vector& a,
                                   const Vector& b, int max_iters, double tol);

}  // namespace detail

}  // namespace gwil

#endif  // GWIL_GW_SOLVER_HPP_
