#include "gwil/gw_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gwil/error.hpp"
#include "gwil/exact_ot.hpp"

namespace gwil {

namespace {

constexpr double kFeasTol = 1e-8;

void check_shapes(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                  const Matrix& u) {
  if (u.rows() != x.size() || u.cols() != y.size()) {
    throw InvalidInput("coupling shape does not match the two spaces");
  }
}

void check_marginals(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                     const Coupling& c) {
  check_shapes(x, y, c.u);
  const double row_err = (c.u.rowwise().sum() - x.mass()).cwiseAbs().maxCoeff();
  const double col_err =
      (c.u.colwise().sum().transpose() - y.mass()).cwiseAbs().maxCoeff();
  if (row_err > kFeasTol || col_err > kFeasTol) {
    throw Infeasible("coupling marginals do not match the space measures");
  }
}

double frobenius(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

Matrix permutation_coupling(const std::vector<int>& perm, double mass) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix u = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) u(i, perm[static_cast<std::size_t>(i)]) = mass;
  return u;
}

Matrix random_matrix(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng,
                     double lo, double hi) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Matrix c(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = unif(rng);
  }
  return c;
}

// Starting points shared by both solvers. `random_start` produces one seeded
// start per call.
template <typename RandomStart>
std::vector<Matrix> collect_starts(const MetricMeasureSpace& x,
                                   const MetricMeasureSpace& y,
                                   const GWOptions& opts, RandomStart random_start) {
  std::vector<Matrix> starts;
  starts.push_back(Coupling::product(x.mass(), y.mass()).u);
  if (opts.northwest_init) {
    starts.push_back(Coupling::northwest(x.mass(), y.mass()).u);
  }
  if (opts.exhaustive && x.size() == y.size() &&
      x.size() <= GWOptions::kMaxExhaustive && x.is_uniform() && y.is_uniform()) {
    std::vector<int> perm(static_cast<std::size_t>(x.size()));
    std::iota(perm.begin(), perm.end(), 0);
    const double mass = 1.0 / static_cast<double>(x.size());
    do {
      starts.push_back(permutation_coupling(perm, mass));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  for (int r = 1; r < opts.restarts; ++r) starts.push_back(random_start());
  for (const Matrix& init : opts.initial_couplings) {
    Coupling c{init, x.mass(), y.mass()};
    check_shapes(x, y, init);
    c.check_feasible(kFeasTol);
    starts.push_back(init);
  }
  return starts;
}

struct Descent {
  Matrix u;
  double value = 0.0;
  std::vector<double> history;
  bool converged = false;
};

Descent frank_wolfe(const Matrix& dx, const Matrix& dy, Matrix u,
                    TransportSolver& lmo, const GWOptions& opts) {
  Descent run;
  Matrix t = detail::tensor_product(dx, dy, u);
  double f = std::max(0.0, frobenius(t, u));
  run.history.push_back(f);
  for (int it = 0; it < opts.max_iters; ++it) {
    const Matrix grad = 2.0 * t;
    const Matrix v = lmo.solve(grad).plan;
    const Matrix d = v - u;
    const double slope = frobenius(grad, d);
    if (-slope <= 1e-14 * (1.0 + std::abs(f))) {
      run.converged = true;
      break;
    }
    // Along u + s d the objective is f + slope s + curv s^2.
    const double curv = frobenius(detail::tensor_product(dx, dy, d), d);
    double step = 1.0;
    if (curv > 0.0) step = std::min(1.0, -slope / (2.0 * curv));
    Matrix next = (1.0 - step) * u + step * v;
    Matrix t_next = detail::tensor_product(dx, dy, next);
    const double f_next = std::max(0.0, frobenius(t_next, next));
    if (f_next > f) {
      run.converged = true;
      break;
    }
    const double decrease = f - f_next;
    u = std::move(next);
    t = std::move(t_next);
    run.history.push_back(f_next);
    const double prev = f;
    f = f_next;
    if (decrease <= opts.rel_tol * std::max(prev, std::numeric_limits<double>::min())) {
      run.converged = true;
      break;
    }
  }
  run.u = std::move(u);
  run.value = f;
  return run;
}

}  // namespace

Coupling Coupling::product(const Vector& row_mass, const Vector& col_mass) {
  return Coupling{row_mass * col_mass.transpose(), row_mass, col_mass};
}

Coupling Coupling::northwest(const Vector& row_mass, const Vector& col_mass) {
  const Eigen::Index n = row_mass.size();
  const Eigen::Index m = col_mass.size();
  Matrix u = Matrix::Zero(n, m);
  Vector a = row_mass;
  Vector b = col_mass;
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  while (i < n && j < m) {
    const double x = std::max(0.0, std::min(a[i], b[j]));
    u(i, j) = x;
    a[i] -= x;
    b[j] -= x;
    if (i == n - 1) {
      ++j;
    } else if (j == m - 1 || a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return Coupling{std::move(u), row_mass, col_mass};
}

Coupling Coupling::transposed() const {
  return Coupling{u.transpose(), col_mass, row_mass};
}

double Coupling::marginal_error() const {
  const double row_err = (u.rowwise().sum() - row_mass).cwiseAbs().maxCoeff();
  const double col_err = (u.colwise().sum().transpose() - col_mass).cwiseAbs().maxCoeff();
  return std::max(row_err, col_err);
}

void Coupling::check_feasible(double tol) const {
  if (u.rows() != row_mass.size() || u.cols() != col_mass.size()) {
    throw InvalidInput("coupling shape does not match its marginals");
  }
  if ((u.array() < 0.0).any()) throw Infeasible("coupling has a negative entry");
  if (marginal_error() > tol) throw Infeasible("coupling violates its marginals");
}

namespace detail {

Matrix tensor_product(const Matrix& dx, const Matrix& dy, const Matrix& u) {
  const Vector p = u.rowwise().sum();
  const Vector q = u.colwise().sum().transpose();
  const Vector left = dx.array().square().matrix() * p;
  const Vector right = dy.array().square().matrix() * q;
  Matrix t = -2.0 * (dx * u * dy);
  t.colwise() += left;
  t.rowwise() += right.transpose();
  return t;
}

std::optional<Matrix> sinkhorn_log(const Matrix& log_kernel, const Vector& a,
                                   const Vector& b, int max_iters, double tol) {
  const Eigen::Index n = a.size();
  const Eigen::Index m = b.size();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto safe_log = [](double v) { return v > 0.0 ? std::log(v) : kNegInf; };
  Vector f = Vector::Zero(n);
  Vector g = Vector::Zero(m);
  Matrix plan(n, m);

  auto lse = [](auto values) {
    const double mx = values.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((values.array() - mx).exp().sum());
  };

  for (int it = 0; it < max_iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      f[i] = a[i] > 0.0 ? safe_log(a[i]) - lse((log_kernel.row(i).transpose() + g).eval())
                        : kNegInf;
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      g[j] = b[j] > 0.0 ? safe_log(b[j]) - lse((log_kernel.col(j) + f).eval()) : kNegInf;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double e = log_kernel(i, j) + f[i] + g[j];
        plan(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
      }
    }
    const double err = (plan.rowwise().sum() - a).cwiseAbs().maxCoeff();
    if (err <= tol) return plan;
  }
  return std::nullopt;
}

}  // namespace detail

double gw_objective(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                    const Coupling& u) {
  check_marginals(x, y, u);
  const Matrix t = detail::tensor_product(x.dist(), y.dist(), u.u);
  return std::max(0.0, frobenius(t, u.u));
}

Matrix gw_gradient(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                   const Coupling& u) {
  check_marginals(x, y, u);
  return 2.0 * detail::tensor_product(x.dist(), y.dist(), u.u);
}

GWSolveResult solve_gw(const MetricMeasureSpace& x, const MetricMeasureSpace& y,
                       const GWOptions& opts) {
  TransportSolver lmo(x.mass(), y.mass());
  std::mt19937_64 rng(opts.seed);
  const auto starts = collect_starts(x, y, opts, [&] {
    return lmo.solve(random_matrix(x.size(), y.size(), rng, 0.0, 1.0)).plan;
  });

  GWSolveResult best;
  bool have_best = false;
  for (const Matrix& start : starts) {
    Descent run = frank_wolfe(x.dist(), y.dist(), start, lmo, opts);
    ++best.restarts_run;
    if (!have_best || run.value < best.gw_sq) {
      have_best = true;
      best.coupling = Coupling{std::move(run.u), x.mass(), y.mass()};
      best.gw_sq = run.value;
      best.objective_history = std::move(run.history);
      best.converged = run.converged;
    }
  }
  return best;
}

GWSolveResult solve_gw_entropic(const MetricMeasureSpace& x,
                                const MetricMeasureSpace& y, double epsilon,
                                const GWOptions& opts) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInput("entropic regularization must be positive");
  }
  std::mt19937_64 rng(opts.seed);
  const auto starts = collect_starts(x, y, opts, [&]() -> Matrix {
    const Matrix noise = random_matrix(x.size(), y.size(), rng, 0.05, 1.0);
    auto plan = detail::sinkhorn_log(noise.array().log().matrix(), x.mass(), y.mass(),
                                     opts.sinkhorn_max_iters, opts.sinkhorn_tol);
    return plan ? *plan : Coupling::product(x.mass(), y.mass()).u;
  });

  GWSolveResult best;
  bool have_best = false;
  for (const Matrix& start : starts) {
    Matrix u = start;
    std::vector<double> history{
        std::max(0.0, frobenius(detail::tensor_product(x.dist(), y.dist(), u), u))};
    bool converged = false;
    for (int it = 0; it < opts.max_iters; ++it) {
      const Matrix grad = 2.0 * detail::tensor_product(x.dist(), y.dist(), u);
      const Matrix log_kernel = (u.array().log() - grad.array() / epsilon).matrix();
      auto next = detail::sinkhorn_log(log_kernel, x.mass(), y.mass(),
                                       opts.sinkhorn_max_iters, opts.sinkhorn_tol);
      if (!next) break;
      const double delta = (*next - u).cwiseAbs().maxCoeff();
      u = std::move(*next);
      history.push_back(
          std::max(0.0, frobenius(detail::tensor_product(x.dist(), y.dist(), u), u)));
      if (delta <= opts.rel_tol) {
        converged = true;
        break;
      }
    }
    ++best.restarts_run;
    if (!have_best || history.back() < best.gw_sq) {
      have_best = true;
      best.gw_sq = history.back();
      best.coupling = Coupling{std::move(u), x.mass(), y.mass()};
      best.objective_history = std::move(history);
      best.converged = converged;
    }
  }
  return best;
}

Matrix squared_euclidean_cost(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw InvalidInput("feature dimensions differ; squared Euclidean cost undefined");
  }
  Matrix c(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      c(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    }
  }
  return c;
}

WassersteinResult wasserstein_sq(const MetricMeasureSpace& x,
                                 const MetricMeasureSpace& y, const Matrix& cost) {
  if (cost.rows() != x.size() || cost.cols() != y.size()) {
    throw InvalidInput("cost matrix shape does not match the two spaces");
  }
  TransportPlan plan = solve_transport(x.mass(), y.mass(), cost);
  return WassersteinResult{plan.cost, Coupling{std::move(plan.plan), x.mass(), y.mass()}};
}

}  // namespace gwil
