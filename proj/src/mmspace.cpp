#include "gwil/mmspace.hpp"

#include <cmath>
#include <string>

#include "gwil/error.hpp"

namespace gwil {

namespace {

constexpr double kRepairTol = 1e-9;

}  // namespace

bool MetricMeasureSpace::is_uniform() const {
  const double expected = 1.0 / static_cast<double>(size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (std::abs(mass_[i] - expected) > 1e-12) return false;
  }
  return true;
}

std::size_t Trajectory::state_dim() const {
  return steps.empty() ? 0 : steps.front().state.size();
}

std::size_t Trajectory::action_dim() const {
  return steps.empty() ? 0 : steps.front().action.size();
}

void Trajectory::validate() const {
  if (steps.empty()) throw InvalidInput("trajectory is empty");
  const std::size_t ds = state_dim();
  const std::size_t da = action_dim();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const Step& s = steps[k];
    if (s.state.size() != ds || s.action.size() != da) {
      throw InvalidInput("trajectory step " + std::to_string(k) +
                         " has inconsistent feature dimensions");
    }
    if (k == 0 ? s.t != 0 : s.t <= steps[k - 1].t) {
      throw InvalidInput("trajectory step indices must increase strictly from 0");
    }
    for (double v : s.state) {
      if (!std::isfinite(v)) throw InvalidInput("non-finite state feature");
    }
    for (double v : s.action) {
      if (!std::isfinite(v)) throw InvalidInput("non-finite action feature");
    }
  }
}

void check_distance_matrix(const Matrix& d, double sym_tol) {
  if (d.rows() != d.cols()) throw InvalidInput("distance matrix is not square");
  if (d.rows() == 0) throw InvalidInput("distance matrix is empty");
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (std::abs(d(i, i)) > sym_tol) {
      throw InvalidInput("distance matrix has a nonzero diagonal entry");
    }
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double v = d(i, j);
      if (!std::isfinite(v)) throw InvalidInput("distance matrix has a non-finite entry");
      if (v < 0.0) throw InvalidInput("distance matrix has a negative entry");
      if (std::abs(v - d(j, i)) > sym_tol) {
        throw InvalidInput("distance matrix asymmetry exceeds tolerance");
      }
    }
  }
}

MetricMeasureSpace from_distance_matrix(const Matrix& dist, const Vector& mass) {
  check_distance_matrix(dist, kRepairTol);
  if (mass.size() != dist.rows()) {
    throw InvalidInput("mass vector length does not match distance matrix");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < mass.size(); ++i) {
    if (!std::isfinite(mass[i])) throw InvalidInput("non-finite mass");
    if (mass[i] < 0.0) throw InvalidInput("negative mass");
    total += mass[i];
  }
  if (total <= 0.0) throw InvalidInput("mass vector is all zero");
  if (std::abs(total - 1.0) > kRepairTol) {
    throw InvalidInput("mass does not sum to 1");
  }

  Matrix sym = 0.5 * (dist + dist.transpose());
  sym.diagonal().setZero();
  // Sums already equal to 1 up to accumulated round-off are kept verbatim so
  // that uniform masses stay exactly 1/n.
  Vector normalized = std::abs(total - 1.0) <= 1e-14 ? mass : Vector(mass / total);
  return MetricMeasureSpace(std::move(sym), std::move(normalized));
}

Matrix trajectory_features(const Trajectory& traj,
                           const TrajectorySpaceOptions& opts) {
  traj.validate();
  const bool with_t = opts.dedup == Dedup::kAppendTimestep;
  const auto ds = static_cast<Eigen::Index>(traj.state_dim());
  const auto da = static_cast<Eigen::Index>(traj.action_dim());
  const Eigen::Index width = ds + (with_t ? 1 : 0) + da;
  Matrix feats(static_cast<Eigen::Index>(traj.size()), width);
  for (Eigen::Index k = 0; k < feats.rows(); ++k) {
    const Step& s = traj.steps[static_cast<std::size_t>(k)];
    Eigen::Index c = 0;
    for (double v : s.state) feats(k, c++) = v;
    if (with_t) feats(k, c++) = opts.timestep_weight * s.t;
    for (double v : s.action) feats(k, c++) = v;
  }
  return feats;
}

Matrix euclidean_distances(const Matrix& points) {
  const Eigen::Index n = points.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (points.row(i) - points.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

MetricMeasureSpace from_trajectory(const Trajectory& traj,
                                   const TrajectorySpaceOptions& opts) {
  if (traj.steps.empty()) throw InvalidInput("trajectory is empty");
  const Matrix feats = trajectory_features(traj, opts);
  const Eigen::Index n = feats.rows();
  Matrix d;
  switch (opts.metric) {
    case FeatureMetric::kEuclidean:
      d = euclidean_distances(feats);
      break;
  }
  return from_distance_matrix(d, Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

Matrix product_metric(const Matrix& dS, const Matrix& dA) {
  check_distance_matrix(dS);
  check_distance_matrix(dA);
  const Eigen::Index ns = dS.rows();
  const Eigen::Index na = dA.rows();
  Matrix d(ns * na, ns * na);
  for (Eigen::Index s = 0; s < ns; ++s) {
    for (Eigen::Index a = 0; a < na; ++a) {
      for (Eigen::Index s2 = 0; s2 < ns; ++s2) {
        for (Eigen::Index a2 = 0; a2 < na; ++a2) {
          d(s * na + a, s2 * na + a2) = dS(s, s2) + dA(a, a2);
        }
      }
    }
  }
  return d;
}

}  // namespace gwil
