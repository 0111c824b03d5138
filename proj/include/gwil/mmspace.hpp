#ifndef GWIL_MMSPACE_HPP_
#define GWIL_MMSPACE_HPP_

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace gwil {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A finite metric measure space: n atoms, a symmetric zero-diagonal cost
/// matrix and a probability vector. Instances are only produced by the
/// factory functions below, which enforce the invariants.
class MetricMeasureSpace {
 public:
  Eigen::Index size() const { return mass_.size(); }
  const Matrix& dist() const { return dist_; }
  const Vector& mass() const { return mass_; }

  // True when every mass equals 1/n exactly up to 1e-15.
  bool is_uniform() const;

  friend MetricMeasureSpace from_distance_matrix(const Matrix& dist,
                                                 const Vector& mass);

 private:
  MetricMeasureSpace(Matrix dist, Vector mass)
      : dist_(std::move(dist)), mass_(std::move(mass)) {}

  Matrix dist_;
  Vector mass_;
};

struct Step {
  std::vector<double> state;
  std::vector<double> action;
  double env_reward = 0.0;
  int t = 0;
};

/// One episode as an ordered list of state/action feature records.
struct Trajectory {
  std::vector<Step> steps;

  std::size_t size() const { return steps.size(); }
  std::size_t state_dim() const;
  std::size_t action_dim() const;

  // Throws InvalidInput unless nonempty, t strictly increasing from 0 and
  // feature dimensions consistent across steps.
  void validate() const;
};

enum class FeatureMetric { kEuclidean };
enum class Dedup { kNone, kAppendTimestep };

struct TrajectorySpaceOptions {
  FeatureMetric metric = FeatureMetric::kEuclidean;
  Dedup dedup = Dedup::kNone;
  // Scale of the appended step index when dedup == kAppendTimestep.
  double timestep_weight = 0.0;
};

/// Validates and repairs (within 1e-9) a distance matrix and measure.
MetricMeasureSpace from_distance_matrix(const Matrix& dist, const Vector& mass);

/// Empirical occupancy space of a trajectory: one atom per step, uniform mass,
/// distances between concatenated state-action features.
MetricMeasureSpace from_trajectory(const Trajectory& traj,
                                   const TrajectorySpaceOptions& opts = {});

/// Concatenated (state ‖ action [‖ t·w]) feature rows, one per step.
Matrix trajectory_features(const Trajectory& traj,
                           const TrajectorySpaceOptions& opts = {});

/// Sum metric on state-action pairs, row-major in (s, a):
/// d((s,a),(s',a')) = dS[s][s'] + dA[a][a'].
Matrix product_metric(const Matrix& dS, const Matrix& dA);

/// Pairwise Euclidean distances between the rows of `points`.
Matrix euclidean_distances(const Matrix& points);

// Throws InvalidInput if `d` is not square, finite, nonnegative, zero on the
// diagonal and symmetric within `sym_tol`.
void check_distance_matrix(const Matrix& d, double sym_tol = 1e-9);

}  // namespace gwil

#endif  // GWIL_MMSPACE_HPP_
