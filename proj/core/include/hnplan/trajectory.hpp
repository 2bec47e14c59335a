#pragma once

#include <array>
#include <span>

#include "hnplan/common.hpp"
#include "hnplan/geometry.hpp"

namespace hnplan::traj {

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double h = 0.0;  // heading, (-pi, pi]
};

// K = 8 waypoints at 0.5 s spacing in the ego frame. The implicit waypoint 0
// is the ego origin (0, 0, 0).
struct Trajectory {
  std::array<Waypoint, kHorizonSteps> points{};
  bool is_finite() const;
};

struct DiffStep {
  double dx = 0.0;
  double dy = 0.0;
  double sin_h = 0.0;
  double cos_h = 1.0;
};

// First-order differential encoding: per-step displacements plus the
// (sin h, cos h) heading pair. Invertible while the heading pair stays away
// from the origin.
struct DiffTrajectory {
  std::array<DiffStep, kHorizonSteps> steps{};
  bool standardized = false;

  std::array<double, kDiffDim> flatten() const;
  static DiffTrajectory unflatten(std::span<const double> v, bool standardized);
};

// Per-dimension affine normalization over the flattened differential,
// fitted on a training corpus. Stds are floored at 1e-6.
struct Standardizer {
  std::array<double, kDiffDim> mean{};
  std::array<double, kDiffDim> std{};

  Standardizer();
  static Standardizer fit(std::span<const DiffTrajectory> corpus);

  DiffTrajectory standardize(const DiffTrajectory& d) const;
  DiffTrajectory destandardize(const DiffTrajectory& d) const;
};

DiffTrajectory to_diff(const Trajectory& t);

struct Decoded {
  Trajectory trajectory;
  bool degenerate_heading = false;  // some step had ||(sin, cos)|| < 1e-6
};

// Cumulative-sum decode; degenerate heading steps fall back to h = 0 and set
// the flag so callers can score the sample down instead of crashing.
Decoded from_diff_lenient(const DiffTrajectory& d);
// Strict decode; throws DegenerateHeading.
Trajectory from_diff(const DiffTrajectory& d);

// Euclidean distance summed over waypoints, positions only.
double l2_distance(const Trajectory& a, const Trajectory& b);
// Elementwise L1 over all 32 differential entries; throws
// StandardizationMismatch when the operands' flags differ.
double l1_diff_distance(const DiffTrajectory& a, const DiffTrajectory& b);

}  // namespace hnplan::traj
