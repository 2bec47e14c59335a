#include "hnplan/trajectory.hpp"

#include <cmath>

namespace hnplan::traj {

namespace {
constexpr double kHeadingEps = 1e-6;
constexpr double kStdFloor = 1e-6;
}  // namespace

bool Trajectory::is_finite() const {
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.h)) return false;
  return true;
}

std::array<double, kDiffDim> DiffTrajectory::flatten() const {
  std::array<double, kDiffDim> out{};
  for (int k = 0; k < kHorizonSteps; ++k) {
    out[4 * k + 0] = steps[k].dx;
    out[4 * k + 1] = steps[k].dy;
    out[4 * k + 2] = steps[k].sin_h;
    out[4 * k + 3] = steps[k].cos_h;
  }
  return out;
}

DiffTrajectory DiffTrajectory::unflatten(std::span<const double> v, bool standardized) {
  if (v.size() != kDiffDim) throw ShapeMismatch("unflatten expects 32 entries");
  DiffTrajectory d;
  d.standardized = standardized;
  for (int k = 0; k < kHorizonSteps; ++k) {
    d.steps[k].dx = v[4 * k + 0];
    d.steps[k].dy = v[4 * k + 1];
    d.steps[k].sin_h = v[4 * k + 2];
    d.steps[k].cos_h = v[4 * k + 3];
  }
  return d;
}

Standardizer::Standardizer() {
  mean.fill(0.0);
  std.fill(1.0);
}

Standardizer Standardizer::fit(std::span<const DiffTrajectory> corpus) {
  Standardizer s;
  s.mean.fill(0.0);
  s.std.fill(kStdFloor);
  if (corpus.empty()) return s;
  std::array<double, kDiffDim> sum{}, sum_sq{};
  for (const auto& d : corpus) {
    auto v = d.flatten();
    for (int i = 0; i < kDiffDim; ++i) {
      sum[i] += v[i];
      sum_sq[i] += v[i] * v[i];
    }
  }
  double n = static_cast<double>(corpus.size());
  for (int i = 0; i < kDiffDim; ++i) {
    s.mean[i] = sum[i] / n;
    double var = std::max(0.0, sum_sq[i] / n - s.mean[i] * s.mean[i]);
    s.std[i] = std::max(std::sqrt(var), kStdFloor);
  }
  return s;
}

DiffTrajectory Standardizer::standardize(const DiffTrajectory& d) const {
  if (d.standardized) throw StandardizationMismatch("already standardized");
  auto v = d.flatten();
  for (int i = 0; i < kDiffDim; ++i) v[i] = (v[i] - mean[i]) / std[i];
  return DiffTrajectory::unflatten(v, true);
}

DiffTrajectory Standardizer::destandardize(const DiffTrajectory& d) const {
  if (!d.standardized) throw StandardizationMismatch("not standardized");
  auto v = d.flatten();
  for (int i = 0; i < kDiffDim; ++i) v[i] = v[i] * std[i] + mean[i];
  return DiffTrajectory::unflatten(v, false);
}

DiffTrajectory to_diff(const Trajectory& t) {
  DiffTrajectory d;
  double px = 0.0, py = 0.0;  // step 1 is taken relative to the ego origin
  for (int k = 0; k < kHorizonSteps; ++k) {
    d.steps[k].dx = t.points[k].x - px;
    d.steps[k].dy = t.points[k].y - py;
    d.steps[k].sin_h = std::sin(t.points[k].h);
    d.steps[k].cos_h = std::cos(t.points[k].h);
    px = t.points[k].x;
    py = t.points[k].y;
  }
  return d;
}

Decoded from_diff_lenient(const DiffTrajectory& d) {
  Decoded out;
  double x = 0.0, y = 0.0;
  for (int k = 0; k < kHorizonSteps; ++k) {
    x += d.steps[k].dx;
    y += d.steps[k].dy;
    out.trajectory.points[k].x = x;
    out.trajectory.points[k].y = y;
    double norm = std::hypot(d.steps[k].sin_h, d.steps[k].cos_h);
    if (norm < kHeadingEps) {
      out.degenerate_heading = true;
      out.trajectory.points[k].h = 0.0;
    } else {
      double h = std::atan2(d.steps[k].sin_h, d.steps[k].cos_h);
      out.trajectory.points[k].h = geom::wrap_angle(h);
    }
  }
  return out;
}

Trajectory from_diff(const DiffTrajectory& d) {
  Decoded decoded = from_diff_lenient(d);
  if (decoded.degenerate_heading)
    throw DegenerateHeading("heading pair norm below 1e-6");
  return decoded.trajectory;
}

double l2_distance(const Trajectory& a, const Trajectory& b) {
  double sum = 0.0;
  for (int k = 0; k < kHorizonSteps; ++k)
    sum += std::hypot(a.points[k].x - b.points[k].x, a.points[k].y - b.points[k].y);
  return sum;
}

double l1_diff_distance(const DiffTrajectory& a, const DiffTrajectory& b) {
  if (a.standardized != b.standardized)
    throw StandardizationMismatch("operands differ in standardization");
  auto va = a.flatten();
  auto vb = b.flatten();
  double sum = 0.0;
  for (int i = 0; i < kDiffDim; ++i) sum += std::abs(va[i] - vb[i]);
  return sum;
}

}  // namespace hnplan::traj
