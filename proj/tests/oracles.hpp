#pragma once

// Test-side oracles, independent of the library's computation paths.

#include <cmath>
#include <functional>
#include <vector>

#include "hnplan/learner.hpp"
#include "hnplan/rng.hpp"
#include "hnplan/scene.hpp"
#include "hnplan/trajectory.hpp"

namespace oracles {

using hnplan::kDiffDim;
using hnplan::kHorizonSteps;

// Straightforward re-implementation of the dense forward pass.
inline std::vector<double> naive_mlp_forward(const hnplan::learn::Mlp& net,
                                             const std::vector<double>& input) {
  std::vector<double> x = input;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    int n_in = net.widths()[l];
    int n_out = net.widths()[l + 1];
    std::vector<double> y(static_cast<std::size_t>(n_out));
    for (int o = 0; o < n_out; ++o) {
      double acc = net.bias(l)[static_cast<std::size_t>(o)];
      for (int i = 0; i < n_in; ++i)
        acc += net.weight(l)[static_cast<std::size_t>(o) * n_in + static_cast<std::size_t>(i)] *
               x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = acc;
    }
    if (l + 1 < net.layer_count())
      for (double& v : y) v = v / (1.0 + std::exp(-v)) ;  // x * sigmoid(x)
    x = std::move(y);
  }
  return x;
}

inline std::vector<double> flatten_gradients(const hnplan::learn::Mlp::Gradients& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    out.insert(out.end(), g.w[l].begin(), g.w[l].end());
    out.insert(out.end(), g.b[l].begin(), g.b[l].end());
  }
  return out;
}

// Central-difference directional derivative of loss() along dir in parameter
// space; net is restored afterwards.
inline double directional_fd(hnplan::learn::Mlp& net, const std::vector<double>& dir, double step,
                             const std::function<double()>& loss) {
  std::size_t n = net.parameter_count();
  std::vector<double> saved(n);
  for (std::size_t i = 0; i < n; ++i) saved[i] = net.get_parameter(i);
  for (std::size_t i = 0; i < n; ++i) net.set_parameter(i, saved[i] + step * dir[i]);
  double up = loss();
  for (std::size_t i = 0; i < n; ++i) net.set_parameter(i, saved[i] - step * dir[i]);
  double down = loss();
  for (std::size_t i = 0; i < n; ++i) net.set_parameter(i, saved[i]);
  return (up - down) / (2.0 * step);
}

inline std::vector<double> random_unit_direction(std::size_t n, hnplan::rng::Stream& st) {
  std::vector<double> dir(n);
  double norm_sq = 0.0;
  for (double& v : dir) {
    v = st.normal();
    norm_sq += v * v;
  }
  double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : dir) v *= inv;
  return dir;
}

inline hnplan::traj::Trajectory random_trajectory(hnplan::rng::Stream& st) {
  hnplan::traj::Trajectory t;
  double x = 0.0, y = 0.0, h = 0.0;
  for (int k = 0; k < kHorizonSteps; ++k) {
    x += st.uniform(-1.0, 7.0);
    y += st.uniform(-2.0, 2.0);
    h = hnplan::geom::wrap_angle(h + st.uniform(-0.4, 0.4));
    t.points[k] = {x, y, h};
  }
  return t;
}

// Brute-force collision check at a 0.01 s sweep.
inline bool brute_force_collision(const hnplan::scene::Scene& s, const hnplan::traj::Trajectory& t,
                                  double fine_step = 0.01) {
  using namespace hnplan;
  auto pose_at = [&](double time) -> geom::Pose {
    double u = time / kWaypointDt;
    int k = static_cast<int>(u);
    if (k >= kHorizonSteps) k = kHorizonSteps - 1;
    double frac = u - k;
    geom::Pose a = k == 0 ? geom::Pose{0, 0, 0}
                          : geom::Pose{t.points[k - 1].x, t.points[k - 1].y, t.points[k - 1].h};
    geom::Pose b{t.points[k].x, t.points[k].y, t.points[k].h};
    return {a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac, geom::lerp_angle(a.h, b.h, frac)};
  };
  auto agent_pose_at = [&](const scene::Agent& a, double time) -> geom::Pose {
    double u = time / kSimTick;
    int i = static_cast<int>(u);
    int last = static_cast<int>(a.poses.size()) - 1;
    if (i >= last) return a.poses.back();
    double frac = u - i;
    const geom::Pose& p0 = a.poses[static_cast<std::size_t>(i)];
    const geom::Pose& p1 = a.poses[static_cast<std::size_t>(i) + 1];
    return {p0.x + (p1.x - p0.x) * frac, p0.y + (p1.y - p0.y) * frac,
            geom::lerp_angle(p0.h, p1.h, frac)};
  };
  int steps = static_cast<int>(kHorizonSteps * kWaypointDt / fine_step);
  for (int i = 0; i <= steps; ++i) {
    double time = i * fine_step;
    geom::OrientedBox ego{pose_at(time), s.ego.length, s.ego.width};
    for (const scene::Agent& a : s.agents) {
      geom::OrientedBox box{agent_pose_at(a, time), a.length, a.width};
      if (geom::boxes_overlap(ego, box)) return true;
    }
  }
  return false;
}

}  // namespace oracles
