#pragma once

#include <span>
#include <vector>

#include "hnplan/scene.hpp"
#include "hnplan/trajectory.hpp"

namespace hnplan::score {

// Fixed metric constants; NAVSIM-style sub-metrics with self-contained
// definitions so results reproduce exactly.
inline constexpr double kTtcHorizon = 1.0;        // seconds of constant-velocity projection
inline constexpr double kComfortAccel = 4.0;      // m/s^2
inline constexpr double kComfortYawRate = 0.8;    // rad/s
inline constexpr double kProgressFloor = 1.0;     // meters, EP denominator floor

struct ScoreBreakdown {
  double nc = 0.0;    // no collision, {0, 1}
  double dac = 0.0;   // drivable area compliance, {0, 1}
  double ep = 0.0;    // ego progress, [0, 1]
  double ttc = 0.0;   // time-to-collision gate, {0, 1}
  double comf = 0.0;  // comfort gate, {0, 1}
  double pdms = 0.0;
};

double compose_pdms(double nc, double dac, double ep, double ttc, double comf);

// Open-loop score of a 4 s trajectory against the stored agent log. The
// trajectory is expressed relative to start (the ego frame origin by
// default), which makes the breakdown invariant under rigid motions applied
// to the scene and start together.
ScoreBreakdown score(const scene::Scene& s, const traj::Trajectory& t,
                     const geom::Pose& start = {});

// Elementwise map of score(); fans out across trajectories with a
// deterministic ordered gather.
std::vector<ScoreBreakdown> score_batch(const scene::Scene& s,
                                        std::span<const traj::Trajectory> trajectories);

struct ClosedLoopScore {
  double rc = 0.0;  // route completion, [0, 1]
  std::vector<double> nc_t, dac_t, ttc_t, comf_t;  // one entry per executed tick
  double hd_score = 0.0;
  bool collided = false;
  int executed_ticks() const { return static_cast<int>(nc_t.size()); }
};

// Replans every 0.5 s, executes the first waypoint, and re-simulates agents
// reactively (they brake when the gap to the ego drops under 5 m). The
// episode ends at max_ticks, on collision, or when the route is complete;
// HD-Score averages the per-tick terms over executed ticks.
ClosedLoopScore closed_loop_rollout(const scene::Scene& s, const scene::Planner& planner,
                                    int max_ticks);

}  // namespace hnplan::score
