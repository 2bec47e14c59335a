#include "hnplan/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "hnplan/parallel.hpp"

namespace hnplan::score {

namespace {

constexpr int kSweepTicks = kHorizonSteps * kSubTicksPerStep;  // 40

geom::Pose interpolate_pose(const geom::Pose& a, const geom::Pose& b, double u) {
  return {a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u, geom::lerp_angle(a.h, b.h, u)};
}

// Ego pose along the planned trajectory at sub-tick j (kSimTick steps);
// the motion starts at the ego origin.
geom::Pose pose_at_subtick(const traj::Trajectory& t, int j) {
  int k = j / kSubTicksPerStep;
  int r = j % kSubTicksPerStep;
  geom::Pose prev = k == 0 ? geom::Pose{0.0, 0.0, 0.0}
                           : geom::Pose{t.points[k - 1].x, t.points[k - 1].y, t.points[k - 1].h};
  if (r == 0) return prev;
  geom::Pose next = {t.points[k].x, t.points[k].y, t.points[k].h};
  return interpolate_pose(prev, next, static_cast<double>(r) / kSubTicksPerStep);
}

bool footprint_in_corridor(const scene::Corridor& corridor, const geom::OrientedBox& box) {
  for (const geom::Vec2& c : box.corners())
    if (!corridor.contains(c)) return false;
  return true;
}

double trajectory_progress(const scene::Scene& s, const traj::Trajectory& t,
                           const geom::Pose& start) {
  const geom::Polyline& line = s.corridor.centerline;
  geom::Pose last = geom::compose(
      start, {t.points[kHorizonSteps - 1].x, t.points[kHorizonSteps - 1].y, 0.0});
  double s_end = line.project(last.position()).s;
  double s_start = line.project(start.position()).s;
  return std::max(0.0, s_end - s_start);
}

}  // namespace

double compose_pdms(double nc, double dac, double ep, double ttc, double comf) {
  return nc * dac * (5.0 * ep + 5.0 * ttc + 2.0 * comf) / 12.0;
}

ScoreBreakdown score(const scene::Scene& s, const traj::Trajectory& t, const geom::Pose& start) {
  ScoreBreakdown b;
  if (!t.is_finite()) return b;  // degenerate plans gate to zero

  geom::OrientedBox ego_box{{}, s.ego.length, s.ego.width};
  auto world_pose = [&](int j) { return geom::compose(start, pose_at_subtick(t, j)); };

  // NC: swept overlap against the stored agent log at kSimTick resolution.
  bool collision = false;
  for (int j = 0; j <= kSweepTicks && !collision; ++j) {
    ego_box.pose = world_pose(j);
    for (const scene::Agent& a : s.agents) {
      geom::OrientedBox agent_box{scene::agent_pose_at_tick(a, j), a.length, a.width};
      if (geom::boxes_overlap(ego_box, agent_box)) {
        collision = true;
        break;
      }
    }
  }
  b.nc = collision ? 0.0 : 1.0;

  // DAC: every swept footprint stays inside the corridor polygon.
  bool inside = true;
  for (int j = 0; j <= kSweepTicks && inside; ++j) {
    ego_box.pose = world_pose(j);
    inside = footprint_in_corridor(s.corridor, ego_box);
  }
  b.dac = inside ? 1.0 : 0.0;

  // Per-waypoint speeds; the implicit start point is the origin.
  std::array<double, kHorizonSteps> speed{};
  {
    double px = 0.0, py = 0.0;
    for (int k = 0; k < kHorizonSteps; ++k) {
      speed[k] = std::hypot(t.points[k].x - px, t.points[k].y - py) / kWaypointDt;
      px = t.points[k].x;
      py = t.points[k].y;
    }
  }

  // TTC: 1 s constant-velocity projection from each waypoint; agents follow
  // their log during the projection window.
  bool ttc_ok = true;
  for (int k = 0; k < kHorizonSteps && ttc_ok; ++k) {
    geom::Pose wp = geom::compose(start, {t.points[k].x, t.points[k].y, t.points[k].h});
    geom::Vec2 dir = {std::cos(wp.h), std::sin(wp.h)};
    int base_tick = (k + 1) * kSubTicksPerStep;
    int steps = static_cast<int>(kTtcHorizon / kSimTick);
    for (int j = 1; j <= steps && ttc_ok; ++j) {
      double advance = speed[k] * kSimTick * j;
      ego_box.pose = {wp.x + dir.x * advance, wp.y + dir.y * advance, wp.h};
      for (const scene::Agent& a : s.agents) {
        geom::OrientedBox agent_box{scene::agent_pose_at_tick(a, base_tick + j), a.length, a.width};
        if (geom::boxes_overlap(ego_box, agent_box)) {
          ttc_ok = false;
          break;
        }
      }
    }
  }
  b.ttc = ttc_ok ? 1.0 : 0.0;

  // Comfort: bounded accelerations between trajectory steps and bounded
  // heading rate from the ego heading onward.
  bool comf_ok = true;
  for (int k = 1; k < kHorizonSteps; ++k)
    if (std::abs(speed[k] - speed[k - 1]) / kWaypointDt > kComfortAccel) comf_ok = false;
  double prev_h = 0.0;
  for (int k = 0; k < kHorizonSteps; ++k) {
    if (std::abs(geom::wrap_angle(t.points[k].h - prev_h)) / kWaypointDt > kComfortYawRate)
      comf_ok = false;
    prev_h = t.points[k].h;
  }
  b.comf = comf_ok ? 1.0 : 0.0;

  double expert_progress = trajectory_progress(s, s.expert, start);
  b.ep = std::clamp(trajectory_progress(s, t, start) / std::max(expert_progress, kProgressFloor),
                    0.0, 1.0);

  b.pdms = compose_pdms(b.nc, b.dac, b.ep, b.ttc, b.comf);
  return b;
}

std::vector<ScoreBreakdown> score_batch(const scene::Scene& s,
                                        std::span<const traj::Trajectory> trajectories) {
  std::vector<ScoreBreakdown> out(trajectories.size());
  parallel_for(trajectories.size(), [&](std::size_t i) { out[i] = score(s, trajectories[i]); });
  return out;
}

namespace {

struct ReactiveAgent {
  const scene::Agent* spec = nullptr;
  double arc = 0.0;
  double speed = 0.0;
};

geom::Pose reactive_pose(const scene::Corridor& corridor, const ReactiveAgent& ra, double t) {
  const geom::Polyline& line = corridor.centerline;
  double lat = ra.spec->lateral_at(t);
  double s_clamped = std::clamp(ra.arc, 0.0, line.length());
  geom::Vec2 base = line.point_at(s_clamped);
  double h = line.heading_at(s_clamped);
  if (ra.arc > line.length())
    base = base + geom::Vec2{std::cos(h), std::sin(h)} * (ra.arc - line.length());
  geom::Vec2 n = {-std::sin(h), std::cos(h)};
  return {base.x + n.x * lat, base.y + n.y * lat, h};
}

constexpr double kReactiveGap = 5.0;
constexpr double kReactiveBrake = 4.0;
constexpr double kReactiveAccel = 2.0;

void advance_reactive(const scene::Scene& s, std::vector<ReactiveAgent>& agents, double t,
                      const geom::Pose& ego_pose, double ego_lat, double ego_arc) {
  for (ReactiveAgent& ra : agents) {
    double target = ra.spec->profile_speed(t);
    double gap_ahead = ego_arc - ra.arc - 0.5 * (ra.spec->length + s.ego.length);
    bool lane_conflict =
        std::abs(ra.spec->lateral_at(t) - ego_lat) < 0.5 * (ra.spec->width + s.ego.width) + 0.3;
    if (lane_conflict && ego_arc > ra.arc && gap_ahead < kReactiveGap) {
      ra.speed = std::max(0.0, ra.speed - kReactiveBrake * kSimTick);
    } else if (ra.speed < target) {
      ra.speed = std::min(target, ra.speed + kReactiveAccel * kSimTick);
    } else {
      ra.speed = target;
    }
    ra.arc += ra.speed * kSimTick;
  }
  (void)ego_pose;
}

}  // namespace

ClosedLoopScore closed_loop_rollout(const scene::Scene& s, const scene::Planner& planner,
                                    int max_ticks) {
  ClosedLoopScore out;
  const geom::Polyline& line = s.corridor.centerline;
  double route_len = line.length() - s.start_arc;
  if (route_len <= 0.0 || max_ticks < 1) return out;

  std::vector<ReactiveAgent> agents;
  agents.reserve(s.agents.size());
  for (const scene::Agent& a : s.agents) agents.push_back({&a, a.start_arc, a.profile_speed(0.0)});

  geom::Pose ego_pose{0.0, 0.0, 0.0};
  double ego_v = s.ego.velocity;
  double ego_a = s.ego.accel;
  double ego_arc = s.start_arc;

  for (int tick = 0; tick < max_ticks; ++tick) {
    double t0 = tick * kWaypointDt;

    scene::SceneView view;
    view.corridor = &s.corridor;
    view.command = s.command;
    view.ego_pose = ego_pose;
    view.ego_velocity = ego_v;
    view.ego_accel = ego_a;
    view.ego_length = s.ego.length;
    view.ego_width = s.ego.width;
    for (const ReactiveAgent& ra : agents) {
      geom::Pose p = reactive_pose(s.corridor, ra, t0);
      geom::Vec2 vel = {ra.speed * std::cos(p.h), ra.speed * std::sin(p.h)};
      view.agents.push_back({ra.spec->id, ra.spec->length, ra.spec->width, p, vel});
    }

    traj::Trajectory plan;
    bool have_plan = true;
    try {
      plan = planner.plan(view);
    } catch (const DegenerateHeading&) {
      have_plan = false;  // hold position for this tick
    }
    geom::Pose target = ego_pose;
    if (have_plan && plan.is_finite())
      target = geom::compose(ego_pose, {plan.points[0].x, plan.points[0].y, plan.points[0].h});

    // Execute the first waypoint over five sub-ticks; agents react at the
    // same resolution.
    bool nc_ok = true, dac_ok = true;
    geom::OrientedBox ego_box{{}, s.ego.length, s.ego.width};
    for (int j = 1; j <= kSubTicksPerStep; ++j) {
      double u = static_cast<double>(j) / kSubTicksPerStep;
      geom::Pose sub = interpolate_pose(ego_pose, target, u);
      double t_sub = t0 + j * kSimTick;
      auto proj = line.project(sub.position());
      advance_reactive(s, agents, t_sub, sub, proj.lateral, proj.s);

      ego_box.pose = sub;
      for (const ReactiveAgent& ra : agents) {
        geom::OrientedBox agent_box{reactive_pose(s.corridor, ra, t_sub), ra.spec->length,
                                    ra.spec->width};
        if (geom::boxes_overlap(ego_box, agent_box)) nc_ok = false;
      }
      if (!footprint_in_corridor(s.corridor, ego_box)) dac_ok = false;
    }

    double v_new = std::hypot(target.x - ego_pose.x, target.y - ego_pose.y) / kWaypointDt;
    bool comf_ok = std::abs(v_new - ego_v) / kWaypointDt <= kComfortAccel &&
                   std::abs(geom::wrap_angle(target.h - ego_pose.h)) / kWaypointDt <= kComfortYawRate;

    // TTC from the post-tick state: both ego and agents coast for 1 s.
    bool ttc_ok = true;
    {
      geom::Vec2 dir = {std::cos(target.h), std::sin(target.h)};
      int steps = static_cast<int>(kTtcHorizon / kSimTick);
      double t_end = t0 + kWaypointDt;
      for (int j = 1; j <= steps && ttc_ok; ++j) {
        double dt = j * kSimTick;
        ego_box.pose = {target.x + dir.x * v_new * dt, target.y + dir.y * v_new * dt, target.h};
        for (const ReactiveAgent& ra : agents) {
          geom::Pose p = reactive_pose(s.corridor, ra, t_end);
          geom::Vec2 adir = {std::cos(p.h), std::sin(p.h)};
          geom::OrientedBox agent_box{
              {p.x + adir.x * ra.speed * dt, p.y + adir.y * ra.speed * dt, p.h},
              ra.spec->length,
              ra.spec->width};
          if (geom::boxes_overlap(ego_box, agent_box)) ttc_ok = false;
        }
      }
    }

    out.nc_t.push_back(nc_ok ? 1.0 : 0.0);
    out.dac_t.push_back(dac_ok ? 1.0 : 0.0);
    out.ttc_t.push_back(ttc_ok ? 1.0 : 0.0);
    out.comf_t.push_back(comf_ok ? 1.0 : 0.0);

    ego_a = (v_new - ego_v) / kWaypointDt;
    ego_v = v_new;
    ego_pose = target;
    ego_arc = line.project(ego_pose.position()).s;

    if (!nc_ok) {
      out.collided = true;  // collision terminates progress
      break;
    }
    if (ego_arc >= line.length() - 0.5) break;  // route complete
  }

  out.rc = std::clamp((ego_arc - s.start_arc) / route_len, 0.0, 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < out.nc_t.size(); ++i)
    sum += out.nc_t[i] * out.dac_t[i] * (5.0 * out.ttc_t[i] + 2.0 * out.comf_t[i]) / 7.0;
  double ticks = static_cast<double>(out.nc_t.size());
  out.hd_score = ticks > 0.0 ? out.rc * (sum / ticks) : 0.0;
  return out;
}

}  // namespace hnplan::score
