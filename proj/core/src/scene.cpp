#include "hnplan/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hnplan/scoring.hpp"
#include "json.hpp"

namespace hnplan::scene {

namespace {

constexpr double kCenterlineSpacing = 3.0;
constexpr int kCenterlinePoints = 28;  // 81 m span
constexpr double kEgoStartArc = 5.0;
constexpr double kIntegrationStep = 0.5;

// Continue along the end tangents instead of clamping, so lookaheads and
// agent logs behave past the mapped extent.
geom::Vec2 extended_point(const geom::Polyline& line, double s) {
  if (line.size() < 2) return line.points().empty() ? geom::Vec2{} : line.points().front();
  double len = line.length();
  if (s < 0.0) {
    double h = line.heading_at(0.0);
    return line.point_at(0.0) + geom::Vec2{std::cos(h), std::sin(h)} * s;
  }
  if (s > len) {
    double h = line.heading_at(len);
    return line.point_at(len) + geom::Vec2{std::cos(h), std::sin(h)} * (s - len);
  }
  return line.point_at(s);
}

}  // namespace

const char* to_string(Command c) {
  switch (c) {
    case Command::kGoStraight: return "go_straight";
    case Command::kTurnLeft: return "turn_left";
    case Command::kTurnRight: return "turn_right";
  }
  return "go_straight";
}

const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return "easy";
    case Difficulty::kMedium: return "medium";
    case Difficulty::kHard: return "hard";
  }
  return "medium";
}

const char* to_string(Behavior b) {
  switch (b) {
    case Behavior::kConstantVelocity: return "constant_velocity";
    case Behavior::kStopAndGo: return "stop_and_go";
    case Behavior::kCutIn: return "cut_in";
  }
  return "constant_velocity";
}

Command command_from_string(const std::string& s) {
  if (s == "go_straight") return Command::kGoStraight;
  if (s == "turn_left") return Command::kTurnLeft;
  if (s == "turn_right") return Command::kTurnRight;
  throw ConfigError("unknown command: " + s);
}

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "medium") return Difficulty::kMedium;
  if (s == "hard") return Difficulty::kHard;
  throw ConfigError("unknown difficulty: " + s);
}

Behavior behavior_from_string(const std::string& s) {
  if (s == "constant_velocity") return Behavior::kConstantVelocity;
  if (s == "stop_and_go") return Behavior::kStopAndGo;
  if (s == "cut_in") return Behavior::kCutIn;
  throw ConfigError("unknown behavior: " + s);
}

Corridor::Corridor(std::vector<geom::Vec2> centerline_points, double hw)
    : centerline(std::move(centerline_points)), half_width(hw) {
  const auto& pts = centerline.points();
  const auto& cum = centerline.cumulative();
  boundary.reserve(2 * pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    boundary.push_back(pts[i] + centerline.normal_at(cum[i]) * half_width);
  for (std::size_t i = pts.size(); i-- > 0;)
    boundary.push_back(pts[i] + centerline.normal_at(cum[i]) * -half_width);
}

bool Corridor::contains(geom::Vec2 p) const {
  return geom::point_in_polygon(p, boundary);
}

double Agent::profile_speed(double t) const {
  switch (behavior) {
    case Behavior::kConstantVelocity:
    case Behavior::kCutIn:
      return velocity;
    case Behavior::kStopAndGo: {
      double cycle = go_time + stop_time;
      if (cycle <= 0.0) return velocity;
      double u = std::fmod(t + phase, cycle);
      return u < go_time ? velocity : 0.0;
    }
  }
  return velocity;
}

double Agent::lateral_at(double t) const {
  if (behavior != Behavior::kCutIn) return lane_offset;
  if (t <= cut_time) return cut_offset;
  if (t >= cut_time + cut_duration) return lane_offset;
  double u = (t - cut_time) / cut_duration;
  double blend = 0.5 * (1.0 - std::cos(M_PI * u));
  return cut_offset + (lane_offset - cut_offset) * blend;
}

namespace {

void simulate_agent_log(Agent& agent, const Corridor& corridor) {
  agent.poses.clear();
  agent.poses.reserve(kSceneTicks);
  double s = agent.start_arc;
  for (int tick = 0; tick < kSceneTicks; ++tick) {
    double t = tick * kSimTick;
    double lat = agent.lateral_at(t);
    geom::Vec2 base = extended_point(corridor.centerline, s);
    double h = corridor.centerline.heading_at(std::clamp(s, 0.0, corridor.centerline.length()));
    geom::Vec2 n = {-std::sin(h), std::cos(h)};
    agent.poses.push_back({base.x + n.x * lat, base.y + n.y * lat, geom::wrap_angle(h)});
    s += agent.profile_speed(t) * kSimTick;
  }
}

}  // namespace

geom::Pose agent_pose_at_tick(const Agent& a, int tick) {
  if (a.poses.empty()) return {};
  int i = std::clamp(tick, 0, static_cast<int>(a.poses.size()) - 1);
  return a.poses[static_cast<std::size_t>(i)];
}

namespace {

geom::Vec2 agent_velocity_at_tick(const Agent& a, int tick) {
  if (a.poses.size() < 2) return {};
  int n = static_cast<int>(a.poses.size());
  int i = std::clamp(tick, 0, n - 2);
  geom::Pose p0 = a.poses[static_cast<std::size_t>(i)];
  geom::Pose p1 = a.poses[static_cast<std::size_t>(i + 1)];
  return {(p1.x - p0.x) / kSimTick, (p1.y - p0.y) / kSimTick};
}

std::vector<AgentState> agent_states_at_tick(const Scene& s, int tick) {
  std::vector<AgentState> out;
  out.reserve(s.agents.size());
  for (const Agent& a : s.agents)
    out.push_back({a.id, a.length, a.width, agent_pose_at_tick(a, tick), agent_velocity_at_tick(a, tick)});
  return out;
}

}  // namespace

SceneView view_at_start(const Scene& s) { return view_at_tick(s, 0); }

SceneView view_at_tick(const Scene& s, int tick) {
  SceneView view;
  view.corridor = &s.corridor;
  view.command = s.command;
  view.ego_pose = {0.0, 0.0, 0.0};
  view.ego_velocity = s.ego.velocity;
  view.ego_accel = s.ego.accel;
  view.ego_length = s.ego.length;
  view.ego_width = s.ego.width;
  view.agents = agent_states_at_tick(s, tick);
  return view;
}

std::vector<double> encode_condition(const SceneView& view) {
  std::vector<double> f(kConditionDim, 0.0);
  f[0] = view.ego_velocity;
  f[1] = view.ego_accel;
  f[2 + static_cast<int>(view.command)] = 1.0;

  const geom::Polyline& line = view.corridor->centerline;
  double s0 = line.project(view.ego_pose.position()).s;
  for (int j = 0; j < 10; ++j) {
    geom::Vec2 p = extended_point(line, s0 + 5.0 * (j + 1));
    geom::Vec2 local = geom::to_frame(view.ego_pose, p);
    f[5 + 2 * j] = local.x;
    f[6 + 2 * j] = local.y;
  }

  // Nearest four agents by current Euclidean distance; ties go to lower id.
  std::vector<std::size_t> order(view.agents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double da = (view.agents[a].pose.position() - view.ego_pose.position()).norm_sq();
    double db = (view.agents[b].pose.position() - view.ego_pose.position()).norm_sq();
    if (da != db) return da < db;
    return view.agents[a].id < view.agents[b].id;
  });

  geom::Vec2 ego_vel = {view.ego_velocity * std::cos(view.ego_pose.h),
                        view.ego_velocity * std::sin(view.ego_pose.h)};
  for (std::size_t k = 0; k < order.size() && k < 4; ++k) {
    const AgentState& a = view.agents[order[k]];
    geom::Vec2 rel_p = geom::to_frame(view.ego_pose, a.pose.position());
    geom::Vec2 rel_v = geom::rotate(a.velocity - ego_vel, -view.ego_pose.h);
    double dh = geom::wrap_angle(a.pose.h - view.ego_pose.h);
    std::size_t base = 25 + 6 * k;
    f[base + 0] = rel_p.x;
    f[base + 1] = rel_p.y;
    f[base + 2] = rel_v.x;
    f[base + 3] = rel_v.y;
    f[base + 4] = std::sin(dh);
    f[base + 5] = std::cos(dh);
  }
  return f;
}

std::vector<double> encode_condition(const Scene& s) {
  return encode_condition(view_at_start(s));
}

std::vector<double> corridor_raster(const SceneView& view) {
  std::vector<double> cells(kRasterCells, 0.0);
  for (int row = 0; row < kRasterSide; ++row) {
    double x = -8.0 + 4.0 * row + 2.0;
    for (int col = 0; col < kRasterSide; ++col) {
      double y = -32.0 + 4.0 * col + 2.0;
      geom::Pose world = geom::compose(view.ego_pose, {x, y, 0.0});
      cells[static_cast<std::size_t>(row * kRasterSide + col)] =
          view.corridor->contains(world.position()) ? 1.0 : 0.0;
    }
  }
  return cells;
}

std::vector<double> corridor_raster(const Scene& s) {
  return corridor_raster(view_at_start(s));
}

traj::Trajectory PurePursuitPlanner::plan(const SceneView& view) const {
  // Without a log, assume agents keep their current velocity.
  auto agents_at = [&view](double t) {
    std::vector<AgentState> out = view.agents;
    for (AgentState& a : out) {
      a.pose.x += a.velocity.x * t;
      a.pose.y += a.velocity.y * t;
    }
    return out;
  };
  return plan_with_log(view, agents_at);
}

traj::Trajectory PurePursuitPlanner::plan_with_log(
    const SceneView& view,
    const std::function<std::vector<AgentState>(double)>& agents_at) const {
  const geom::Polyline& line = view.corridor->centerline;
  geom::Pose pose = view.ego_pose;
  double v = view.ego_velocity;
  double cruise = std::max(view.ego_velocity, 5.0) * tuning_.speed_scale;

  traj::Trajectory out;
  int wp = 0;
  for (int step = 0; step < kHorizonSteps * kSubTicksPerStep; ++step) {
    double t = step * kSimTick;
    auto proj = line.project(pose.position());

    // Leading gap along the corridor, restricted to path-conflicting agents.
    // An agent also counts as conflicting if it will be in the band within a
    // second (the privileged view sees merges coming).
    std::vector<AgentState> now = agents_at(t);
    std::vector<AgentState> soon = agents_at(t + 1.0);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t ai = 0; ai < now.size(); ++ai) {
      const AgentState& a = now[ai];
      auto ap = line.project(a.pose.position());
      double ds = ap.s - proj.s;
      if (ds <= 0.0) continue;
      double band = 0.5 * (view.ego_width + a.width) + 0.3;
      bool in_band = std::abs(ap.lateral - proj.lateral) <= band;
      if (!in_band && ai < soon.size()) {
        auto ap_soon = line.project(soon[ai].pose.position());
        in_band = std::abs(ap_soon.lateral - proj.lateral) <= band;
      }
      if (!in_band) continue;
      gap = std::min(gap, ds - 0.5 * (a.length + view.ego_length));
    }
    double v_safe = std::isfinite(gap)
                        ? std::sqrt(std::max(0.0, 2.0 * tuning_.plan_decel * (gap - tuning_.gap_margin)))
                        : cruise;
    double v_des = std::min(cruise, v_safe);
    double accel = std::clamp((v_des - v) / 0.4, -tuning_.max_decel, tuning_.max_accel);
    v = std::max(0.0, v + accel * kSimTick);

    double lookahead = std::clamp(tuning_.lookahead_gain * v, tuning_.min_lookahead, tuning_.max_lookahead);
    geom::Vec2 target = extended_point(line, proj.s + lookahead);
    geom::Vec2 local = geom::to_frame(pose, target);
    double alpha = std::atan2(local.y, local.x);
    double curvature = 2.0 * std::sin(alpha) / lookahead;
    double heading_rate = std::clamp(v * curvature, -0.7, 0.7);

    pose.h = geom::wrap_angle(pose.h + heading_rate * kSimTick);
    pose.x += v * std::cos(pose.h) * kSimTick;
    pose.y += v * std::sin(pose.h) * kSimTick;

    if ((step + 1) % kSubTicksPerStep == 0) {
      geom::Pose local_pose = geom::relative_to(view.ego_pose, pose);
      out.points[wp++] = {local_pose.x, local_pose.y, local_pose.h};
    }
  }
  return out;
}

traj::Trajectory synthesize_expert(const Scene& scene_without_expert) {
  const Scene& s = scene_without_expert;
  SceneView view = view_at_start(s);
  auto agents_at = [&s](double t) {
    int tick = static_cast<int>(std::lround(t / kSimTick));
    std::vector<AgentState> out;
    out.reserve(s.agents.size());
    for (const Agent& a : s.agents)
      out.push_back({a.id, a.length, a.width, agent_pose_at_tick(a, tick), {}});
    return out;
  };

  for (int attempt = 0; attempt < 20; ++attempt) {
    PurePursuitPlanner::Tuning tuning;
    tuning.speed_scale = std::pow(0.92, attempt);
    tuning.gap_margin = 7.0 + 0.6 * attempt;
    PurePursuitPlanner planner(tuning);
    traj::Trajectory candidate = planner.plan_with_log(view, agents_at);

    Scene probe = s;
    probe.expert = candidate;
    score::ScoreBreakdown breakdown = score::score(probe, candidate);
    double first_step = std::hypot(candidate.points[0].x, candidate.points[0].y);
    if (breakdown.pdms >= 0.9 && first_step <= s.ego.velocity * kWaypointDt + 3.0)
      return candidate;
  }
  throw ExpertSynthesisFailed("no tuning reached PDMS >= 0.9 in 20 attempts");
}

namespace {

struct DifficultyProfile {
  int min_agents, max_agents;
  double max_curvature;
  double half_width_lo, half_width_hi;
  double ego_v_lo, ego_v_hi;
  double cut_in_prob;  // >= 1 forces one cut-in agent
};

DifficultyProfile profile_for(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy: return {0, 2, 0.01, 3.0, 4.5, 5.0, 12.0, 0.0};
    case Difficulty::kMedium: return {2, 5, 0.03, 3.0, 5.0, 6.5, 11.5, 0.45};
    case Difficulty::kHard: return {4, 8, 0.05, 2.2, 3.5, 4.0, 13.0, 1.0};
  }
  return {2, 5, 0.03, 3.0, 5.0, 6.5, 11.5, 0.45};
}

Corridor build_corridor(rng::Stream& st, Command command, const DifficultyProfile& prof, double half_width) {
  double total = kCenterlineSpacing * (kCenterlinePoints - 1);
  double base_curv;
  if (command == Command::kGoStraight) {
    // Cubing concentrates mass near zero: many near-dead-straight roads.
    double u = st.uniform(-1.0, 1.0);
    base_curv = u * u * u * 0.2 * prof.max_curvature;
  } else {
    double turn = st.uniform(0.35, std::min(1.1, prof.max_curvature * (total - kEgoStartArc)));
    base_curv = turn / total;
    if (command == Command::kTurnRight) base_curv = -base_curv;
  }
  double wiggle_amp = st.uniform(0.0, 0.25) * prof.max_curvature;
  double wiggle_len = st.uniform(40.0, 80.0);
  double wiggle_phase = st.uniform(0.0, 2.0 * M_PI);
  auto curvature_at = [&](double s) {
    double k = base_curv + wiggle_amp * std::sin(2.0 * M_PI * s / wiggle_len + wiggle_phase);
    return std::clamp(k, -prof.max_curvature, prof.max_curvature);
  };

  // Integrate heading so the ego start (arc = kEgoStartArc) is the origin
  // with tangent +x; scene coordinates are the ego frame at t = 0.
  int n_fine = static_cast<int>(total / kIntegrationStep) + 1;
  std::vector<geom::Vec2> fine(static_cast<std::size_t>(n_fine));
  int anchor = static_cast<int>(kEgoStartArc / kIntegrationStep);
  fine[static_cast<std::size_t>(anchor)] = {0.0, 0.0};
  double h = 0.0;
  for (int i = anchor; i + 1 < n_fine; ++i) {
    double s = i * kIntegrationStep;
    double h_mid = h + 0.5 * curvature_at(s) * kIntegrationStep;
    fine[static_cast<std::size_t>(i + 1)] =
        fine[static_cast<std::size_t>(i)] +
        geom::Vec2{std::cos(h_mid), std::sin(h_mid)} * kIntegrationStep;
    h += curvature_at(s) * kIntegrationStep;
  }
  h = 0.0;
  for (int i = anchor; i > 0; --i) {
    double s = i * kIntegrationStep;
    double h_mid = h - 0.5 * curvature_at(s - kIntegrationStep) * kIntegrationStep;
    fine[static_cast<std::size_t>(i - 1)] =
        fine[static_cast<std::size_t>(i)] -
        geom::Vec2{std::cos(h_mid), std::sin(h_mid)} * kIntegrationStep;
    h -= curvature_at(s - kIntegrationStep) * kIntegrationStep;
  }

  std::vector<geom::Vec2> pts;
  pts.reserve(kCenterlinePoints);
  int stride = static_cast<int>(kCenterlineSpacing / kIntegrationStep);
  for (int i = 0; i < kCenterlinePoints; ++i)
    pts.push_back(fine[static_cast<std::size_t>(i * stride)]);
  return Corridor(std::move(pts), half_width);
}

void draw_footprint(rng::Stream& st, Agent& a) {
  if (st.uniform() < 0.8) {
    a.length = st.uniform(4.0, 5.2);
    a.width = st.uniform(1.7, 2.1);
  } else {
    a.length = st.uniform(7.0, 10.0);
    a.width = st.uniform(2.3, 2.6);
  }
}

}  // namespace

Scene generate_scene(std::uint64_t global_seed, std::uint64_t scene_id, Difficulty difficulty) {
  DifficultyProfile prof = profile_for(difficulty);
  rng::Stream st(global_seed, rng::Tag::kSceneGen, scene_id,
                 static_cast<std::uint64_t>(difficulty));

  Scene s;
  s.scene_id = scene_id;
  s.global_seed = global_seed;
  s.difficulty = difficulty;
  s.start_arc = kEgoStartArc;

  double cu = st.uniform();
  s.command = cu < 0.5 ? Command::kGoStraight : (cu < 0.75 ? Command::kTurnLeft : Command::kTurnRight);
  double half_width = st.uniform(prof.half_width_lo, prof.half_width_hi);
  s.corridor = build_corridor(st, s.command, prof, half_width);

  s.ego.velocity = st.uniform(prof.ego_v_lo, prof.ego_v_hi);
  s.ego.accel = st.uniform(-1.0, 1.0);
  s.ego.length = 4.5;
  s.ego.width = 2.0;

  int n_agents = prof.min_agents +
                 static_cast<int>(st.uniform_index(static_cast<std::uint64_t>(prof.max_agents - prof.min_agents + 1)));
  bool want_cut_in = n_agents > 0 && st.uniform() < prof.cut_in_prob;

  // Initial gaps must respect the ego's braking envelope or no expert can
  // exist for the draw.
  double braking = s.ego.velocity * s.ego.velocity / 7.0;

  int next_id = 1;
  double lead_front = kEgoStartArc + 0.5 * s.ego.length;
  double prev_lead_speed = -1.0;   // < 0: no lead placed yet
  double first_lead_speed = -1.0;  // cap for the cut-in, which slots in close
  bool first_lead = true;
  for (int i = 0; i < n_agents; ++i) {
    Agent a;
    a.id = next_id++;
    draw_footprint(st, a);

    bool is_cut_in = want_cut_in && i == n_agents - 1;
    bool is_parked = !is_cut_in && half_width >= 3.6 && st.uniform() < 0.25;
    if (is_cut_in) {
      a.behavior = Behavior::kCutIn;
      a.velocity = st.uniform(0.55, 0.9) * std::max(s.ego.velocity, 6.0);
      if (first_lead_speed > 0.0) a.velocity = std::min(a.velocity, 0.9 * first_lead_speed);
      a.cut_time = st.uniform(1.0, 2.5);
      a.cut_duration = st.uniform(1.5, 2.5);
      double closure = std::max(0.0, s.ego.velocity - a.velocity);
      a.start_arc = kEgoStartArc + braking + 10.0 + closure * (a.cut_time + a.cut_duration) +
                    st.uniform(0.0, 15.0);
      a.cut_offset = (st.uniform() < 0.5 ? 1.0 : -1.0) * (half_width + 2.0);
      a.lane_offset = st.uniform(-0.2, 0.2);
    } else if (is_parked) {
      a.behavior = Behavior::kConstantVelocity;
      a.velocity = 0.0;
      a.length = st.uniform(4.0, 5.2);  // cars only at the roadside
      a.width = st.uniform(1.7, 2.1);
      a.lane_offset = (st.uniform() < 0.5 ? 1.0 : -1.0) * (half_width - 0.9);
      a.start_arc = kEgoStartArc + st.uniform(15.0, 55.0);
    } else {
      // In-lane lead; the nearest one can stop and go, farther ones cruise
      // at non-decreasing speeds so the log stays untangled.
      a.lane_offset = st.uniform(-0.3, 0.3);
      double base = std::max(s.ego.velocity, 6.0);
      if (first_lead) {
        a.velocity = st.uniform(0.35, 0.6) * base;
        a.start_arc = lead_front + braking + st.uniform(8.0, 45.0) + 0.5 * a.length;
        if (st.uniform() < 0.5) {
          a.behavior = Behavior::kStopAndGo;
          a.go_time = st.uniform(2.0, 4.0);
          a.stop_time = st.uniform(1.5, 3.0);
          a.phase = st.uniform(0.0, a.go_time + a.stop_time);
        } else {
          a.behavior = Behavior::kConstantVelocity;
        }
        first_lead = false;
        first_lead_speed = std::max(a.velocity, 1.0);
      } else {
        a.velocity = prev_lead_speed + st.uniform(0.0, 0.25) * base;
        a.start_arc = lead_front + st.uniform(14.0, 34.0) + 0.5 * a.length;
        a.behavior = Behavior::kConstantVelocity;
      }
      lead_front = a.start_arc + 0.5 * a.length;
      prev_lead_speed = std::max(a.velocity, 1.0);
    }
    simulate_agent_log(a, s.corridor);
    s.agents.push_back(std::move(a));
  }

  s.expert = synthesize_expert(s);
  return s;
}

// ---------------------------------------------------------------------------
// Scene set serialization. Writing is done by hand so floats land at exactly
// 9 significant digits and reserialization is byte-stable.

namespace {

std::string fnum(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void append_pose_array(std::string& out, const geom::Pose& p) {
  out += '[';
  out += fnum(p.x);
  out += ',';
  out += fnum(p.y);
  out += ',';
  out += fnum(p.h);
  out += ']';
}

}  // namespace

std::string scenes_to_json(std::span<const Scene> scenes) {
  std::string out;
  out.reserve(scenes.size() * 16384);
  out += "[\n";
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const Scene& s = scenes[si];
    out += "{\"scene_id\":" + std::to_string(s.scene_id);
    out += ",\"global_seed\":" + std::to_string(s.global_seed);
    out += ",\"difficulty\":\"" + std::string(to_string(s.difficulty)) + "\"";
    out += ",\"command\":\"" + std::string(to_string(s.command)) + "\"";
    out += ",\"start_arc\":" + fnum(s.start_arc);
    out += ",\"ego\":{\"v\":" + fnum(s.ego.velocity) + ",\"a\":" + fnum(s.ego.accel) +
           ",\"length\":" + fnum(s.ego.length) + ",\"width\":" + fnum(s.ego.width) + "}";
    out += ",\"corridor\":{\"half_width\":" + fnum(s.corridor.half_width) + ",\"centerline\":[";
    const auto& pts = s.corridor.centerline.points();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) out += ',';
      out += '[';
      out += fnum(pts[i].x);
      out += ',';
      out += fnum(pts[i].y);
      out += ']';
    }
    out += "]}";
    out += ",\"agents\":[";
    for (std::size_t ai = 0; ai < s.agents.size(); ++ai) {
      const Agent& a = s.agents[ai];
      if (ai) out += ',';
      out += "{\"id\":" + std::to_string(a.id);
      out += ",\"length\":" + fnum(a.length) + ",\"width\":" + fnum(a.width);
      out += ",\"behavior\":\"" + std::string(to_string(a.behavior)) + "\"";
      out += ",\"velocity\":" + fnum(a.velocity);
      out += ",\"lane_offset\":" + fnum(a.lane_offset);
      out += ",\"start_arc\":" + fnum(a.start_arc);
      out += ",\"go_time\":" + fnum(a.go_time) + ",\"stop_time\":" + fnum(a.stop_time) +
             ",\"phase\":" + fnum(a.phase);
      out += ",\"cut_time\":" + fnum(a.cut_time) + ",\"cut_duration\":" + fnum(a.cut_duration) +
             ",\"cut_offset\":" + fnum(a.cut_offset);
      out += ",\"poses\":[";
      for (std::size_t pi = 0; pi < a.poses.size(); ++pi) {
        if (pi) out += ',';
        append_pose_array(out, a.poses[pi]);
      }
      out += "]}";
    }
    out += "]";
    out += ",\"expert\":[";
    for (int k = 0; k < kHorizonSteps; ++k) {
      if (k) out += ',';
      append_pose_array(out, {s.expert.points[k].x, s.expert.points[k].y, s.expert.points[k].h});
    }
    out += "]}";
    out += si + 1 < scenes.size() ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

void write_scenes(const std::filesystem::path& path, std::span<const Scene> scenes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << scenes_to_json(scenes);
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("parse error in " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw IoError("scene file must hold a JSON array: " + path.string());

  std::vector<Scene> scenes;
  scenes.reserve(doc.size());
  try {
    for (const auto& js : doc) {
      Scene s;
      s.scene_id = js.at("scene_id").get<std::uint64_t>();
      s.global_seed = js.at("global_seed").get<std::uint64_t>();
      s.difficulty = difficulty_from_string(js.at("difficulty").get<std::string>());
      s.command = command_from_string(js.at("command").get<std::string>());
      s.start_arc = js.at("start_arc").get<double>();
      const auto& ego = js.at("ego");
      s.ego.velocity = ego.at("v").get<double>();
      s.ego.accel = ego.at("a").get<double>();
      s.ego.length = ego.at("length").get<double>();
      s.ego.width = ego.at("width").get<double>();
      const auto& corr = js.at("corridor");
      std::vector<geom::Vec2> pts;
      for (const auto& p : corr.at("centerline"))
        pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      s.corridor = Corridor(std::move(pts), corr.at("half_width").get<double>());
      for (const auto& ja : js.at("agents")) {
        Agent a;
        a.id = ja.at("id").get<int>();
        a.length = ja.at("length").get<double>();
        a.width = ja.at("width").get<double>();
        a.behavior = behavior_from_string(ja.at("behavior").get<std::string>());
        a.velocity = ja.at("velocity").get<double>();
        a.lane_offset = ja.at("lane_offset").get<double>();
        a.start_arc = ja.at("start_arc").get<double>();
        a.go_time = ja.at("go_time").get<double>();
        a.stop_time = ja.at("stop_time").get<double>();
        a.phase = ja.at("phase").get<double>();
        a.cut_time = ja.at("cut_time").get<double>();
        a.cut_duration = ja.at("cut_duration").get<double>();
        a.cut_offset = ja.at("cut_offset").get<double>();
        for (const auto& jp : ja.at("poses"))
          a.poses.push_back({jp.at(0).get<double>(), jp.at(1).get<double>(), jp.at(2).get<double>()});
        s.agents.push_back(std::move(a));
      }
      const auto& je = js.at("expert");
      for (int k = 0; k < kHorizonSteps; ++k) {
        s.expert.points[k].x = je.at(k).at(0).get<double>();
        s.expert.points[k].y = je.at(k).at(1).get<double>();
        s.expert.points[k].h = je.at(k).at(2).get<double>();
      }
      scenes.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad scene record in " + path.string() + ": " + e.what());
  }
  return scenes;
}

}  // namespace hnplan::scene
