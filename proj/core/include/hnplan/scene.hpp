#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hnplan/common.hpp"
#include "hnplan/geometry.hpp"
#include "hnplan/rng.hpp"
#include "hnplan/trajectory.hpp"

namespace hnplan::scene {

enum class Command { kGoStraight = 0, kTurnLeft = 1, kTurnRight = 2 };
enum class Difficulty { kEasy = 0, kMedium = 1, kHard = 2 };
enum class Behavior { kConstantVelocity = 0, kStopAndGo = 1, kCutIn = 2 };

const char* to_string(Command c);
const char* to_string(Difficulty d);
const char* to_string(Behavior b);
Command command_from_string(const std::string& s);
Difficulty difficulty_from_string(const std::string& s);
Behavior behavior_from_string(const std::string& s);

// How long agents are pre-simulated for the non-reactive log.
inline constexpr double kSceneHorizon = 16.0;  // seconds
inline constexpr int kSceneTicks = 161;        // kSceneHorizon / kSimTick + 1

struct Corridor {
  geom::Polyline centerline;
  double half_width = 3.0;
  std::vector<geom::Vec2> boundary;  // left offset forward, right offset back

  Corridor() = default;
  Corridor(std::vector<geom::Vec2> centerline_points, double half_width);
  bool contains(geom::Vec2 p) const;
};

struct Agent {
  int id = 0;
  double length = 4.5;
  double width = 2.0;
  Behavior behavior = Behavior::kConstantVelocity;
  double velocity = 0.0;     // nominal cruise speed
  double lane_offset = 0.0;  // target lateral offset from the centerline
  double start_arc = 0.0;
  // stop_and_go cycle
  double go_time = 0.0;
  double stop_time = 0.0;
  double phase = 0.0;
  // cut_in merge
  double cut_time = 0.0;
  double cut_duration = 0.0;
  double cut_offset = 0.0;  // lateral offset before the merge
  // Non-reactive log at kSimTick resolution, kSceneTicks entries.
  std::vector<geom::Pose> poses;

  double profile_speed(double t) const;
  double lateral_at(double t) const;
};

struct EgoState {
  double velocity = 0.0;  // m/s, in [0, 25]
  double accel = 0.0;     // m/s^2, |a| <= 6
  double length = 4.5;
  double width = 2.0;
};

struct Scene {
  std::uint64_t scene_id = 0;
  std::uint64_t global_seed = 0;
  Difficulty difficulty = Difficulty::kMedium;
  Command command = Command::kGoStraight;
  Corridor corridor;
  std::vector<Agent> agents;
  EgoState ego;
  double start_arc = 0.0;  // ego's initial position along the centerline
  traj::Trajectory expert;
};

// A planner-facing snapshot: scene geometry plus the current kinematic state
// of every participant, all in the scene frame.
struct AgentState {
  int id = 0;
  double length = 0.0;
  double width = 0.0;
  geom::Pose pose;
  geom::Vec2 velocity;
};

struct SceneView {
  const Corridor* corridor = nullptr;
  Command command = Command::kGoStraight;
  geom::Pose ego_pose;
  double ego_velocity = 0.0;
  double ego_accel = 0.0;
  double ego_length = 4.5;
  double ego_width = 2.0;
  std::vector<AgentState> agents;
};

SceneView view_at_start(const Scene& s);
// View from the stored non-reactive log; tick indexes kSimTick steps.
SceneView view_at_tick(const Scene& s, int tick);
geom::Pose agent_pose_at_tick(const Agent& a, int tick);

// Condition features: ego (v, a), command one-hot, 10 centerline samples at
// 5 m spacing ahead of the ego, 4 nearest agents x (rel x, rel y, rel vx,
// rel vy, sin h, cos h), zero padded. All in the ego frame.
inline constexpr int kConditionDim = 49;
std::vector<double> encode_condition(const SceneView& view);
std::vector<double> encode_condition(const Scene& s);

// 16x16 corridor occupancy in the ego frame, x in [-8, 56), y in [-32, 32),
// 4 m cells, row-major from (x_min, y_min); 1.0 where the cell center is
// inside the corridor.
inline constexpr int kRasterSide = 16;
inline constexpr int kRasterCells = kRasterSide * kRasterSide;
std::vector<double> corridor_raster(const SceneView& view);
std::vector<double> corridor_raster(const Scene& s);

class Planner {
 public:
  virtual ~Planner() = default;
  virtual traj::Trajectory plan(const SceneView& view) const = 0;
};

// Privileged rule-based expert: pure pursuit on the centerline with a
// leading-gap speed governor. agents_at supplies agent states at an absolute
// time offset from the view; the synthesizer wires it to the stored log,
// closed-loop callers to a constant-velocity extrapolation.
class PurePursuitPlanner : public Planner {
 public:
  struct Tuning {
    double speed_scale = 1.0;
    double lookahead_gain = 0.6;
    double min_lookahead = 3.0;
    double max_lookahead = 7.0;
    double gap_margin = 7.0;   // standstill buffer, meters
    double plan_decel = 3.0;   // comfortable braking for the speed rule
    double max_accel = 2.0;
    double max_decel = 3.8;    // keeps |dv| within the 4 m/s^2 comfort gate
  };

  PurePursuitPlanner() = default;
  explicit PurePursuitPlanner(Tuning tuning) : tuning_(tuning) {}

  traj::Trajectory plan(const SceneView& view) const override;
  traj::Trajectory plan_with_log(
      const SceneView& view,
      const std::function<std::vector<AgentState>(double)>& agents_at) const;

 private:
  Tuning tuning_;
};

// Privileged expert for a fully specified scene (uses the stored agent log).
// Walks a ladder of increasingly cautious tunings; throws
// ExpertSynthesisFailed after 20 attempts without reaching PDMS >= 0.9.
traj::Trajectory synthesize_expert(const Scene& scene_without_expert);

// Deterministic in (global_seed, scene_id, difficulty); propagates
// ExpertSynthesisFailed so callers can skip infeasible draws.
Scene generate_scene(std::uint64_t global_seed, std::uint64_t scene_id, Difficulty difficulty);

// Scene set files: JSON array, floats at 9 significant digits.
std::string scenes_to_json(std::span<const Scene> scenes);
void write_scenes(const std::filesystem::path& path, std::span<const Scene> scenes);
std::vector<Scene> read_scenes(const std::filesystem::path& path);

}  // namespace hnplan::scene
