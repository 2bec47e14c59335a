#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace hnplan::geom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm_sq() const { return x * x + y * y; }
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double h = 0.0;
  Vec2 position() const { return {x, y}; }
};

// Wrap to (-pi, pi].
double wrap_angle(double a);
// Shortest-path interpolation between two angles at fraction u in [0, 1].
double lerp_angle(double a, double b, double u);
Vec2 rotate(Vec2 v, double angle);
// world = base (+) local.
Pose compose(const Pose& base, const Pose& local);
// local = world expressed in the base frame.
Pose relative_to(const Pose& base, const Pose& world);
Vec2 to_frame(const Pose& base, Vec2 world_point);

struct OrientedBox {
  Pose pose;
  double length = 0.0;
  double width = 0.0;
  std::array<Vec2, 4> corners() const;
};

// Separating-axis overlap test; touching counts as overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

// Even-odd crossing test; boundary behavior deterministic but unspecified.
bool point_in_polygon(Vec2 p, std::span<const Vec2> polygon);

// True if no two non-adjacent edges of the closed polygon intersect.
bool polygon_is_simple(std::span<const Vec2> polygon);

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

// Open polyline parameterized by cumulative arc length.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& cumulative() const { return cum_; }

  Vec2 point_at(double s) const;      // s clamped to [0, length]
  double heading_at(double s) const;  // tangent heading, clamped
  Vec2 normal_at(double s) const;     // left-hand unit normal

  struct Projection {
    double s = 0.0;         // arc length of the closest point
    double lateral = 0.0;   // signed offset, left of travel positive
    double distance = 0.0;  // unsigned distance
  };
  Projection project(Vec2 p) const;

 private:
  std::vector<Vec2> points_;
  std::vector<double> cum_;
};

}  // namespace hnplan::geom
