#include "hnplan/geometry.hpp"

#include <algorithm>
#include <limits>

namespace hnplan::geom {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

double lerp_angle(double a, double b, double u) {
  return wrap_angle(a + wrap_angle(b - a) * u);
}

Vec2 rotate(Vec2 v, double angle) {
  double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Pose compose(const Pose& base, const Pose& local) {
  Vec2 p = rotate({local.x, local.y}, base.h);
  return {base.x + p.x, base.y + p.y, wrap_angle(base.h + local.h)};
}

Pose relative_to(const Pose& base, const Pose& world) {
  Vec2 d = rotate({world.x - base.x, world.y - base.y}, -base.h);
  return {d.x, d.y, wrap_angle(world.h - base.h)};
}

Vec2 to_frame(const Pose& base, Vec2 world_point) {
  return rotate({world_point.x - base.x, world_point.y - base.y}, -base.h);
}

std::array<Vec2, 4> OrientedBox::corners() const {
  double hl = 0.5 * length, hw = 0.5 * width;
  Vec2 fwd = {std::cos(pose.h), std::sin(pose.h)};
  Vec2 left = {-fwd.y, fwd.x};
  Vec2 c = {pose.x, pose.y};
  return {
      c + fwd * hl + left * hw,
      c + fwd * hl - left * hw,
      c - fwd * hl - left * hw,
      c - fwd * hl + left * hw,
  };
}

namespace {

bool separated_on_axes(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b, double heading) {
  for (int k = 0; k < 2; ++k) {
    Vec2 axis = {std::cos(heading + k * M_PI_2), std::sin(heading + k * M_PI_2)};
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = amax;
    for (const Vec2& p : a) {
      double v = p.dot(axis);
      amin = std::min(amin, v);
      amax = std::max(amax, v);
    }
    for (const Vec2& p : b) {
      double v = p.dot(axis);
      bmin = std::min(bmin, v);
      bmax = std::max(bmax, v);
    }
    if (amax < bmin || bmax < amin) return true;
  }
  return false;
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  auto ca = a.corners();
  auto cb = b.corners();
  if (separated_on_axes(ca, cb, a.pose.h)) return false;
  if (separated_on_axes(ca, cb, b.pose.h)) return false;
  return true;
}

bool point_in_polygon(Vec2 p, std::span<const Vec2> polygon) {
  bool inside = false;
  std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    double v = (q - p).cross(r - p);
    if (v > 0) return 1;
    if (v < 0) return -1;
    return 0;
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
           std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
  };
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

bool polygon_is_simple(std::span<const Vec2> polygon) {
  std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (shared endpoint).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n]))
        return false;
    }
  }
  return true;
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  cum_.resize(points_.size(), 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i)
    cum_[i] = cum_[i - 1] + (points_[i] - points_[i - 1]).norm();
}

Vec2 Polyline::point_at(double s) const {
  if (points_.empty()) return {};
  if (points_.size() == 1 || s <= 0.0) return points_.front();
  if (s >= cum_.back()) return points_.back();
  auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  std::size_t i = static_cast<std::size_t>(it - cum_.begin());
  double seg = cum_[i] - cum_[i - 1];
  double u = seg > 0.0 ? (s - cum_[i - 1]) / seg : 0.0;
  return points_[i - 1] + (points_[i] - points_[i - 1]) * u;
}

double Polyline::heading_at(double s) const {
  if (points_.size() < 2) return 0.0;
  std::size_t i;
  if (s <= 0.0) {
    i = 1;
  } else if (s >= cum_.back()) {
    i = points_.size() - 1;
  } else {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    i = static_cast<std::size_t>(it - cum_.begin());
  }
  Vec2 d = points_[i] - points_[i - 1];
  return std::atan2(d.y, d.x);
}

Vec2 Polyline::normal_at(double s) const {
  double h = heading_at(s);
  return {-std::sin(h), std::cos(h)};
}

Polyline::Projection Polyline::project(Vec2 p) const {
  Projection best;
  best.distance = std::numeric_limits<double>::infinity();
  if (points_.empty()) return best;
  if (points_.size() == 1) {
    best = {0.0, 0.0, (p - points_[0]).norm()};
    return best;
  }
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    Vec2 a = points_[i];
    Vec2 d = points_[i + 1] - a;
    double len_sq = d.norm_sq();
    double u = len_sq > 0.0 ? std::clamp((p - a).dot(d) / len_sq, 0.0, 1.0) : 0.0;
    Vec2 q = a + d * u;
    double dist = (p - q).norm();
    if (dist < best.distance) {
      double seg_len = std::sqrt(len_sq);
      double side = d.cross(p - a);
      best.distance = dist;
      best.s = cum_[i] + u * seg_len;
      best.lateral = side >= 0.0 ? dist : -dist;
    }
  }
  return best;
}

}  // namespace hnplan::geom
