#include <cmath>

#include "doctest.h"
#include "hnplan/geometry.hpp"
#include "hnplan/rng.hpp"

using namespace hnplan::geom;

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
  CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(2.0 * M_PI + 0.25) == doctest::Approx(0.25));
}

TEST_CASE("pose composition round-trips") {
  Pose base{3.0, -2.0, 0.7};
  Pose local{1.5, 0.5, -0.3};
  Pose world = compose(base, local);
  Pose back = relative_to(base, world);
  CHECK(back.x == doctest::Approx(local.x).epsilon(1e-12));
  CHECK(back.y == doctest::Approx(local.y).epsilon(1e-12));
  CHECK(back.h == doctest::Approx(local.h).epsilon(1e-12));
}

TEST_CASE("oriented box overlap") {
  OrientedBox a{{0, 0, 0}, 4.0, 2.0};
  OrientedBox b{{3.0, 0, 0}, 4.0, 2.0};  // 1 m overlap along x
  OrientedBox c{{10.0, 0, 0}, 4.0, 2.0};
  CHECK(boxes_overlap(a, b));
  CHECK(!boxes_overlap(a, c));

  OrientedBox rotated{{3.2, 0, M_PI_2}, 4.0, 2.0};  // long side across the gap
  CHECK(!boxes_overlap(a, rotated));
  rotated.pose.x = 2.9;
  CHECK(boxes_overlap(a, rotated));
}

TEST_CASE("point in polygon") {
  std::vector<Vec2> square = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  CHECK(point_in_polygon({2, 2}, square));
  CHECK(!point_in_polygon({5, 2}, square));
  CHECK(!point_in_polygon({-1, -1}, square));
  CHECK(polygon_is_simple(square));

  std::vector<Vec2> bowtie = {{0, 0}, {4, 4}, {4, 0}, {0, 4}};
  CHECK(!polygon_is_simple(bowtie));
}

TEST_CASE("polyline arc length queries") {
  Polyline line({{0, 0}, {10, 0}, {10, 10}});
  CHECK(line.length() == doctest::Approx(20.0));
  Vec2 p = line.point_at(5.0);
  CHECK(p.x == doctest::Approx(5.0));
  CHECK(p.y == doctest::Approx(0.0));
  p = line.point_at(15.0);
  CHECK(p.x == doctest::Approx(10.0));
  CHECK(p.y == doctest::Approx(5.0));
  CHECK(line.heading_at(5.0) == doctest::Approx(0.0));
  CHECK(line.heading_at(15.0) == doctest::Approx(M_PI_2));
}

TEST_CASE("polyline projection is signed and clamped") {
  Polyline line({{0, 0}, {10, 0}});
  auto proj = line.project({5.0, 2.0});
  CHECK(proj.s == doctest::Approx(5.0));
  CHECK(proj.lateral == doctest::Approx(2.0));  // left of travel
  proj = line.project({5.0, -3.0});
  CHECK(proj.lateral == doctest::Approx(-3.0));
  proj = line.project({12.0, 0.0});
  CHECK(proj.s == doctest::Approx(10.0));
  CHECK(proj.distance == doctest::Approx(2.0));
}

TEST_CASE("projection distance matches brute force on random polylines") {
  hnplan::rng::Stream st(5, hnplan::rng::Tag::kTest);
  std::vector<Vec2> pts;
  double x = 0, y = 0;
  for (int i = 0; i < 30; ++i) {
    pts.push_back({x, y});
    x += st.uniform(0.5, 3.0);
    y += st.uniform(-1.0, 1.0);
  }
  Polyline line(pts);
  for (int trial = 0; trial < 200; ++trial) {
    Vec2 q{st.uniform(-5.0, 70.0), st.uniform(-10.0, 10.0)};
    auto proj = line.project(q);
    double best = 1e30;
    for (double s = 0.0; s <= line.length(); s += 0.01)
      best = std::min(best, (line.point_at(s) - q).norm());
    CHECK(proj.distance <= best + 1e-6);
  }
}
