#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcert/core/errors.hpp"

namespace lcert {

using Point2 = Eigen::Vector2d;

/// Convex polygon with counterclockwise vertices and no collinear triples.
class Polygon2D {
 public:
  Polygon2D() = default;

  const std::vector<Point2>& vertices() const noexcept { return vertices_; }
  std::size_t size() const noexcept { return vertices_.size(); }

  double area() const {
    double twice = 0.0;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const auto& a = vertices_[i];
      const auto& b = vertices_[(i + 1) % vertices_.size()];
      twice += a.x() * b.y() - a.y() * b.x();
    }
    return 0.5 * twice;
  }

  Point2 lower() const {
    Point2 lo = vertices_.front();
    for (const auto& v : vertices_) lo = lo.cwiseMin(v);
    return lo;
  }
  Point2 upper() const {
    Point2 hi = vertices_.front();
    for (const auto& v : vertices_) hi = hi.cwiseMax(v);
    return hi;
  }

 private:
  explicit Polygon2D(std::vector<Point2> v) : vertices_(std::move(v)) {}
  std::vector<Point2> vertices_;

  friend Polygon2D convex_hull_2d(std::vector<Point2> points);
};

namespace detail {
inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}
}  // namespace detail

/// Andrew's monotone chain. Collinear boundary points are dropped.
inline Polygon2D convex_hull_2d(std::vector<Point2> points) {
  if (points.size() < 3)
    throw DegenerateHullError("convex_hull_2d: need at least 3 points");
  std::sort(points.begin(), points.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  points.erase(std::unique(points.begin(), points.end()), points.end());
  const std::size_t n = points.size();
  if (n < 3) throw DegenerateHullError("convex_hull_2d: need 3 distinct points");

  std::vector<Point2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && detail::cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3)
    throw DegenerateHullError("convex_hull_2d: all points are collinear");
  return Polygon2D(std::move(hull));
}

/// Inside-or-on test. Each edge is a half-plane; a point passes an edge when
/// its signed distance is at least -slack.
inline bool point_in_hull(const Polygon2D& poly, const Point2& p,
                          double slack = 1e-12) {
  const auto& v = poly.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2& a = v[i];
    const Point2& b = v[(i + 1) % v.size()];
    const double len = (b - a).norm();
    if (detail::cross(a, b, p) / len < -slack) return false;
  }
  return true;
}

}  // namespace lcert
