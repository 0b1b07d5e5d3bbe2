#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace odflow {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }
};

// Vertex ring; the last vertex is implicitly joined back to the first.
using Ring = std::vector<Point>;

struct BoundingBox {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void expand(const Point& p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  void expand(const BoundingBox& b) {
    min_x = std::min(min_x, b.min_x);
    min_y = std::min(min_y, b.min_y);
    max_x = std::max(max_x, b.max_x);
    max_y = std::max(max_y, b.max_y);
  }
  bool contains(const Point& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  static BoundingBox of(const Ring& ring) {
    BoundingBox box;
    for (const Point& p : ring) box.expand(p);
    return box;
  }
};

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
  BoundingBox bbox;
};

namespace geom_detail {

inline double cross(const Point& a, const Point& b, const Point& p) {
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

inline bool on_segment(const Point& a, const Point& b, const Point& p) {
  if (cross(a, b, p) != 0.0) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

inline int orientation_sign(const Point& a, const Point& b, const Point& p) {
  double c = cross(a, b, p);
  return (c > 0.0) - (c < 0.0);
}

// Segment intersection including collinear overlap.
inline bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
  int o1 = orientation_sign(p1, p2, q1);
  int o2 = orientation_sign(p1, p2, q2);
  int o3 = orientation_sign(q1, q2, p1);
  int o4 = orientation_sign(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

}  // namespace geom_detail

// Normalizes and validates a ring: strips an explicit closing vertex, requires
// >=3 distinct vertices, finite coordinates, no repeated consecutive vertices
// and no self-intersection between non-adjacent edges.
inline Ring validate_ring(Ring ring, const std::string& context) {
  if (ring.size() >= 2 && ring.front() == ring.back()) ring.pop_back();
  if (ring.size() < 3)
    throw std::runtime_error(context + ": ring has fewer than 3 vertices");
  for (const Point& p : ring)
    if (!p.finite()) throw std::runtime_error(context + ": non-finite ring coordinate");
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i)
    if (ring[i] == ring[(i + 1) % n])
      throw std::runtime_error(context + ": repeated consecutive ring vertex");
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a1 = ring[i];
    const Point& a2 = ring[(i + 1) % n];
    double alo_x = std::min(a1.x, a2.x), ahi_x = std::max(a1.x, a2.x);
    double alo_y = std::min(a1.y, a2.y), ahi_y = std::max(a1.y, a2.y);
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // cyclically adjacent
      const Point& b1 = ring[j];
      const Point& b2 = ring[(j + 1) % n];
      if (std::max(b1.x, b2.x) < alo_x || std::min(b1.x, b2.x) > ahi_x ||
          std::max(b1.y, b2.y) < alo_y || std::min(b1.y, b2.y) > ahi_y)
        continue;
      if (geom_detail::segments_intersect(a1, a2, b1, b2))
        throw std::runtime_error(context + ": self-intersecting ring");
    }
  }
  return ring;
}

inline Polygon make_polygon(Ring exterior, std::vector<Ring> holes = {},
                            const std::string& context = "polygon") {
  Polygon poly;
  poly.exterior = validate_ring(std::move(exterior), context);
  for (std::size_t h = 0; h < holes.size(); ++h)
    poly.holes.push_back(validate_ring(std::move(holes[h]), context + " hole"));
  poly.bbox = BoundingBox::of(poly.exterior);
  return poly;
}

inline bool point_on_ring(const Point& p, const Ring& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i)
    if (geom_detail::on_segment(ring[i], ring[(i + 1) % n], p)) return true;
  return false;
}

namespace geom_detail {

inline bool even_odd_toggle(const Point& p, const Ring& ring, bool inside) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    if ((a.y > p.y) != (b.y > p.y)) {
      double t = (p.y - a.y) / (b.y - a.y);
      double cx = a.x + t * (b.x - a.x);
      if (p.x < cx) inside = !inside;
    }
  }
  return inside;
}

}  // namespace geom_detail

// Even-odd containment. Points exactly on any ring edge count as contained;
// the catalog-order tie-break for shared boundaries lives in assign_unit.
inline bool point_in_polygon(const Point& p, const Polygon& poly) {
  if (!poly.bbox.contains(p)) return false;
  if (point_on_ring(p, poly.exterior)) return true;
  for (const Ring& hole : poly.holes)
    if (point_on_ring(p, hole)) return true;
  bool inside = geom_detail::even_odd_toggle(p, poly.exterior, false);
  for (const Ring& hole : poly.holes) inside = geom_detail::even_odd_toggle(p, hole, inside);
  return inside;
}

inline double ring_signed_area(const Ring& ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    acc += a.x * b.y - b.x * a.y;
  }
  return 0.5 * acc;
}

inline Point ring_centroid(const Ring& ring) {
  double area = ring_signed_area(ring);
  const std::size_t n = ring.size();
  if (area == 0.0) {
    Point mean{0.0, 0.0};
    for (const Point& p : ring) {
      mean.x += p.x;
      mean.y += p.y;
    }
    mean.x /= static_cast<double>(n);
    mean.y /= static_cast<double>(n);
    return mean;
  }
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    double w = a.x * b.y - b.x * a.y;
    cx += (a.x + b.x) * w;
    cy += (a.y + b.y) * w;
  }
  return Point{cx / (6.0 * area), cy / (6.0 * area)};
}

}  // namespace odflow
