#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

namespace vitality {

/// Planar point in a projected CRS, meters.
using Point = Eigen::Vector2d;
using Box = Eigen::AlignedBox2d;

/// Closed ring: front() == back().
using Ring = std::vector<Point>;

/// Simple polygon with optional holes. Rings built through make_polygon are
/// closed, the exterior is counter-clockwise and holes are clockwise.
struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
};

/// Interior-disjoint polygons treated as one region (e.g. a district made of
/// its blocks).
using MultiPolygon = std::vector<Polygon>;

struct Circle {
  Point center = Point::Zero();
  double radius = 0.0;
};

/// Area and first moments (integral of x and y) of a region.
struct Moments {
  double area = 0.0;
  double mx = 0.0;
  double my = 0.0;

  Moments& operator+=(const Moments& o) {
    area += o.area;
    mx += o.mx;
    my += o.my;
    return *this;
  }
  Moments& operator-=(const Moments& o) {
    area -= o.area;
    mx -= o.mx;
    my -= o.my;
    return *this;
  }
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateSiteError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class EmptySetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Construction -------------------------------------------------------------

/// Closes open rings and normalizes orientation. Does not validate.
Polygon make_polygon(Ring exterior, std::vector<Ring> holes = {});
Polygon rectangle(double x0, double y0, double x1, double y1);
/// Regular n-gon inscribed in the circle (center, radius).
Polygon regular_polygon(const Point& center, double radius, int n);

/// Throws GeometryError for degenerate rings (<3 distinct vertices), open
/// rings, non-finite coordinates, zero area or self-intersecting rings.
void validate(const Polygon& p);

// Measures -----------------------------------------------------------------

double ring_signed_area(const Ring& r);
double polygon_area(const Polygon& p);
double polygon_area(const MultiPolygon& m);
Moments moments(const Polygon& p);
Point centroid(const Polygon& p);
Box bounds(const Polygon& p);
Box bounds(const MultiPolygon& m);

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x() - b.x(), a.y() - b.y());
}

/// Half-open point membership: for any exact partition of the plane into
/// polygons, every point belongs to exactly one of them.
bool contains(const Polygon& p, const Point& q);
bool contains(const MultiPolygon& m, const Point& q);

/// Smallest circle containing all exterior vertices.
Circle min_enclosing_circle(const Polygon& p);
Circle min_enclosing_circle(std::span<const Point> points);

/// Moments of a ∩ (others[0] ∪ others[1] ∪ ...). The others may overlap each
/// other.
Moments overlap_moments(const Polygon& a, std::span<const Polygon> others);
double intersect_area(const Polygon& a, const Polygon& b);
double intersect_area(const Polygon& a, const MultiPolygon& b);

/// Voronoi cells of `sites` clipped to `boundary`, one per site and in site
/// order. Cells of a non-convex boundary may contain zero-width bridges; their
/// area and overlap measures are unaffected.
std::vector<Polygon> voronoi_tessellation(std::span<const Point> sites,
                                          const Polygon& boundary);

}  // namespace vitality
