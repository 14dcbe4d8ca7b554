#include "vitality/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace vitality {

namespace {

struct Segment {
  Point a;
  Point b;
};

double cross(const Point& u, const Point& v) { return u.x() * v.y() - u.y() * v.x(); }

bool is_closed(const Ring& r) { return r.size() >= 2 && r.front() == r.back(); }

Ring closed(Ring r) {
  if (!r.empty() && r.front() != r.back()) r.push_back(r.front());
  return r;
}

Moments ring_moments(const Ring& r) {
  Moments m;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const Point& p = r[i];
    const Point& q = r[i + 1];
    const double c = cross(p, q);
    m.area += c;
    m.mx += (p.x() + q.x()) * c;
    m.my += (p.y() + q.y()) * c;
  }
  m.area /= 2.0;
  m.mx /= 6.0;
  m.my /= 6.0;
  return m;
}

Moments segment_moments(const Point& p, const Point& q) {
  const double c = cross(p, q);
  return {c / 2.0, (p.x() + q.x()) * c / 6.0, (p.y() + q.y()) * c / 6.0};
}

// Edges with exterior counter-clockwise and holes clockwise, zero-length
// edges dropped.
std::vector<Segment> oriented_edges(const Polygon& p) {
  std::vector<Segment> out;
  auto emit = [&](const Ring& r, bool want_ccw) {
    const bool ccw = ring_signed_area(r) > 0.0;
    const std::size_t n = r.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      Point a = r[i];
      Point b = r[i + 1];
      if (ccw != want_ccw) {
        a = r[n - 1 - i];
        b = r[n - 2 - i];
      }
      if (a != b) out.push_back({a, b});
    }
  };
  emit(p.exterior, true);
  for (const auto& h : p.holes) emit(h, false);
  return out;
}

Box segment_box(const Segment& s) {
  Box b(s.a);
  b.extend(s.b);
  return b;
}

// Crossing test with edge endpoints ordered by y so that shared edges of
// adjacent polygons produce the same crossing abscissa.
bool ring_crossing(const Ring& r, const Point& q) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    Point a = r[i];
    Point b = r[i + 1];
    if ((a.y() > q.y()) == (b.y() > q.y())) continue;
    if (a.y() > b.y()) std::swap(a, b);
    const double x = a.x() + (q.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
    if (q.x() < x) inside = !inside;
  }
  return inside;
}

double point_segment_distance(const Point& p, const Segment& s) {
  const Point d = s.b - s.a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (p - s.a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (s.a + t * d - p).norm();
}

// +1: q lies on an edge running in direction `dir`; -1: on an edge running
// against it; 0: not on the boundary.
int boundary_side(const std::vector<Segment>& edges, const Point& q, const Point& dir,
                  double tol) {
  const Point u = dir.normalized();
  for (const auto& e : edges) {
    Box b = segment_box(e);
    if (q.x() < b.min().x() - tol || q.x() > b.max().x() + tol || q.y() < b.min().y() - tol ||
        q.y() > b.max().y() + tol)
      continue;
    if (point_segment_distance(q, e) > tol) continue;
    const Point v = (e.b - e.a).normalized();
    if (std::abs(cross(u, v)) > 1e-7) continue;
    return u.dot(v) > 0.0 ? 1 : -1;
  }
  return 0;
}

// Parameters in (0, 1) at which `s` meets any of `others`.
void split_params(const Segment& s, const std::vector<Segment>& others, double tol,
                  std::vector<double>& ts) {
  const Point r = s.b - s.a;
  const double rlen2 = r.squaredNorm();
  const double rlen = std::sqrt(rlen2);
  Box sb = segment_box(s);
  sb.min().array() -= tol;
  sb.max().array() += tol;
  const double eps = 1e-12;
  for (const auto& o : others) {
    if (!sb.intersects(segment_box(o))) continue;
    const Point sv = o.b - o.a;
    const Point qp = o.a - s.a;
    const double denom = cross(r, sv);
    const double slen = sv.norm();
    if (std::abs(denom) > 1e-12 * rlen * slen) {
      const double t = cross(qp, sv) / denom;
      const double u = cross(qp, r) / denom;
      if (u >= -eps && u <= 1.0 + eps && t > eps && t < 1.0 - eps) ts.push_back(t);
    } else if (std::abs(cross(qp, r)) <= tol * rlen) {
      for (const Point& e : {o.a, o.b}) {
        const double t = (e - s.a).dot(r) / rlen2;
        if (t > eps && t < 1.0 - eps) ts.push_back(t);
      }
    }
  }
}

template <typename Visit>
void for_each_piece(const Segment& s, const std::vector<Segment>& cutters, double tol,
                    Visit&& visit) {
  std::vector<double> ts{0.0, 1.0};
  split_params(s, cutters, tol, ts);
  std::sort(ts.begin(), ts.end());
  const Point r = s.b - s.a;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    if (ts[k + 1] - ts[k] < 1e-12) continue;
    const Point p = s.a + ts[k] * r;
    const Point q = ts[k + 1] == 1.0 ? s.b : Point(s.a + ts[k + 1] * r);
    visit(p, q);
  }
}

bool strictly_inside(const Polygon& poly, const std::vector<Segment>& edges, const Point& q,
                     double tol) {
  for (const auto& e : edges)
    if (point_segment_distance(q, e) <= tol) return false;
  return contains(poly, q);
}

double scale_tolerance(const Box& b) {
  const double extent = b.isEmpty() ? 1.0 : std::max(1.0, (b.max() - b.min()).maxCoeff());
  return 1e-9 * extent;
}

Circle circle_from(const Point& a, const Point& b) {
  const Point c = (a + b) / 2.0;
  return {c, std::max(distance(c, a), distance(c, b))};
}

Circle circle_from(const Point& a, const Point& b, const Point& c) {
  const Point ab = b - a;
  const Point ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  if (std::abs(d) < 1e-14 * ab.squaredNorm() * ac.norm() || d == 0.0) {
    Circle best = circle_from(a, b);
    for (const Circle& cand : {circle_from(a, c), circle_from(b, c)})
      if (cand.radius > best.radius) best = cand;
    return best;
  }
  const double ab2 = ab.squaredNorm();
  const double ac2 = ac.squaredNorm();
  const Point off((ac.y() * ab2 - ab.y() * ac2) / d, (ab.x() * ac2 - ac.x() * ab2) / d);
  const Point center = a + off;
  return {center, std::max({distance(center, a), distance(center, b), distance(center, c)})};
}

bool in_circle(const Circle& c, const Point& p, double eps) {
  return distance(c.center, p) <= c.radius + eps;
}

// Sutherland-Hodgman against the half-plane n.x <= level.
Ring clip_ring(const Ring& r, const Point& n, double level) {
  Ring out;
  if (r.size() < 4) return out;
  const std::size_t count = r.size() - 1;
  for (std::size_t i = 0; i < count; ++i) {
    const Point& cur = r[i];
    const Point& nxt = r[i + 1];
    const double dc = n.dot(cur) - level;
    const double dn = n.dot(nxt) - level;
    if (dc <= 0.0) out.push_back(cur);
    if ((dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0)) {
      const double t = dc / (dc - dn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  if (out.size() < 3) return {};
  out.push_back(out.front());
  return out;
}

}  // namespace

Polygon make_polygon(Ring exterior, std::vector<Ring> holes) {
  Polygon p;
  p.exterior = closed(std::move(exterior));
  if (ring_signed_area(p.exterior) < 0.0) std::reverse(p.exterior.begin(), p.exterior.end());
  for (auto& h : holes) {
    Ring ring = closed(std::move(h));
    if (ring_signed_area(ring) > 0.0) std::reverse(ring.begin(), ring.end());
    p.holes.push_back(std::move(ring));
  }
  return p;
}

Polygon rectangle(double x0, double y0, double x1, double y1) {
  return make_polygon({Point(x0, y0), Point(x1, y0), Point(x1, y1), Point(x0, y1)});
}

Polygon regular_polygon(const Point& center, double radius, int n) {
  Ring r;
  r.reserve(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * M_PI * k / n;
    r.push_back(center + radius * Point(std::cos(a), std::sin(a)));
  }
  return make_polygon(std::move(r));
}

void validate(const Polygon& p) {
  auto check_ring = [](const Ring& r, const char* what) {
    if (!is_closed(r)) throw GeometryError(std::string(what) + " ring is not closed");
    for (const auto& v : r)
      if (!v.allFinite()) throw GeometryError(std::string(what) + " ring has non-finite vertex");
    std::vector<Point> pts(r.begin(), r.end() - 1);
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
      return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    const auto distinct = std::unique(pts.begin(), pts.end()) - pts.begin();
    if (distinct < 3) throw GeometryError(std::string(what) + " ring has fewer than 3 distinct vertices");
    if (ring_signed_area(r) == 0.0) throw GeometryError(std::string(what) + " ring has zero area");

    std::vector<Segment> edges;
    for (std::size_t i = 0; i + 1 < r.size(); ++i)
      if (r[i] != r[i + 1]) edges.push_back({r[i], r[i + 1]});
    const std::size_t n = edges.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
        const Segment& s = edges[i];
        const Segment& o = edges[j];
        if (!segment_box(s).intersects(segment_box(o))) continue;
        const Point rr = s.b - s.a;
        const Point sv = o.b - o.a;
        const Point qp = o.a - s.a;
        const double denom = cross(rr, sv);
        if (adjacent) {
          // Only a back-tracking spike makes adjacent edges overlap.
          if (std::abs(denom) <= 1e-12 * rr.norm() * sv.norm() && rr.dot(sv) < 0.0)
            throw GeometryError(std::string(what) + " ring is self-intersecting");
          continue;
        }
        if (std::abs(denom) > 1e-12 * rr.norm() * sv.norm()) {
          const double t = cross(qp, sv) / denom;
          const double u = cross(qp, rr) / denom;
          if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0)
            throw GeometryError(std::string(what) + " ring is self-intersecting");
        } else if (std::abs(cross(qp, rr)) <= 1e-12 * rr.squaredNorm()) {
          const double t0 = qp.dot(rr) / rr.squaredNorm();
          const double t1 = (o.b - s.a).dot(rr) / rr.squaredNorm();
          if (std::max(t0, t1) >= 0.0 && std::min(t0, t1) <= 1.0)
            throw GeometryError(std::string(what) + " ring is self-intersecting");
        }
      }
    }
  };
  check_ring(p.exterior, "exterior");
  for (const auto& h : p.holes) {
    check_ring(h, "hole");
    if (!contains(make_polygon(p.exterior), h.front()))
      throw GeometryError("hole lies outside the exterior ring");
  }
  if (polygon_area(p) <= 0.0) throw GeometryError("polygon has non-positive area");
}

double ring_signed_area(const Ring& r) { return ring_moments(r).area; }

Moments moments(const Polygon& p) {
  Moments m = ring_moments(p.exterior);
  if (m.area < 0.0) m = Moments{} -= m;
  for (const auto& h : p.holes) {
    Moments hm = ring_moments(h);
    if (hm.area < 0.0) hm = Moments{} -= hm;
    m -= hm;
  }
  return m;
}

double polygon_area(const Polygon& p) {
  if (p.exterior.size() < 4) return 0.0;
  return std::max(0.0, moments(p).area);
}

double polygon_area(const MultiPolygon& m) {
  double a = 0.0;
  for (const auto& p : m) a += polygon_area(p);
  return a;
}

Point centroid(const Polygon& p) {
  const Moments m = moments(p);
  if (!(m.area > 0.0)) throw GeometryError("centroid of a zero-area polygon");
  return {m.mx / m.area, m.my / m.area};
}

Box bounds(const Polygon& p) {
  Box b;
  for (const auto& v : p.exterior) b.extend(v);
  return b;
}

Box bounds(const MultiPolygon& m) {
  Box b;
  for (const auto& p : m) b.extend(bounds(p));
  return b;
}

bool contains(const Polygon& p, const Point& q) {
  if (!ring_crossing(p.exterior, q)) return false;
  for (const auto& h : p.holes)
    if (ring_crossing(h, q)) return false;
  return true;
}

bool contains(const MultiPolygon& m, const Point& q) {
  for (const auto& p : m)
    if (bounds(p).contains(q) && contains(p, q)) return true;
  return false;
}

Circle min_enclosing_circle(std::span<const Point> input) {
  std::vector<Point> pts(input.begin(), input.end());
  if (pts.empty()) throw GeometryError("enclosing circle of an empty point set");
  std::mt19937 rng(0x5eedu);
  std::shuffle(pts.begin(), pts.end(), rng);
  Box b;
  for (const auto& q : pts) b.extend(q);
  const double eps = 1e-12 * std::max(1.0, (b.max() - b.min()).maxCoeff());

  Circle c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (in_circle(c, pts[i], eps)) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (in_circle(c, pts[j], eps)) continue;
      c = circle_from(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (in_circle(c, pts[k], eps)) continue;
        c = circle_from(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

Circle min_enclosing_circle(const Polygon& p) {
  if (p.exterior.size() < 4) throw GeometryError("enclosing circle needs at least 3 vertices");
  std::span<const Point> verts(p.exterior.data(), p.exterior.size() - (is_closed(p.exterior) ? 1 : 0));
  std::vector<Point> distinct(verts.begin(), verts.end());
  std::sort(distinct.begin(), distinct.end(), [](const Point& a, const Point& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw GeometryError("enclosing circle needs at least 3 distinct vertices");
  return min_enclosing_circle(std::span<const Point>(distinct));
}

Moments overlap_moments(const Polygon& a, std::span<const Polygon> others) {
  Moments out;
  if (others.empty() || a.exterior.size() < 4) return out;

  const Box abox = bounds(a);
  std::vector<const Polygon*> near;
  Box all = abox;
  for (const auto& o : others) {
    if (o.exterior.size() < 4) continue;
    const Box ob = bounds(o);
    if (!abox.intersects(ob)) continue;
    near.push_back(&o);
    all.extend(ob);
  }
  if (near.empty()) return out;
  const double tol = scale_tolerance(all);

  const std::vector<Segment> aedges = oriented_edges(a);
  std::vector<std::vector<Segment>> oedges;
  std::vector<Segment> all_other_edges;
  for (const Polygon* o : near) {
    oedges.push_back(oriented_edges(*o));
    all_other_edges.insert(all_other_edges.end(), oedges.back().begin(), oedges.back().end());
  }

  // Boundary of a lying inside the union.
  for (const auto& e : aedges) {
    for_each_piece(e, all_other_edges, tol, [&](const Point& p, const Point& q) {
      const Point mid = (p + q) / 2.0;
      const Point dir = q - p;
      bool take = false;
      for (std::size_t k = 0; k < near.size() && !take; ++k) {
        const int side = boundary_side(oedges[k], mid, dir, tol);
        if (side > 0) take = true;
        else if (side == 0 && contains(*near[k], mid)) take = true;
      }
      if (take) out += segment_moments(p, q);
    });
  }

  // Boundary of the union lying strictly inside a.
  for (std::size_t k = 0; k < near.size(); ++k) {
    std::vector<Segment> cutters = aedges;
    for (std::size_t j = 0; j < near.size(); ++j)
      if (j != k) cutters.insert(cutters.end(), oedges[j].begin(), oedges[j].end());
    for (const auto& e : oedges[k]) {
      for_each_piece(e, cutters, tol, [&](const Point& p, const Point& q) {
        const Point mid = (p + q) / 2.0;
        const Point dir = q - p;
        if (!strictly_inside(a, aedges, mid, tol)) return;
        for (std::size_t j = 0; j < near.size(); ++j) {
          if (j == k) continue;
          const int side = boundary_side(oedges[j], mid, dir, tol);
          if (side < 0 || (side > 0 && j < k)) return;
          if (side == 0 && contains(*near[j], mid)) return;
        }
        out += segment_moments(p, q);
      });
    }
  }
  return out;
}

double intersect_area(const Polygon& a, const Polygon& b) {
  const double area = overlap_moments(a, std::span<const Polygon>(&b, 1)).area;
  return std::clamp(area, 0.0, std::min(polygon_area(a), polygon_area(b)));
}

double intersect_area(const Polygon& a, const MultiPolygon& b) {
  const Box abox = bounds(a);
  double total = 0.0;
  for (const auto& p : b)
    if (abox.intersects(bounds(p))) total += intersect_area(a, p);
  return total;
}

std::vector<Polygon> voronoi_tessellation(std::span<const Point> sites, const Polygon& boundary) {
  if (sites.empty()) throw GeometryError("voronoi tessellation needs at least one site");
  std::vector<std::size_t> order(sites.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const Point& a = sites[i];
    const Point& b = sites[j];
    return a.x() < b.x() || (a.x() == b.x() && (a.y() < b.y() || (a.y() == b.y() && i < j)));
  });
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    if (sites[order[k]] == sites[order[k + 1]]) {
      std::ostringstream msg;
      msg << "duplicate site: indices " << order[k] << " and " << order[k + 1];
      throw DuplicateSiteError(msg.str());
    }
  }
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!contains(boundary, sites[i])) {
      std::ostringstream msg;
      msg << "site " << i << " lies outside the boundary";
      throw GeometryError(msg.str());
    }
  }

  std::vector<Polygon> cells;
  cells.reserve(sites.size());
  std::vector<std::pair<double, std::size_t>> by_dist;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    by_dist.clear();
    for (std::size_t j = 0; j < sites.size(); ++j)
      if (j != i) by_dist.emplace_back(distance(sites[i], sites[j]), j);
    std::sort(by_dist.begin(), by_dist.end());

    Polygon cell = boundary;
    auto reach = [&] {
      double r = 0.0;
      for (const auto& v : cell.exterior) r = std::max(r, distance(v, sites[i]));
      return r;
    };
    double rmax = reach();
    for (const auto& [d, j] : by_dist) {
      if (d / 2.0 > rmax) break;
      const Point n = sites[j] - sites[i];
      const double level = n.dot((sites[i] + sites[j]) / 2.0);
      cell.exterior = clip_ring(cell.exterior, n, level);
      std::vector<Ring> holes;
      for (const auto& h : cell.holes) {
        Ring clipped = clip_ring(h, n, level);
        if (!clipped.empty()) holes.push_back(std::move(clipped));
      }
      cell.holes = std::move(holes);
      if (cell.exterior.empty()) {
        cell.holes.clear();
        break;
      }
      rmax = reach();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace vitality
