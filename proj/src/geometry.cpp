#include "resilience/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace resilience::geo {

namespace {

inline double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

bool on_segment(LonLat p, LonLat a, LonLat b) {
  double dx = b.lon - a.lon, dy = b.lat - a.lat;
  double len = std::hypot(dx, dy);
  if (len == 0.0) return std::hypot(p.lon - a.lon, p.lat - a.lat) <= kCollinearEps;
  double dist = std::abs(cross(dx, dy, p.lon - a.lon, p.lat - a.lat)) / len;
  if (dist > kCollinearEps) return false;
  double t = ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / (len * len);
  double slack = kCollinearEps / len;
  return t >= -slack && t <= 1.0 + slack;
}

bool on_ring(LonLat p, const Ring& ring) {
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    if (on_segment(p, ring[i], ring[i + 1])) return true;
  return false;
}

// Crossing-number parity with the half-open edge rule.
bool inside_ring(LonLat p, const Ring& ring) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const LonLat& a = ring[i];
    const LonLat& b = ring[i + 1];
    if ((a.lat > p.lat) != (b.lat > p.lat)) {
      double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

inline LonLat lerp(LonLat a, LonLat b, double t) {
  return {a.lon + (b.lon - a.lon) * t, a.lat + (b.lat - a.lat) * t};
}

void collect_crossings(LonLat a, LonLat b, const Ring& ring, std::vector<double>& ts) {
  double rx = b.lon - a.lon, ry = b.lat - a.lat;
  double rlen2 = rx * rx + ry * ry;
  double rlen = std::sqrt(rlen2);
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    LonLat c = ring[i], d = ring[i + 1];
    double sx = d.lon - c.lon, sy = d.lat - c.lat;
    double slen = std::hypot(sx, sy);
    if (slen == 0.0) continue;
    double qx = c.lon - a.lon, qy = c.lat - a.lat;
    double denom = cross(rx, ry, sx, sy);
    if (std::abs(denom) <= 1e-15 * rlen * slen) {
      // Parallel. Collinear edges contribute their endpoints as split points.
      if (std::abs(cross(rx, ry, qx, qy)) / rlen > kCollinearEps) continue;
      double tc = (qx * rx + qy * ry) / rlen2;
      double td = ((d.lon - a.lon) * rx + (d.lat - a.lat) * ry) / rlen2;
      if (tc > 0.0 && tc < 1.0) ts.push_back(tc);
      if (td > 0.0 && td < 1.0) ts.push_back(td);
      continue;
    }
    double t = cross(qx, qy, sx, sy) / denom;
    double u = cross(qx, qy, rx, ry) / denom;
    double uslack = kCollinearEps / slen;
    if (u >= -uslack && u <= 1.0 + uslack && t > 0.0 && t < 1.0) ts.push_back(t);
  }
}

double clip_segment(LonLat a, LonLat b, const Polygon& poly) {
  if (a == b) return 0.0;
  std::vector<double> ts{0.0, 1.0};
  collect_crossings(a, b, poly.exterior, ts);
  for (const auto& h : poly.holes) collect_crossings(a, b, h, ts);
  std::sort(ts.begin(), ts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    double t0 = ts[i], t1 = ts[i + 1];
    if (t1 - t0 <= 1e-15) continue;
    if (point_in_polygon(lerp(a, b, 0.5 * (t0 + t1)), poly))
      total += haversine_km(lerp(a, b, t0), lerp(a, b, t1));
  }
  return total;
}

}  // namespace

BBox BBox::of(std::span<const LonLat> pts) {
  BBox b{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const auto& p : pts) {
    b.min_lon = std::min(b.min_lon, p.lon);
    b.min_lat = std::min(b.min_lat, p.lat);
    b.max_lon = std::max(b.max_lon, p.lon);
    b.max_lat = std::max(b.max_lat, p.lat);
  }
  return b;
}

CbgTable::CbgTable(std::vector<CbgShape> shapes) : shapes_(std::move(shapes)) {
  std::sort(shapes_.begin(), shapes_.end(), [](const CbgShape& a, const CbgShape& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < shapes_.size(); ++i)
    if (shapes_[i].id == shapes_[i - 1].id) throw InputError("duplicate cbg_id " + shapes_[i].id.str());
}

const CbgShape* CbgTable::find(const CbgId& id) const {
  auto it = std::lower_bound(shapes_.begin(), shapes_.end(), id,
                             [](const CbgShape& s, const CbgId& v) { return s.id < v; });
  return it != shapes_.end() && it->id == id ? &*it : nullptr;
}

double signed_area(const Ring& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i)
    a += cross(ring[i].lon, ring[i].lat, ring[i + 1].lon, ring[i + 1].lat);
  return 0.5 * a;
}

bool point_in_polygon(LonLat p, const Polygon& poly) {
  if (on_ring(p, poly.exterior)) return true;
  for (const auto& h : poly.holes)
    if (on_ring(p, h)) return true;
  if (!inside_ring(p, poly.exterior)) return false;
  for (const auto& h : poly.holes)
    if (inside_ring(p, h)) return false;
  return true;
}

bool point_in_shape(LonLat p, const CbgShape& shape) {
  if (!shape.bbox.contains(p)) return false;
  for (const auto& part : shape.parts)
    if (point_in_polygon(p, part)) return true;
  return false;
}

double haversine_km(LonLat a, LonLat b) {
  constexpr double rad = std::numbers::pi / 180.0;
  double dlat = (b.lat - a.lat) * rad;
  double dlon = (b.lon - a.lon) * rad;
  double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

double haversine_length_km(const LineString& line) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i)
    total += haversine_km(line.vertices[i], line.vertices[i + 1]);
  return total;
}

double clip_line_length(const LineString& line, const Polygon& poly) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i)
    total += clip_segment(line.vertices[i], line.vertices[i + 1], poly);
  return total;
}

double clip_line_length(const LineString& line, const CbgShape& shape) {
  if (!BBox::of(line.vertices).intersects(shape.bbox)) return 0.0;
  double total = 0.0;
  for (const auto& part : shape.parts) total += clip_line_length(line, part);
  return total;
}

std::vector<std::optional<CbgId>> assign_points(std::span<const LonLat> points, const CbgTable& cbgs) {
  std::vector<std::optional<CbgId>> out(points.size());
  const auto& shapes = cbgs.shapes();
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (const auto& s : shapes) {
      if (point_in_shape(points[i], s)) {
        out[i] = s.id;
        break;
      }
    }
  }
  return out;
}

namespace serial {

std::vector<std::optional<CbgId>> assign_points(std::span<const LonLat> points, const CbgTable& cbgs) {
  std::vector<std::optional<CbgId>> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& s : cbgs) {
      if (point_in_shape(points[i], s)) {
        out[i] = s.id;
        break;
      }
    }
  }
  return out;
}

}  // namespace serial

}  // namespace resilience::geo
