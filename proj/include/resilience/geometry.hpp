#pragma once

#include <optional>
#include <span>
#include <vector>

#include "resilience/core.hpp"

namespace resilience::geo {

// Degrees of longitude/latitude, WGS-84.
struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
  bool operator==(const LonLat&) const = default;
};

struct BBox {
  double min_lon = 0.0, min_lat = 0.0, max_lon = 0.0, max_lat = 0.0;

  static BBox of(std::span<const LonLat> pts);
  bool contains(LonLat p) const {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
  bool intersects(const BBox& o) const {
    return min_lon <= o.max_lon && o.min_lon <= max_lon && min_lat <= o.max_lat && o.min_lat <= max_lat;
  }
};

// Closed ring: first vertex repeated as last.
using Ring = std::vector<LonLat>;

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
};

struct LineString {
  std::vector<LonLat> vertices;
};

/// One census block group: its (multi)polygon and a bounding box over all parts.
struct CbgShape {
  CbgId id;
  std::vector<Polygon> parts;
  BBox bbox;
};

/// CBG registry sorted ascending by id.
class CbgTable {
 public:
  CbgTable() = default;
  explicit CbgTable(std::vector<CbgShape> shapes);  // sorts; throws InputError on duplicate ids

  std::size_t size() const { return shapes_.size(); }
  bool empty() const { return shapes_.empty(); }
  const std::vector<CbgShape>& shapes() const { return shapes_; }
  const CbgShape* find(const CbgId& id) const;
  bool contains(const CbgId& id) const { return find(id) != nullptr; }
  auto begin() const { return shapes_.begin(); }
  auto end() const { return shapes_.end(); }

 private:
  std::vector<CbgShape> shapes_;
};

// Collinearity tolerance in degrees.
constexpr double kCollinearEps = 1e-12;
constexpr double kEarthRadiusKm = 6371.0088;

// Shoelace area in square degrees; positive for counter-clockwise rings.
double signed_area(const Ring& ring);

/// Boundary-inclusive: points on any ring edge (hole edges included) count as inside.
bool point_in_polygon(LonLat p, const Polygon& poly);
bool point_in_shape(LonLat p, const CbgShape& shape);

double haversine_km(LonLat a, LonLat b);
double haversine_length_km(const LineString& line);

/// Haversine length of the parts of the line inside the polygon (boundary runs included).
/// Each line segment is split at every crossing with a ring edge and every piece is kept
/// or dropped by testing its midpoint.
double clip_line_length(const LineString& line, const Polygon& poly);
double clip_line_length(const LineString& line, const CbgShape& shape);

/// For each point, the smallest CbgId whose shape contains it, if any.
std::vector<std::optional<CbgId>> assign_points(std::span<const LonLat> points, const CbgTable& cbgs);

namespace serial {
// Single-threaded reference for assign_points.
std::vector<std::optional<CbgId>> assign_points(std::span<const LonLat> points, const CbgTable& cbgs);
}  // namespace serial

}  // namespace resilience::geo
