#pragma once

// Independent reference implementations used only by the tests. None of these call
// into the library routine they are checking.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "resilience/core.hpp"
#include "resilience/geometry.hpp"
#include "resilience/ingest.hpp"

namespace oracle {

using resilience::geo::LonLat;
using resilience::geo::Polygon;
using resilience::geo::Ring;

// Winding number of a closed ring around p (Sunday's algorithm).
inline int winding_number(LonLat p, const Ring& ring) {
  int wn = 0;
  auto is_left = [](LonLat a, LonLat b, LonLat c) {
    return (b.lon - a.lon) * (c.lat - a.lat) - (c.lon - a.lon) * (b.lat - a.lat);
  };
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const LonLat& a = ring[i];
    const LonLat& b = ring[i + 1];
    if (a.lat <= p.lat) {
      if (b.lat > p.lat && is_left(a, b, p) > 0) ++wn;
    } else {
      if (b.lat <= p.lat && is_left(a, b, p) < 0) --wn;
    }
  }
  return wn;
}

inline bool inside(LonLat p, const Polygon& poly) {
  if (winding_number(p, poly.exterior) == 0) return false;
  for (const auto& h : poly.holes)
    if (winding_number(p, h) != 0) return false;
  return true;
}

// Great-circle distance from the chord between unit vectors.
inline double chord_distance_km(LonLat a, LonLat b) {
  constexpr double deg = 3.14159265358979323846 / 180.0;
  auto unit = [&](LonLat p) {
    double phi = p.lat * deg, lam = p.lon * deg;
    return std::array<double, 3>{std::cos(phi) * std::cos(lam), std::cos(phi) * std::sin(lam), std::sin(phi)};
  };
  auto u = unit(a), v = unit(b);
  double c = std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) + (u[2] - v[2]) * (u[2] - v[2]));
  return 2.0 * resilience::geo::kEarthRadiusKm * std::asin(std::min(1.0, c / 2.0));
}

// Monte-Carlo clip: the inside fraction of `samples` stratified points along the line,
// weighted by segment length.
inline double monte_carlo_clip(const resilience::geo::LineString& line, const Polygon& poly, long samples) {
  double total_len = 0.0;
  std::vector<double> seg_len;
  for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i) {
    seg_len.push_back(chord_distance_km(line.vertices[i], line.vertices[i + 1]));
    total_len += seg_len.back();
  }
  if (total_len == 0.0) return 0.0;
  double kept = 0.0;
  for (std::size_t s = 0; s < seg_len.size(); ++s) {
    auto n = std::max<long>(1, std::lround(static_cast<double>(samples) * seg_len[s] / total_len));
    const LonLat a = line.vertices[s], b = line.vertices[s + 1];
    long hits = 0;
    for (long i = 0; i < n; ++i) {
      double t = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      if (inside({a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat)}, poly)) ++hits;
    }
    kept += seg_len[s] * static_cast<double>(hits) / static_cast<double>(n);
  }
  return kept;
}

using Points = std::vector<std::vector<double>>;

inline double sq(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// Within-cluster sum of squares around cluster means.
inline double sse(const Points& pts, const std::vector<int>& labels, int k) {
  std::size_t dim = pts.front().size();
  std::vector<std::vector<double>> mean(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
  std::vector<int> count(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++count[labels[i]];
    for (std::size_t j = 0; j < dim; ++j) mean[labels[i]][j] += pts[i][j];
  }
  for (int c = 0; c < k; ++c)
    for (auto& v : mean[c]) v /= std::max(count[c], 1);
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += sq(pts[i], mean[labels[i]]);
  return s;
}

// Exhaustive optimum for k = 2 over every labeling with two non-empty clusters.
inline double best_two_partition(const Points& pts) {
  const std::size_t n = pts.size();
  double best = INFINITY;
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u;
    best = std::min(best, sse(pts, labels, 2));
  }
  return best;
}

// Textbook quadratic silhouette from a full distance matrix.
inline double silhouette(const Points& pts, const std::vector<int>& labels, int k) {
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = std::sqrt(sq(pts[i], pts[j]));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<int> cnt(static_cast<std::size_t>(k), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += d[i][j];
      ++cnt[labels[j]];
    }
    int own = labels[i];
    if (cnt[own] == 0) continue;  // singleton
    double a = sum[own] / cnt[own];
    double b = INFINITY;
    for (int c = 0; c < k; ++c)
      if (c != own && cnt[c] > 0) b = std::min(b, sum[c] / cnt[c]);
    double m = std::max(a, b);
    if (m > 0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

// ARI by explicit pair counting.
inline double ari_pairs(const std::vector<int>& x, const std::vector<int>& y) {
  double ss = 0, sd = 0, ds = 0, dd = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      bool a = x[i] == x[j], b = y[i] == y[j];
      if (a && b) ++ss;
      else if (a) ++sd;
      else if (b) ++ds;
      else ++dd;
    }
  double denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
  if (denom == 0) return 1.0;
  return 2.0 * (ss * dd - sd * ds) / denom;
}

// Evacuation rate by walking every minute of every day for every device.
// Segment times must be whole minutes.
inline std::map<resilience::CbgId, std::map<resilience::Date, double>> evacuation_brute_force(
    const std::vector<resilience::ingest::StaySegment>& segs) {
  using namespace resilience;
  std::map<std::string, std::vector<const ingest::StaySegment*>> by_device;
  for (const auto& s : segs) by_device[s.device_id].push_back(&s);
  std::map<CbgId, std::map<Date, std::pair<int, int>>> counts;
  for (const auto& [dev, list] : by_device) {
    Timestamp lo = list.front()->start, hi = list.front()->end;
    for (auto* s : list) {
      lo = std::min(lo, s->start);
      hi = std::max(hi, s->end);
    }
    for (Date d = date_of(lo); start_of(d) < hi; d = d + 1) {
      int minutes = 0;
      for (Timestamp t = start_of(d); t < start_of(d) + kSecondsPerDay; t += 60) {
        for (auto* s : list)
          if (s->start <= t && t < s->end) {
            ++minutes;
            break;
          }
      }
      bool away = false;
      for (auto* s : list) {
        bool overlaps = s->start < start_of(d) + kSecondsPerDay && s->end > start_of(d);
        if (overlaps && !(s->stay_cbg == s->home_cbg) && s->end - s->start >= 24 * 3600) away = true;
      }
      if (minutes >= 240) {
        auto& c = counts[list.front()->home_cbg][d];
        ++c.first;
        if (away) ++c.second;
      }
    }
  }
  std::map<CbgId, std::map<Date, double>> out;
  for (const auto& [cbg, days] : counts)
    for (const auto& [d, c] : days) out[cbg][d] = static_cast<double>(c.second) / c.first;
  return out;
}

// Linear-interpolation quantile by sorting a copy, written from the definition.
inline double sorted_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  double h = (static_cast<double>(v.size()) - 1.0) * p;
  double lo = std::floor(h);
  double hi = std::ceil(h);
  return v[static_cast<std::size_t>(lo)] + (h - lo) * (v[static_cast<std::size_t>(hi)] - v[static_cast<std::size_t>(lo)]);
}

}  // namespace oracle
