#include "resilience/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace resilience::features {

using ingest::ClaimRecord;
using ingest::StaySegment;
using ingest::TrafficReading;

BaselineValue baseline(const DailySeries& series, const DateWindow& window) {
  BaselineValue b{.cbg = series.cbg, .metric = series.metric, .value = 0.0, .coverage = 0.0, .usable = false};
  // Running mean, so a constant series gives back its value exactly.
  double mean = 0.0;
  int n = 0;
  for (auto it = series.values.lower_bound(window.start); it != series.values.end() && it->first <= window.end;
       ++it) {
    ++n;
    mean += (it->second - mean) / n;
  }
  b.value = mean;
  b.coverage = window.well_formed() ? static_cast<double>(n) / window.length_days() : 0.0;
  b.usable = b.value > 0.0 && b.coverage >= 0.5;
  return b;
}

PercentChangeSeries percent_change(const DailySeries& series, const BaselineValue& base) {
  PercentChangeSeries pc{.cbg = series.cbg, .metric = series.metric, .values = {}, .missing = !base.usable};
  if (pc.missing) return pc;
  for (const auto& [d, v] : series.values) pc.values.emplace_hint(pc.values.end(), d, (v - base.value) / base.value);
  return pc;
}

std::optional<int> category_proactivity(const PercentChangeSeries& pc, const AnalysisConfig& cfg) {
  if (pc.missing) return std::nullopt;
  const auto& w = cfg.preparedness_window;
  std::optional<Date> best;
  double best_value = 0.0;
  for (auto it = pc.values.lower_bound(w.start); it != pc.values.end() && it->first <= w.end; ++it) {
    // Strict comparison keeps the earliest date on ties.
    if (!best || it->second > best_value) {
      best = it->first;
      best_value = it->second;
    }
  }
  if (!best) return std::nullopt;
  return cfg.landfall_date - *best;
}

std::optional<double> preparedness_proactivity(const PercentChangeSeries& pc_pharmacy,
                                               const PercentChangeSeries& pc_gas, const AnalysisConfig& cfg) {
  auto a = category_proactivity(pc_pharmacy, cfg);
  auto b = category_proactivity(pc_gas, cfg);
  if (a && b) return (*a + *b) / 2.0;
  if (a) return static_cast<double>(*a);
  if (b) return static_cast<double>(*b);
  return std::nullopt;
}

namespace {

inline int64_t overlap_seconds(Timestamp s0, Timestamp e0, Timestamp s1, Timestamp e1) {
  return std::max<int64_t>(0, std::min(e0, e1) - std::max(s0, s1));
}

struct DayCounts {
  int qualifying = 0;
  int evacuated = 0;
};

// Adds one device's contribution; segs is that device's segments.
void count_device(std::span<const StaySegment> segs, std::map<Date, DayCounts>& days) {
  Date first = date_of(segs.front().start);
  Date last = date_of(segs.back().end - 1);
  for (Date d = first; d <= last; ++d) {
    Timestamp ds = start_of(d), de = ds + kSecondsPerDay;
    int64_t covered = 0;
    bool away = false;
    for (const auto& s : segs) {
      int64_t ov = overlap_seconds(s.start, s.end, ds, de);
      covered += ov;
      if (ov > 0 && !(s.stay_cbg == s.home_cbg) && s.end - s.start >= kMinEvacuationStaySeconds) away = true;
    }
    if (covered < kMinDailyCoverageSeconds) continue;
    auto& c = days[d];
    ++c.qualifying;
    if (away) ++c.evacuated;
  }
}

}  // namespace

std::map<CbgId, DailySeries> evacuation_series(std::span<const StaySegment> segments, const AnalysisConfig&) {
  // Device runs: [begin, end) index ranges of one device each, grouped by home CBG.
  std::map<CbgId, std::vector<std::pair<std::size_t, std::size_t>>> by_home;
  for (std::size_t i = 0; i < segments.size();) {
    std::size_t j = i + 1;
    while (j < segments.size() && segments[j].device_id == segments[i].device_id) ++j;
    by_home[segments[i].home_cbg].emplace_back(i, j);
    i = j;
  }
  std::vector<const std::pair<const CbgId, std::vector<std::pair<std::size_t, std::size_t>>>*> groups;
  for (const auto& g : by_home) groups.push_back(&g);
  std::vector<DailySeries> results(groups.size());

  const auto n = static_cast<std::ptrdiff_t>(groups.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t gi = 0; gi < n; ++gi) {
    const auto& [cbg, runs] = *groups[gi];
    std::map<Date, DayCounts> days;
    for (auto [b, e] : runs) count_device(segments.subspan(b, e - b), days);
    DailySeries s{.cbg = cbg, .metric = MetricKind::evacuation_rate, .values = {}};
    for (const auto& [d, c] : days)
      if (c.qualifying > 0) s.values.emplace_hint(s.values.end(), d, static_cast<double>(c.evacuated) / c.qualifying);
    results[gi] = std::move(s);
  }

  std::map<CbgId, DailySeries> out;
  for (auto& s : results) {
    CbgId id = s.cbg;
    out.emplace(std::move(id), std::move(s));
  }
  return out;
}

std::optional<double> evacuation_feature(const DailySeries& er, const AnalysisConfig& cfg) {
  BaselineValue b = baseline(er, cfg.evac_baseline_window);
  if (!b.usable) return std::nullopt;
  std::optional<double> best;
  const auto& w = cfg.evac_event_window;
  for (auto it = er.values.lower_bound(w.start); it != er.values.end() && it->first <= w.end; ++it) {
    double change = (it->second - b.value) / b.value;
    if (!best || change > *best) best = change;
  }
  return best;
}

std::vector<std::string> flooded_segments(std::span<const TrafficReading> readings, const AnalysisConfig& cfg) {
  std::map<std::string, int> nulls;
  for (const auto& r : readings)
    if (!r.speed && cfg.traffic_event_window.contains(date_of(r.timestamp))) ++nulls[r.segment_id];
  std::vector<std::string> out;
  for (const auto& [id, n] : nulls)
    if (n >= 1 && n * 5 >= cfg.min_null_duration_minutes) out.push_back(id);
  return out;
}

std::map<CbgId, double> flooded_road_length(std::span<const TrafficReading> readings, const ingest::RoadMap& roads,
                                            const geo::CbgTable& cbgs, const AnalysisConfig& cfg) {
  struct Flooded {
    const geo::LineString* line;
    geo::BBox bbox;
  };
  std::vector<Flooded> flooded;
  for (const auto& id : flooded_segments(readings, cfg)) {
    auto it = roads.find(id);
    if (it != roads.end()) flooded.push_back({&it->second, geo::BBox::of(it->second.vertices)});
  }
  const auto& shapes = cbgs.shapes();
  std::vector<double> lengths(shapes.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(shapes.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (const auto& f : flooded)
      if (f.bbox.intersects(shapes[i].bbox)) total += geo::clip_line_length(*f.line, shapes[i]);
    lengths[i] = total;
  }
  std::map<CbgId, double> out;
  for (std::size_t i = 0; i < shapes.size(); ++i) out.emplace_hint(out.end(), shapes[i].id, lengths[i]);
  return out;
}

std::map<CbgId, ClaimFeatures> claims_features(std::span<const ClaimRecord> claims,
                                               const ingest::BuildingMap& buildings, const geo::CbgTable& cbgs) {
  std::vector<geo::LonLat> points;
  std::vector<std::size_t> point_claims;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    if (claims[i].location) {
      points.push_back(*claims[i].location);
      point_claims.push_back(i);
    }
  }
  auto assigned = geo::assign_points(points, cbgs);
  std::vector<const CbgId*> owner(claims.size(), nullptr);
  for (std::size_t k = 0; k < points.size(); ++k)
    if (assigned[k]) owner[point_claims[k]] = &*assigned[k];

  std::map<CbgId, ClaimFeatures> out;
  for (const auto& s : cbgs) out.emplace_hint(out.end(), s.id, ClaimFeatures{});
  for (std::size_t i = 0; i < claims.size(); ++i) {
    const CbgId* id = owner[i] ? owner[i] : (claims[i].cbg ? &*claims[i].cbg : nullptr);
    if (!id) continue;
    auto it = out.find(*id);
    if (it == out.end()) continue;  // claim outside the study area
    ++it->second.claim_count;
    it->second.total_damage_usd += claims[i].damage_amount_usd;
  }
  for (auto& [id, f] : out) {
    auto b = buildings.find(id);
    if (b == buildings.end()) {
      f.ratio_missing_reason = "no_building_count";
    } else if (b->second == 0) {
      f.ratio_missing_reason = "zero_buildings";
    } else {
      f.damage_ratio = static_cast<double>(f.claim_count) / static_cast<double>(b->second);
    }
  }
  return out;
}

std::optional<double> telecom_disruption(const DailySeries& speed, const AnalysisConfig& cfg) {
  BaselineValue b = baseline(speed, cfg.telecom_baseline_window);
  if (!b.usable) return std::nullopt;
  std::optional<double> lowest;
  const auto& w = cfg.telecom_min_window;
  for (auto it = speed.values.lower_bound(w.start); it != speed.values.end() && it->first <= w.end; ++it)
    if (!lowest || it->second < *lowest) lowest = it->second;
  if (!lowest) return std::nullopt;
  return (b.value - *lowest) / b.value;
}

std::map<Date, double> rolling_pct_change(const DailySeries& series, const BaselineValue& base,
                                          const AnalysisConfig& cfg) {
  std::map<Date, double> out;
  if (!base.usable || series.values.empty()) return out;
  const int w = cfg.rolling_window_days;
  Date first = series.values.begin()->first;
  Date last = series.values.rbegin()->first;
  for (Date d = first; d <= last; ++d) {
    double sum = 0.0, mean = 0.0;
    int n = 0;
    for (auto it = series.values.lower_bound(d - (w - 1)); it != series.values.end() && it->first <= d; ++it) {
      double pct = 100.0 * (it->second - base.value) / base.value;
      sum += pct;
      ++n;
      mean += (pct - mean) / n;
    }
    if (n == 0) continue;
    out.emplace_hint(out.end(), d, cfg.rolling_sum ? sum : mean);
  }
  return out;
}

std::optional<RecoveryDuration> recovery_duration(const std::map<Date, double>& rolled, const AnalysisConfig& cfg) {
  // Compared as a level against thr * 100 so that 90% of baseline is exactly 90.
  const double level = cfg.recovery_threshold_pct * 100.0;
  bool observed = false;
  for (auto it = rolled.lower_bound(cfg.landfall_date); it != rolled.end() && it->first <= cfg.recovery_observation_end;
       ++it) {
    observed = true;
    if (100.0 + it->second >= level) return RecoveryDuration{static_cast<double>(it->first - cfg.landfall_date), false};
  }
  if (!observed) return std::nullopt;
  return RecoveryDuration{static_cast<double>(cfg.recovery_observation_end - cfg.landfall_date), true};
}

namespace {

constexpr std::array<MetricKind, kRecoveryCount> kRecoveryMetrics = {
    MetricKind::poi_essential, MetricKind::poi_nonessential, MetricKind::cc_essential, MetricKind::cc_nonessential};

void set_missing(FeatureVector& fv, Feature f, std::string reason) {
  fv[f].reset();
  fv.missing_reason[index_of(f)] = std::move(reason);
}

}  // namespace

std::vector<FeatureVector> compute_features(const ingest::Dataset& data, const AnalysisConfig& cfg) {
  std::map<std::pair<CbgId, MetricKind>, const DailySeries*> index;
  for (const auto& s : data.series) index[{s.cbg, s.metric}] = &s;
  auto lookup = [&](const CbgId& id, MetricKind m) -> const DailySeries* {
    auto it = index.find({id, m});
    return it == index.end() ? nullptr : it->second;
  };

  auto evacuation = evacuation_series(data.stays, cfg);
  auto flooded = flooded_road_length(data.readings, data.roads, data.cbgs, cfg);
  auto claims = claims_features(data.claims, data.buildings, data.cbgs);

  const auto& shapes = data.cbgs.shapes();
  std::vector<FeatureVector> out(shapes.size());
  const auto n = static_cast<std::ptrdiff_t>(shapes.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const CbgId& id = shapes[i].id;
    FeatureVector fv;
    fv.cbg = id;

    // Preparedness from pharmacy and gas-station visits.
    std::optional<int> per_category[2];
    std::string prep_reason = "no_series";
    int k = 0;
    for (MetricKind m : {MetricKind::poi_pharmacy, MetricKind::poi_gas}) {
      if (const auto* s = lookup(id, m)) {
        auto pc = percent_change(*s, baseline(*s, cfg.poi_baseline_window));
        per_category[k] = category_proactivity(pc, cfg);
        if (!per_category[k]) prep_reason = pc.missing ? "baseline_unusable" : "no_dates_in_window";
      }
      ++k;
    }
    if (per_category[0] && per_category[1])
      fv[Feature::preparedness_proactivity] = (*per_category[0] + *per_category[1]) / 2.0;
    else if (per_category[0] || per_category[1])
      fv[Feature::preparedness_proactivity] = static_cast<double>(per_category[0] ? *per_category[0] : *per_category[1]);
    else
      set_missing(fv, Feature::preparedness_proactivity, prep_reason);

    if (auto it = evacuation.find(id); it == evacuation.end()) {
      set_missing(fv, Feature::evacuation_rate_change, "no_series");
    } else if (auto v = evacuation_feature(it->second, cfg)) {
      fv[Feature::evacuation_rate_change] = *v;
    } else {
      set_missing(fv, Feature::evacuation_rate_change,
                  baseline(it->second, cfg.evac_baseline_window).usable ? "no_dates_in_window" : "baseline_unusable");
    }

    fv[Feature::flooded_road_length] = flooded.at(id);

    const auto& c = claims.at(id);
    fv[Feature::claim_count] = static_cast<double>(c.claim_count);
    fv[Feature::total_damage_usd] = c.total_damage_usd;
    if (c.damage_ratio)
      fv[Feature::damage_ratio] = *c.damage_ratio;
    else
      set_missing(fv, Feature::damage_ratio, c.ratio_missing_reason);

    if (const auto* s = lookup(id, MetricKind::download_kbps)) {
      if (auto v = telecom_disruption(*s, cfg))
        fv[Feature::telecom_disruption] = *v;
      else
        set_missing(fv, Feature::telecom_disruption,
                    baseline(*s, cfg.telecom_baseline_window).usable ? "no_dates_in_window" : "baseline_unusable");
    } else {
      set_missing(fv, Feature::telecom_disruption, "no_series");
    }

    for (std::size_t r = 0; r < kRecoveryCount; ++r) {
      Feature f = kRecoveryFeatures[r];
      const auto* s = lookup(id, kRecoveryMetrics[r]);
      if (!s) {
        set_missing(fv, f, "no_series");
        continue;
      }
      BaselineValue b = baseline(*s, cfg.recovery_baseline_window);
      if (!b.usable) {
        set_missing(fv, f, "baseline_unusable");
        continue;
      }
      auto dur = recovery_duration(rolling_pct_change(*s, b, cfg), cfg);
      if (!dur) {
        set_missing(fv, f, "no_dates_in_window");
        continue;
      }
      fv[f] = dur->days;
      fv.censored[r] = dur->censored;
    }
    out[i] = std::move(fv);
  }
  return out;
}

AssembledFeatures assemble_feature_matrix(std::span<const FeatureVector> features, int k_clusters) {
  AssembledFeatures out;
  for (const auto& fv : features) {
    if (fv.complete()) {
      std::array<double, kFeatureCount> row{};
      for (std::size_t j = 0; j < kFeatureCount; ++j) row[j] = *fv.values[j];
      out.matrix.rows.push_back(fv.cbg);
      out.matrix.values.push_back(row);
      out.matrix.censored.push_back(fv.censored);
      continue;
    }
    for (std::size_t j = 0; j < kFeatureCount; ++j)
      if (!fv.values[j])
        out.exclusions.push_back({fv.cbg, static_cast<Feature>(j),
                                  fv.missing_reason[j].empty() ? "missing" : fv.missing_reason[j]});
  }
  if (out.matrix.size() < static_cast<std::size_t>(std::max(k_clusters, 1)))
    throw InsufficientDataError("only " + std::to_string(out.matrix.size()) + " complete CBGs for k=" +
                                std::to_string(k_clusters));
  return out;
}

}  // namespace resilience::features
