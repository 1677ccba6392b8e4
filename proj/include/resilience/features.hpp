#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "resilience/core.hpp"
#include "resilience/geometry.hpp"
#include "resilience/ingest.hpp"

namespace resilience::features {

/// Mean of a series over a window, with the fraction of window days present.
/// Unusable when the mean is not positive or fewer than half the days are present.
struct BaselineValue {
  CbgId cbg;
  MetricKind metric = MetricKind::poi_pharmacy;
  double value = 0.0;
  double coverage = 0.0;
  bool usable = false;
};

struct PercentChangeSeries {
  CbgId cbg;
  MetricKind metric = MetricKind::poi_pharmacy;
  std::map<Date, double> values;  // fraction, (V - B) / B
  bool missing = false;
};

BaselineValue baseline(const DailySeries& series, const DateWindow& window);
PercentChangeSeries percent_change(const DailySeries& series, const BaselineValue& base);

// Days between landfall and the earliest date in the preparedness window reaching the
// series maximum; nullopt if no percent change is available there.
std::optional<int> category_proactivity(const PercentChangeSeries& pc, const AnalysisConfig& cfg);
// Mean over the available categories.
std::optional<double> preparedness_proactivity(const PercentChangeSeries& pc_pharmacy,
                                               const PercentChangeSeries& pc_gas, const AnalysisConfig& cfg);

// Minimum daily coverage for a device to count, and the minimum away-stay length.
constexpr int64_t kMinDailyCoverageSeconds = 240 * 60;
constexpr int64_t kMinEvacuationStaySeconds = 24 * 3600;

/// Daily evacuation rate per home CBG: devices away (stay >= 24 h in another CBG
/// overlapping the day) over devices with >= 240 min of coverage that day.
/// Days without qualifying devices are absent. Segments must be sorted by (device, start).
std::map<CbgId, DailySeries> evacuation_series(std::span<const ingest::StaySegment> segments,
                                               const AnalysisConfig& cfg);
std::optional<double> evacuation_feature(const DailySeries& er, const AnalysisConfig& cfg);

// Segment ids with enough null-speed readings inside the traffic event window.
std::vector<std::string> flooded_segments(std::span<const ingest::TrafficReading> readings,
                                          const AnalysisConfig& cfg);
/// Clipped length (km) of flooded road inside each CBG; 0 for CBGs without flooding.
std::map<CbgId, double> flooded_road_length(std::span<const ingest::TrafficReading> readings,
                                            const ingest::RoadMap& roads, const geo::CbgTable& cbgs,
                                            const AnalysisConfig& cfg);

struct ClaimFeatures {
  int64_t claim_count = 0;
  double total_damage_usd = 0.0;
  std::optional<double> damage_ratio;  // missing when the building count is absent or zero
  std::string ratio_missing_reason;
};
std::map<CbgId, ClaimFeatures> claims_features(std::span<const ingest::ClaimRecord> claims,
                                               const ingest::BuildingMap& buildings, const geo::CbgTable& cbgs);

// (baseline - min over the min window) / baseline, unclamped.
std::optional<double> telecom_disruption(const DailySeries& speed, const AnalysisConfig& cfg);

/// Trailing rolling mean (or sum when cfg.rolling_sum) of 100*(v - B)/B, one value per
/// calendar date that has at least one present day in its trailing window.
std::map<Date, double> rolling_pct_change(const DailySeries& series, const BaselineValue& base,
                                          const AnalysisConfig& cfg);

struct RecoveryDuration {
  double days = 0.0;
  bool censored = false;
};
// nullopt when the rolled curve has no values between landfall and the observation end.
std::optional<RecoveryDuration> recovery_duration(const std::map<Date, double>& rolled, const AnalysisConfig& cfg);

/// Per-CBG features for every CBG in the table, in table order.
std::vector<FeatureVector> compute_features(const ingest::Dataset& data, const AnalysisConfig& cfg);

struct FeatureMatrix {
  std::vector<CbgId> rows;
  std::vector<std::array<double, kFeatureCount>> values;
  std::vector<std::array<bool, kRecoveryCount>> censored;

  std::size_t size() const { return rows.size(); }
};

struct Exclusion {
  CbgId cbg;
  Feature feature = Feature::preparedness_proactivity;
  std::string reason;
};

struct AssembledFeatures {
  FeatureMatrix matrix;
  std::vector<Exclusion> exclusions;
};

/// Keeps complete rows; lists every missing feature of excluded rows.
/// Throws InsufficientDataError when fewer than k complete rows remain.
AssembledFeatures assemble_feature_matrix(std::span<const FeatureVector> features, int k_clusters);

}  // namespace resilience::features
