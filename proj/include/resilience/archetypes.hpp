#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "resilience/core.hpp"
#include "resilience/features.hpp"
#include "resilience/indices.hpp"
#include "resilience/ingest.hpp"

namespace resilience::archetypes {

struct ArchetypeAssignment {
  std::vector<ArchetypeLabel> cluster_labels;
  std::vector<std::size_t> cluster_sizes;
  std::vector<double> cluster_median_risk;
  std::vector<double> cluster_median_resilience;
  double global_median_risk = 0.0;
  double global_median_resilience = 0.0;

  // Label of every row, given per-row cluster labels.
  std::vector<ArchetypeLabel> row_labels(std::span<const int> clusters) const;
};

/// A cluster is high-risk iff its median risk >= the global median risk (ties go High);
/// resilience likewise. points[i] belongs to cluster clusters[i].
ArchetypeAssignment label_quadrants(const indices::IndexPoints& points, std::span<const int> clusters, int k);

struct BoxStats {
  std::size_t n = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
  std::vector<double> outliers;  // outside [q1 - 1.5 IQR, q3 + 1.5 IQR]
};

// Quantile with linear interpolation between closest ranks; sorted must be non-empty.
double quantile(std::span<const double> sorted, double p);
BoxStats box_stats(std::vector<double> values);

inline constexpr const char* kAllArchetypes = "ALL";

struct FeatureStatsRow {
  std::string archetype;  // HH/HL/LH/LL or ALL
  Feature feature = Feature::preparedness_proactivity;
  BoxStats stats;
};

/// Box-plot numbers per (archetype, feature), archetypes in HH, HL, LH, LL order (only those
/// with members) followed by ALL.
std::vector<FeatureStatsRow> archetype_feature_stats(const features::FeatureMatrix& matrix,
                                                     std::span<const ArchetypeLabel> row_labels);

struct IncomeRow {
  std::string archetype;
  std::size_t cbg_count = 0;
  std::size_t income_count = 0;
  std::optional<double> mean_income;    // nullopt: no member has an income
  std::optional<double> median_income;
};

std::vector<IncomeRow> income_disparity(const ingest::IncomeMap& incomes, std::span<const CbgId> rows,
                                        std::span<const ArchetypeLabel> row_labels);

nlohmann::json assignment_json(const ArchetypeAssignment& a);

}  // namespace resilience::archetypes
