#pragma once

#include <array>
#include <span>
#include <vector>

#include "resilience/core.hpp"
#include "resilience/features.hpp"

namespace resilience::indices {

/// Min-max scaled copy of a feature matrix. Constant columns map to 0.5.
struct NormalizedMatrix {
  std::vector<CbgId> rows;
  std::vector<std::array<double, kFeatureCount>> values;
  std::array<double, kFeatureCount> min{};
  std::array<double, kFeatureCount> max{};

  std::size_t size() const { return rows.size(); }
};

NormalizedMatrix normalize_minmax(const features::FeatureMatrix& m);
// Inverse map using the stored (min, max); constant columns come back as min.
std::array<double, kFeatureCount> denormalize(const NormalizedMatrix& nm, const std::array<double, kFeatureCount>& row);

// Median with the mean-of-middle-two convention for even counts.
double median(std::vector<double> values);

/// Median of the seven normalized risk features.
double risk_index(const std::array<double, kFeatureCount>& row);
/// 1 - median of the four normalized recovery durations (shorter recovery, higher resilience).
double resilience_index(const std::array<double, kFeatureCount>& row);

struct IndexPoints {
  std::vector<RiskResiliencePoint> points;
  double global_median_risk = 0.0;
  double global_median_resilience = 0.0;
};

IndexPoints index_points(const NormalizedMatrix& nm);
// Global medians over arbitrary points (used after transforms or subsetting).
IndexPoints with_global_medians(std::vector<RiskResiliencePoint> points);

}  // namespace resilience::indices
