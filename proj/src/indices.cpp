#include "resilience/indices.hpp"

#include <algorithm>
#include <stdexcept>

namespace resilience::indices {

NormalizedMatrix normalize_minmax(const features::FeatureMatrix& m) {
  if (m.values.empty()) throw InsufficientDataError("cannot normalize an empty feature matrix");
  NormalizedMatrix nm;
  nm.rows = m.rows;
  nm.min = m.values.front();
  nm.max = m.values.front();
  for (const auto& row : m.values)
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      nm.min[j] = std::min(nm.min[j], row[j]);
      nm.max[j] = std::max(nm.max[j], row[j]);
    }
  nm.values.resize(m.values.size());
  for (std::size_t i = 0; i < m.values.size(); ++i)
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      double span = nm.max[j] - nm.min[j];
      nm.values[i][j] = span > 0.0 ? (m.values[i][j] - nm.min[j]) / span : 0.5;
    }
  return nm;
}

std::array<double, kFeatureCount> denormalize(const NormalizedMatrix& nm, const std::array<double, kFeatureCount>& row) {
  std::array<double, kFeatureCount> out{};
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    double span = nm.max[j] - nm.min[j];
    out[j] = span > 0.0 ? nm.min[j] + row[j] * span : nm.min[j];
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double risk_index(const std::array<double, kFeatureCount>& row) {
  std::vector<double> v;
  v.reserve(kRiskFeatures.size());
  for (Feature f : kRiskFeatures) v.push_back(row[index_of(f)]);
  return median(std::move(v));
}

double resilience_index(const std::array<double, kFeatureCount>& row) {
  std::vector<double> v;
  v.reserve(kRecoveryFeatures.size());
  for (Feature f : kRecoveryFeatures) v.push_back(row[index_of(f)]);
  return 1.0 - median(std::move(v));
}

IndexPoints with_global_medians(std::vector<RiskResiliencePoint> points) {
  IndexPoints out;
  std::vector<double> risk, res;
  for (const auto& p : points) {
    risk.push_back(p.risk_index);
    res.push_back(p.resilience_index);
  }
  if (!points.empty()) {
    out.global_median_risk = median(std::move(risk));
    out.global_median_resilience = median(std::move(res));
  }
  out.points = std::move(points);
  return out;
}

IndexPoints index_points(const NormalizedMatrix& nm) {
  std::vector<RiskResiliencePoint> points;
  points.reserve(nm.size());
  for (std::size_t i = 0; i < nm.size(); ++i)
    points.push_back({nm.rows[i], risk_index(nm.values[i]), resilience_index(nm.values[i])});
  return with_global_medians(std::move(points));
}

}  // namespace resilience::indices
