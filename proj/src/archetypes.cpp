#include "resilience/archetypes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace resilience::archetypes {

std::vector<ArchetypeLabel> ArchetypeAssignment::row_labels(std::span<const int> clusters) const {
  std::vector<ArchetypeLabel> out;
  out.reserve(clusters.size());
  for (int c : clusters) out.push_back(cluster_labels.at(static_cast<std::size_t>(c)));
  return out;
}

ArchetypeAssignment label_quadrants(const indices::IndexPoints& points, std::span<const int> clusters, int k) {
  if (clusters.size() != points.points.size()) throw std::invalid_argument("every point needs a cluster");
  ArchetypeAssignment a;
  a.global_median_risk = points.global_median_risk;
  a.global_median_resilience = points.global_median_resilience;
  std::vector<std::vector<double>> risk(static_cast<std::size_t>(k)), res(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    auto c = static_cast<std::size_t>(clusters[i]);
    risk.at(c).push_back(points.points[i].risk_index);
    res.at(c).push_back(points.points[i].resilience_index);
  }
  for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
    a.cluster_sizes.push_back(risk[c].size());
    if (risk[c].empty()) {
      // An empty cluster has no medians; it is reported as LL with NaN medians.
      a.cluster_median_risk.push_back(NAN);
      a.cluster_median_resilience.push_back(NAN);
      a.cluster_labels.push_back(ArchetypeLabel::LL);
      continue;
    }
    double mr = indices::median(risk[c]);
    double ms = indices::median(res[c]);
    a.cluster_median_risk.push_back(mr);
    a.cluster_median_resilience.push_back(ms);
    a.cluster_labels.push_back(make_label(mr >= a.global_median_risk, ms >= a.global_median_resilience));
  }
  return a;
}

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty set");
  double pos = p * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats s;
  s.n = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double iqr = s.q3 - s.q1;
  for (double v : values)
    if (v < s.q1 - 1.5 * iqr || v > s.q3 + 1.5 * iqr) s.outliers.push_back(v);
  return s;
}

namespace {

// Groups row indices by label in HH, HL, LH, LL order, skipping empty groups, then ALL.
std::vector<std::pair<std::string, std::vector<std::size_t>>> groups_of(std::span<const ArchetypeLabel> row_labels) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  for (ArchetypeLabel l : kAllLabels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < row_labels.size(); ++i)
      if (row_labels[i] == l) idx.push_back(i);
    if (!idx.empty()) out.emplace_back(std::string(to_string(l)), std::move(idx));
  }
  std::vector<std::size_t> all(row_labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  out.emplace_back(kAllArchetypes, std::move(all));
  return out;
}

}  // namespace

std::vector<FeatureStatsRow> archetype_feature_stats(const features::FeatureMatrix& matrix,
                                                     std::span<const ArchetypeLabel> row_labels) {
  if (row_labels.size() != matrix.size()) throw std::invalid_argument("one label per matrix row required");
  std::vector<FeatureStatsRow> out;
  for (const auto& [name, idx] : groups_of(row_labels)) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      std::vector<double> v;
      v.reserve(idx.size());
      for (auto i : idx) v.push_back(matrix.values[i][j]);
      out.push_back({name, static_cast<Feature>(j), box_stats(std::move(v))});
    }
  }
  return out;
}

std::vector<IncomeRow> income_disparity(const ingest::IncomeMap& incomes, std::span<const CbgId> rows,
                                        std::span<const ArchetypeLabel> row_labels) {
  if (row_labels.size() != rows.size()) throw std::invalid_argument("one label per row required");
  std::vector<IncomeRow> out;
  for (const auto& [name, idx] : groups_of(row_labels)) {
    IncomeRow r{.archetype = name, .cbg_count = idx.size(), .income_count = 0, .mean_income = {}, .median_income = {}};
    std::vector<double> v;
    for (auto i : idx)
      if (auto it = incomes.find(rows[i]); it != incomes.end()) v.push_back(it->second);
    r.income_count = v.size();
    if (!v.empty()) {
      double sum = 0.0;
      for (double x : v) sum += x;
      r.mean_income = sum / static_cast<double>(v.size());
      r.median_income = indices::median(std::move(v));
    }
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json assignment_json(const ArchetypeAssignment& a) {
  using nlohmann::json;
  json clusters = json::array();
  for (std::size_t c = 0; c < a.cluster_labels.size(); ++c) {
    auto num = [](double v) { return std::isnan(v) ? json() : json(v); };
    clusters.push_back({{"cluster", c},
                        {"label", to_string(a.cluster_labels[c])},
                        {"size", a.cluster_sizes[c]},
                        {"median_risk", num(a.cluster_median_risk[c])},
                        {"median_resilience", num(a.cluster_median_resilience[c])}});
  }
  json labels = json::object();
  for (std::size_t c = 0; c < a.cluster_labels.size(); ++c) labels[std::to_string(c)] = to_string(a.cluster_labels[c]);
  std::vector<ArchetypeLabel> sorted = a.cluster_labels;
  std::sort(sorted.begin(), sorted.end());
  bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  return {{"cluster_labels", labels},
          {"clusters", clusters},
          {"global_median_risk", a.global_median_risk},
          {"global_median_resilience", a.global_median_resilience},
          {"labels_distinct", distinct}};
}

}  // namespace resilience::archetypes
