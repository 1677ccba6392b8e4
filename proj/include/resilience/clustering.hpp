#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "resilience/core.hpp"
#include "resilience/indices.hpp"

namespace resilience::cluster {

/// splitmix64 generator. The exact sequence is part of the reproducibility contract:
///   state += 0x9E3779B97F4A7C15; z = state;
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
///   return z ^ (z >> 31);
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  uint64_t next();
  // Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  uint64_t state_;
};

// Sub-seed for restart r / sweep entry k: the r-th splitmix64 output of a stream seeded with seed.
uint64_t derive_seed(uint64_t seed, uint64_t index);

/// Dense row-major point matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  static Matrix from(const indices::NormalizedMatrix& nm);
  static Matrix from(const std::vector<std::vector<double>>& rows);

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

double squared_distance(std::span<const double> a, std::span<const double> b);

struct ClusterModel {
  int k = 0;
  Matrix centroids;           // k x dim, canonical (ascending lexicographic) order
  std::vector<int> labels;    // one per input row
  std::vector<CbgId> rows;    // row ids when fitted from a NormalizedMatrix
  double inertia = 0.0;
  int iterations = 0;
  double silhouette = 0.0;
  uint64_t seed = 0;
  std::vector<double> inertia_trace;  // inertia after every assignment step

  std::vector<std::size_t> cluster_sizes() const;
};

constexpr int kMaxIterations = 300;

/// Lloyd iterations from k-means++ seeding until the assignment is a fixpoint or
/// kMaxIterations steps. With restarts > 1, runs with derive_seed(seed, r) are compared
/// and the lowest inertia kept (earliest on ties). Throws InsufficientDataError if rows < k.
ClusterModel kmeans_fit(const Matrix& points, int k, uint64_t seed, int restarts = 1);
ClusterModel kmeans_fit(const indices::NormalizedMatrix& nm, int k, uint64_t seed, int restarts = 1);

/// Nearest centroid per point (ties to the lowest index); returns the inertia.
/// Parallel over points; the inertia is summed in point order.
double assign_step(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                   std::vector<double>& distances);

/// Mean silhouette with Euclidean distance. Singleton-cluster points contribute 0 and
/// points with a = b = 0 contribute 0. Throws std::invalid_argument if k < 2 or a cluster is empty.
double silhouette_score(const Matrix& points, std::span<const int> labels, int k);

namespace serial {
double assign_step(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                   std::vector<double>& distances);
double silhouette_score(const Matrix& points, std::span<const int> labels, int k);
}  // namespace serial

struct SweepRow {
  int k = 0;
  double inertia = 0.0;
  double silhouette = 0.0;
};

/// One fit per k in [k_min, k_max] using derive_seed(seed, k). Requires k_max < rows.
std::vector<SweepRow> sweep_k(const Matrix& points, int k_min, int k_max, uint64_t seed, int restarts = 1);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

nlohmann::json model_json(const ClusterModel& m);
ClusterModel model_from_json(const nlohmann::json& j);

}  // namespace resilience::cluster
