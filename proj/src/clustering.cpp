#include "resilience/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace resilience::cluster {

uint64_t SplitMix64::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t seed, uint64_t index) {
  SplitMix64 g(seed);
  uint64_t v = 0;
  for (uint64_t i = 0; i <= index; ++i) v = g.next();
  return v;
}

Matrix Matrix::from(const indices::NormalizedMatrix& nm) {
  Matrix m(nm.size(), kFeatureCount);
  for (std::size_t i = 0; i < nm.size(); ++i) std::copy(nm.values[i].begin(), nm.values[i].end(), m.row(i).begin());
  return m;
}

Matrix Matrix::from(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols) throw std::invalid_argument("ragged point matrix");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  return sizes;
}

namespace {

inline int nearest(std::span<const double> p, const Matrix& centroids, double& best) {
  int arg = 0;
  best = squared_distance(p, centroids.row(0));
  for (std::size_t c = 1; c < centroids.rows; ++c) {
    double d = squared_distance(p, centroids.row(c));
    if (d < best) {
      best = d;
      arg = static_cast<int>(c);
    }
  }
  return arg;
}

// Greedy k-means++: each new center is the best of 2 + floor(ln k) D^2-weighted draws,
// judged by the resulting potential.
Matrix kmeanspp_seed(const Matrix& pts, int k, SplitMix64& rng) {
  const std::size_t n = pts.rows;
  Matrix centroids(static_cast<std::size_t>(k), pts.cols);
  std::vector<bool> chosen(n, false);
  std::size_t first = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
  chosen[first] = true;
  std::copy(pts.row(first).begin(), pts.row(first).end(), centroids.row(0).begin());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(pts.row(i), centroids.row(0));
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  std::vector<double> trial_d2(n), best_d2(n);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      double best_potential = 0.0;
      for (int t = 0; t < trials; ++t) {
        double target = rng.uniform() * total;
        double acc = 0.0;
        std::size_t cand = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          acc += d2[i];
          cand = i;
          if (acc > target) break;
        }
        double potential = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          trial_d2[i] = std::min(d2[i], squared_distance(pts.row(i), pts.row(cand)));
          potential += trial_d2[i];
        }
        if (pick == n || potential < best_potential) {
          pick = cand;
          best_potential = potential;
          best_d2.swap(trial_d2);
        }
      }
      d2.swap(best_d2);
    } else {
      for (int t = 0; t < trials; ++t) rng.next();  // keep the stream position independent of the data
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (!chosen[i]) pick = i;
      if (pick == n) pick = 0;
    }
    chosen[pick] = true;
    auto dst = centroids.row(static_cast<std::size_t>(c));
    std::copy(pts.row(pick).begin(), pts.row(pick).end(), dst.begin());
  }
  return centroids;
}

// Means of the labelled points, summed in point order.
void update_centroids(const Matrix& pts, const std::vector<int>& labels, Matrix& centroids,
                      std::vector<std::size_t>& sizes) {
  std::fill(sizes.begin(), sizes.end(), 0);
  Matrix sums(centroids.rows, centroids.cols);
  for (std::size_t i = 0; i < pts.rows; ++i) {
    auto c = static_cast<std::size_t>(labels[i]);
    ++sizes[c];
    auto dst = sums.row(c);
    auto src = pts.row(i);
    for (std::size_t j = 0; j < pts.cols; ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    if (sizes[c] == 0) continue;
    auto dst = centroids.row(c);
    auto src = sums.row(c);
    for (std::size_t j = 0; j < centroids.cols; ++j) dst[j] = src[j] / static_cast<double>(sizes[c]);
  }
}

// Moves the point farthest from its centroid (taken from a cluster with >= 2 members)
// into each empty cluster and reseeds that centroid at it.
bool repair_empty(const Matrix& pts, std::vector<int>& labels, std::vector<double>& distances, Matrix& centroids,
                  std::vector<std::size_t>& sizes) {
  bool changed = false;
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    if (sizes[c] != 0) continue;
    std::size_t far = pts.rows;
    double best = -1.0;
    for (std::size_t i = 0; i < pts.rows; ++i) {
      if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
      if (distances[i] > best) {
        best = distances[i];
        far = i;
      }
    }
    if (far == pts.rows) break;
    --sizes[static_cast<std::size_t>(labels[far])];
    labels[far] = static_cast<int>(c);
    sizes[c] = 1;
    distances[far] = 0.0;
    std::copy(pts.row(far).begin(), pts.row(far).end(), centroids.row(c).begin());
    changed = true;
  }
  return changed;
}

void canonical_relabel(ClusterModel& m) {
  std::vector<std::size_t> order(static_cast<std::size_t>(m.k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = m.centroids.row(a), rb = m.centroids.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::vector<int> new_label(order.size());
  Matrix sorted(m.centroids.rows, m.centroids.cols);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    new_label[order[pos]] = static_cast<int>(pos);
    std::copy(m.centroids.row(order[pos]).begin(), m.centroids.row(order[pos]).end(), sorted.row(pos).begin());
  }
  m.centroids = std::move(sorted);
  for (int& l : m.labels) l = new_label[static_cast<std::size_t>(l)];
}

ClusterModel fit_once(const Matrix& pts, int k, uint64_t seed) {
  SplitMix64 rng(seed);
  ClusterModel m;
  m.k = k;
  m.seed = seed;
  m.centroids = kmeanspp_seed(pts, k, rng);
  std::vector<int> labels(pts.rows, -1);
  std::vector<double> distances(pts.rows, 0.0);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  std::vector<int> previous;
  double inertia = 0.0;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    previous = labels;
    inertia = assign_step(pts, m.centroids, labels, distances);
    if (!m.inertia_trace.empty() && inertia > m.inertia_trace.back() * (1.0 + 1e-12) + 1e-300)
      throw InvariantViolation("k-means inertia increased from " + std::to_string(m.inertia_trace.back()) + " to " +
                               std::to_string(inertia));
    m.inertia_trace.push_back(inertia);
    m.iterations = iter + 1;
    if (labels == previous) break;
    update_centroids(pts, labels, m.centroids, sizes);
    if (repair_empty(pts, labels, distances, m.centroids, sizes)) update_centroids(pts, labels, m.centroids, sizes);
  }
  m.labels = std::move(labels);
  m.inertia = inertia;
  canonical_relabel(m);
  return m;
}

}  // namespace

double assign_step(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                   std::vector<double>& distances) {
  labels.resize(points.rows);
  distances.resize(points.rows);
  const auto n = static_cast<std::ptrdiff_t>(points.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double best = 0.0;
    labels[i] = nearest(points.row(static_cast<std::size_t>(i)), centroids, best);
    distances[i] = best;
  }
  double inertia = 0.0;
  for (double d : distances) inertia += d;
  return inertia;
}

ClusterModel kmeans_fit(const Matrix& points, int k, uint64_t seed, int restarts) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (points.rows < static_cast<std::size_t>(k))
    throw InsufficientDataError("k-means needs at least k=" + std::to_string(k) + " rows, got " +
                                std::to_string(points.rows));
  if (restarts <= 1) return fit_once(points, k, seed);
  ClusterModel best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    ClusterModel m = fit_once(points, k, derive_seed(seed, static_cast<uint64_t>(r)));
    if (!have || m.inertia < best.inertia) {
      best = std::move(m);
      have = true;
    }
  }
  best.seed = seed;
  return best;
}

ClusterModel kmeans_fit(const indices::NormalizedMatrix& nm, int k, uint64_t seed, int restarts) {
  ClusterModel m = kmeans_fit(Matrix::from(nm), k, seed, restarts);
  m.rows = nm.rows;
  if (k >= 2) m.silhouette = silhouette_score(Matrix::from(nm), m.labels, k);
  return m;
}

namespace {

void check_silhouette_args(const Matrix& points, std::span<const int> labels, int k,
                           std::vector<std::size_t>& sizes) {
  if (k < 2) throw std::invalid_argument("silhouette needs k >= 2");
  if (labels.size() != points.rows) throw std::invalid_argument("label count does not match rows");
  sizes.assign(static_cast<std::size_t>(k), 0);
  for (int l : labels) {
    if (l < 0 || l >= k) throw std::invalid_argument("label out of range");
    ++sizes[static_cast<std::size_t>(l)];
  }
  for (auto s : sizes)
    if (s == 0) throw std::invalid_argument("silhouette needs every cluster non-empty");
}

inline double point_silhouette(const Matrix& points, std::span<const int> labels,
                               const std::vector<std::size_t>& sizes, std::size_t i, std::vector<double>& sums) {
  std::fill(sums.begin(), sums.end(), 0.0);
  auto pi = points.row(i);
  for (std::size_t j = 0; j < points.rows; ++j) {
    if (j == i) continue;
    sums[static_cast<std::size_t>(labels[j])] += std::sqrt(squared_distance(pi, points.row(j)));
  }
  auto own = static_cast<std::size_t>(labels[i]);
  if (sizes[own] < 2) return 0.0;
  double a = sums[own] / static_cast<double>(sizes[own] - 1);
  double b = INFINITY;
  for (std::size_t c = 0; c < sizes.size(); ++c)
    if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
  double denom = std::max(a, b);
  return denom > 0.0 ? (b - a) / denom : 0.0;
}

}  // namespace

double silhouette_score(const Matrix& points, std::span<const int> labels, int k) {
  std::vector<std::size_t> sizes;
  check_silhouette_args(points, labels, k, sizes);
  std::vector<double> s(points.rows);
  const auto n = static_cast<std::ptrdiff_t>(points.rows);
#pragma omp parallel
  {
    std::vector<double> sums(static_cast<std::size_t>(k));
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      s[static_cast<std::size_t>(i)] = point_silhouette(points, labels, sizes, static_cast<std::size_t>(i), sums);
  }
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(points.rows);
}

namespace serial {

double assign_step(const Matrix& points, const Matrix& centroids, std::vector<int>& labels,
                   std::vector<double>& distances) {
  labels.resize(points.rows);
  distances.resize(points.rows);
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) {
    double best = 0.0;
    labels[i] = nearest(points.row(i), centroids, best);
    distances[i] = best;
    inertia += best;
  }
  return inertia;
}

double silhouette_score(const Matrix& points, std::span<const int> labels, int k) {
  std::vector<std::size_t> sizes;
  check_silhouette_args(points, labels, k, sizes);
  std::vector<double> sums(static_cast<std::size_t>(k));
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) total += point_silhouette(points, labels, sizes, i, sums);
  return total / static_cast<double>(points.rows);
}

}  // namespace serial

std::vector<SweepRow> sweep_k(const Matrix& points, int k_min, int k_max, uint64_t seed, int restarts) {
  if (k_min < 2 || k_max < k_min) throw std::invalid_argument("sweep range must satisfy 2 <= k_min <= k_max");
  if (static_cast<std::size_t>(k_max) >= points.rows)
    throw InsufficientDataError("sweep k_max=" + std::to_string(k_max) + " needs more than " +
                                std::to_string(points.rows) + " rows");
  std::vector<SweepRow> out;
  for (int k = k_min; k <= k_max; ++k) {
    ClusterModel m = kmeans_fit(points, k, derive_seed(seed, static_cast<uint64_t>(k)), restarts);
    out.push_back({k, m.inertia, silhouette_score(points, m.labels, k)});
  }
  return out;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("partitions differ in size");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto choose2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [_, v] : table) index += choose2(v);
  for (const auto& [_, v] : rows) sum_a += choose2(v);
  for (const auto& [_, v] : cols) sum_b += choose2(v);
  double expected = sum_a * sum_b / choose2(n);
  double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial and identical in structure
  return (index - expected) / (max_index - expected);
}

nlohmann::json model_json(const ClusterModel& m) {
  using nlohmann::json;
  json centroids = json::array();
  for (std::size_t c = 0; c < m.centroids.rows; ++c) {
    json row = json::array();
    for (double v : m.centroids.row(c)) row.push_back(v);
    centroids.push_back(row);
  }
  json assignments = json::object();
  for (std::size_t i = 0; i < m.rows.size(); ++i) assignments[m.rows[i].str()] = m.labels[i];
  json out = {{"k", m.k},
          {"seed", m.seed},
          {"centroids", centroids},
          {"feature_order", [] {
             json names = json::array();
             for (std::size_t j = 0; j < kFeatureCount; ++j) names.push_back(feature_name(j));
             return names;
           }()},
          {"assignments", assignments},
          {"cluster_sizes", m.cluster_sizes()},
          {"inertia", m.inertia},
          {"silhouette", m.silhouette},
          {"iterations", m.iterations},
          {"rng", "splitmix64"}};
  // Without row ids the labels are kept positionally.
  if (m.rows.empty()) out["labels"] = m.labels;
  return out;
}

ClusterModel model_from_json(const nlohmann::json& j) {
  ClusterModel m;
  try {
    m.k = j.at("k").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
    m.centroids = Matrix::from(rows);
    for (const auto& [id, label] : j.at("assignments").items()) {
      m.rows.push_back(CbgId::parse(id));
      m.labels.push_back(label.get<int>());
    }
    if (j.contains("labels")) m.labels = j.at("labels").get<std::vector<int>>();
    m.inertia = j.at("inertia").get<double>();
    m.silhouette = j.at("silhouette").get<double>();
    m.iterations = j.at("iterations").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("cluster model: ") + e.what());
  }
  return m;
}

}  // namespace resilience::cluster
