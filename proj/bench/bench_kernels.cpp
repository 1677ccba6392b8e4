// OpenMP kernels against their serial reference versions.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "resilience/clustering.hpp"
#include "resilience/geometry.hpp"

using namespace resilience;

namespace {

cluster::Matrix random_points(std::size_t n, std::size_t dim, uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cluster::Matrix m(n, dim);
  for (auto& x : m.data) x = u(eng);
  return m;
}

std::vector<int> labels_for(std::size_t n, int k) {
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<int>(i % static_cast<std::size_t>(k));
  return l;
}

geo::CbgTable grid(int side) {
  std::vector<geo::CbgShape> shapes;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      double x = -95.8 + 0.01 * i, y = 29.5 + 0.01 * j;
      geo::Polygon p{{{x, y}, {x + 0.01, y}, {x + 0.01, y + 0.01}, {x, y + 0.01}, {x, y}}, {}};
      std::string digits = std::to_string(i * side + j);
      geo::CbgShape s{.id = CbgId::parse("48201" + std::string(7 - digits.size(), '0') + digits),
                      .parts = {p},
                      .bbox = geo::BBox::of(p.exterior)};
      shapes.push_back(std::move(s));
    }
  return geo::CbgTable(std::move(shapes));
}

std::vector<geo::LonLat> random_lonlat(std::size_t n, int side) {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(0.0, 0.01 * side);
  std::vector<geo::LonLat> pts(n);
  for (auto& p : pts) p = {-95.8 + u(eng), 29.5 + u(eng)};
  return pts;
}

void BM_assign_step_omp(benchmark::State& st) {
  auto pts = random_points(static_cast<std::size_t>(st.range(0)), 11, 1);
  auto ctr = random_points(8, 11, 2);
  std::vector<int> labels;
  std::vector<double> dist;
  for (auto _ : st) benchmark::DoNotOptimize(cluster::assign_step(pts, ctr, labels, dist));
}

void BM_assign_step_serial(benchmark::State& st) {
  auto pts = random_points(static_cast<std::size_t>(st.range(0)), 11, 1);
  auto ctr = random_points(8, 11, 2);
  std::vector<int> labels;
  std::vector<double> dist;
  for (auto _ : st) benchmark::DoNotOptimize(cluster::serial::assign_step(pts, ctr, labels, dist));
}

void BM_silhouette_omp(benchmark::State& st) {
  auto n = static_cast<std::size_t>(st.range(0));
  auto pts = random_points(n, 11, 4);
  auto labels = labels_for(n, 4);
  for (auto _ : st) benchmark::DoNotOptimize(cluster::silhouette_score(pts, labels, 4));
}

void BM_silhouette_serial(benchmark::State& st) {
  auto n = static_cast<std::size_t>(st.range(0));
  auto pts = random_points(n, 11, 4);
  auto labels = labels_for(n, 4);
  for (auto _ : st) benchmark::DoNotOptimize(cluster::serial::silhouette_score(pts, labels, 4));
}

void BM_assign_points_omp(benchmark::State& st) {
  auto table = grid(40);
  auto pts = random_lonlat(static_cast<std::size_t>(st.range(0)), 40);
  for (auto _ : st) benchmark::DoNotOptimize(geo::assign_points(pts, table));
}

void BM_assign_points_serial(benchmark::State& st) {
  auto table = grid(40);
  auto pts = random_lonlat(static_cast<std::size_t>(st.range(0)), 40);
  for (auto _ : st) benchmark::DoNotOptimize(geo::serial::assign_points(pts, table));
}

}  // namespace

BENCHMARK(BM_assign_step_omp)->Arg(1461)->Arg(100000);
BENCHMARK(BM_assign_step_serial)->Arg(1461)->Arg(100000);
BENCHMARK(BM_silhouette_omp)->Arg(1461)->Arg(4000);
BENCHMARK(BM_silhouette_serial)->Arg(1461)->Arg(4000);
BENCHMARK(BM_assign_points_omp)->Arg(10000);
BENCHMARK(BM_assign_points_serial)->Arg(10000);

BENCHMARK_MAIN();
