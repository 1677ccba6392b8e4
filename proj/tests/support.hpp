#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "resilience/core.hpp"
#include "resilience/features.hpp"
#include "resilience/geometry.hpp"

namespace testsupport {

// Small random-value helper around a 64-bit Mersenne Twister.
class Gen {
 public:
  explicit Gen(uint64_t seed) : eng_(seed) {}
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(eng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(eng_); }
  uint64_t bits() { return eng_(); }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

resilience::CbgId cbg(int n);  // "48201" + zero-padded n
resilience::DailySeries series(const resilience::CbgId& id, resilience::MetricKind m, resilience::Date first,
                               const std::vector<double>& values);
resilience::geo::Polygon square(double lon0, double lat0, double size);
resilience::geo::Polygon random_convex(Gen& g, double cx, double cy, double radius, int vertices);
resilience::geo::CbgShape shape_of(const resilience::CbgId& id, resilience::geo::Polygon poly);
resilience::features::FeatureMatrix random_matrix(Gen& g, std::size_t rows);

struct PropertyResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  std::string first_failure;
  double seconds = 0.0;
};

// A property returns an empty optional when the generated case holds, else a message.
using Property = std::function<std::optional<std::string>(Gen&)>;

struct NamedProperty {
  std::string name;
  Property check;
};

// Every module invariant, one entry each.
const std::vector<NamedProperty>& all_properties();
PropertyResult run_property(const NamedProperty& p, int cases, uint64_t seed = 20170825);

}  // namespace testsupport
