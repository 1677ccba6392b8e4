#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "resilience/core.hpp"
#include "resilience/geometry.hpp"

namespace resilience::ingest {

struct StaySegment {
  std::string device_id;
  CbgId home_cbg;
  CbgId stay_cbg;
  Timestamp start = 0;
  Timestamp end = 0;
  bool operator==(const StaySegment&) const = default;
};

struct TrafficReading {
  std::string segment_id;
  Timestamp timestamp = 0;
  std::optional<double> speed;  // mph; nullopt is a null reading
  bool operator==(const TrafficReading&) const = default;
};

struct ClaimRecord {
  std::string claim_id;
  std::optional<geo::LonLat> location;
  std::optional<CbgId> cbg;
  double damage_amount_usd = 0.0;
};

struct Rejection {
  std::size_t line = 0;
  std::string reason;
};

struct FileReport {
  std::string file;
  std::size_t total_rows = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::map<std::string, std::size_t> reasons;
  std::vector<Rejection> rejections;

  void accept() {
    ++total_rows;
    ++accepted;
  }
  void reject(std::size_t line, std::string reason);
};

template <class T>
struct Loaded {
  T value;
  FileReport report;
};

using IncomeMap = std::map<CbgId, double>;
using BuildingMap = std::map<CbgId, int64_t>;
using RoadMap = std::map<std::string, geo::LineString>;

struct TrafficData {
  std::vector<TrafficReading> readings;
  RoadMap roads;
  FileReport readings_report;
  FileReport roads_report;
};

// Canonical file names, used both for raw input bundles and for the workspace.
namespace files {
inline constexpr const char* kCbgs = "cbgs.geojson";
inline constexpr const char* kIncome = "income.csv";
inline constexpr const char* kPoiVisits = "poi_visits.csv";
inline constexpr const char* kCardTransactions = "card_transactions.csv";
inline constexpr const char* kSpeedtests = "speedtests.csv";
inline constexpr const char* kStays = "stays.csv";
inline constexpr const char* kTraffic = "traffic.csv";
inline constexpr const char* kRoads = "roads.geojson";
inline constexpr const char* kClaims = "claims.csv";
inline constexpr const char* kBuildings = "buildings.csv";
inline constexpr const char* kReport = "ingest_report.json";
}  // namespace files
const std::vector<std::string>& mandatory_files();

// Metric families accepted by each daily-series file.
inline constexpr std::array<MetricKind, 4> kPoiMetrics = {MetricKind::poi_pharmacy, MetricKind::poi_gas,
                                                          MetricKind::poi_essential,
                                                          MetricKind::poi_nonessential};
inline constexpr std::array<MetricKind, 2> kCardMetrics = {MetricKind::cc_essential, MetricKind::cc_nonessential};
inline constexpr std::array<MetricKind, 1> kSpeedMetrics = {MetricKind::download_kbps};

Loaded<geo::CbgTable> load_cbg_geometries(const std::filesystem::path& path);
Loaded<IncomeMap> load_income_table(const std::filesystem::path& path);
// Duplicate (date, cbg, category) rows are summed, except download_kbps which is averaged.
Loaded<std::vector<DailySeries>> load_daily_series(const std::filesystem::path& path,
                                                   std::span<const MetricKind> accepted);
Loaded<std::vector<StaySegment>> load_stay_segments(const std::filesystem::path& path, int utc_offset_minutes = -300);
TrafficData load_traffic(const std::filesystem::path& readings_path, const std::filesystem::path& roads_path,
                         int utc_offset_minutes = -300);
Loaded<std::vector<ClaimRecord>> load_claims(const std::filesystem::path& path);
Loaded<BuildingMap> load_building_counts(const std::filesystem::path& path);

/// Everything the analysis needs, already validated.
struct Dataset {
  geo::CbgTable cbgs;
  IncomeMap incomes;
  std::vector<DailySeries> series;  // poi, card and speed-test series
  std::vector<StaySegment> stays;
  std::vector<TrafficReading> readings;
  RoadMap roads;
  std::vector<ClaimRecord> claims;
  BuildingMap buildings;
  nlohmann::json report;  // IngestReport
};

// Parses every mandatory file in dir; throws InputError naming the first missing file.
Dataset ingest_directory(const std::filesystem::path& dir, int utc_offset_minutes = -300);

// Writes one canonical file per dataset plus ingest_report.json.
void write_workspace(const Dataset& data, const std::filesystem::path& dir);
// Reads a workspace produced by write_workspace.
Dataset load_workspace(const std::filesystem::path& dir);

nlohmann::json report_json(const FileReport& r);

}  // namespace resilience::ingest
