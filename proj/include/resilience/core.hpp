#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace resilience {

// Bad input files, malformed configs. CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not enough complete rows to cluster. CLI exit code 3.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal invariant did not hold. CLI exit code 4.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Timezone-naive calendar date, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(int32_t days) : days_(days) {}
  static Date from_ymd(int year, unsigned month, unsigned day);
  static std::optional<Date> try_parse(std::string_view iso);
  static Date parse(std::string_view iso);  // throws InputError

  constexpr int32_t days() const { return days_; }
  std::string iso() const;

  constexpr Date operator+(int n) const { return Date(days_ + n); }
  constexpr Date operator-(int n) const { return Date(days_ - n); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr Date& operator++() {
    ++days_;
    return *this;
  }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  int32_t days_ = 0;
};

/// Local wall-clock time in seconds since 1970-01-01T00:00:00 (no zone).
using Timestamp = int64_t;
constexpr int64_t kSecondsPerDay = 86400;

// Accepts "YYYY-MM-DDTHH:MM:SS" (local) or the same with a trailing "Z" or
// "+HH:MM"/"-HH:MM", in which case the value is shifted to local time using
// utc_offset_minutes.
std::optional<Timestamp> try_parse_timestamp(std::string_view s, int utc_offset_minutes);
std::string format_timestamp(Timestamp t);
inline Date date_of(Timestamp t) {
  return Date(static_cast<int32_t>(t >= 0 ? t / kSecondsPerDay : (t - kSecondsPerDay + 1) / kSecondsPerDay));
}
inline Timestamp start_of(Date d) { return static_cast<Timestamp>(d.days()) * kSecondsPerDay; }

/// 12-digit census block group code.
class CbgId {
 public:
  CbgId() = default;
  static std::optional<CbgId> try_parse(std::string_view s);
  static CbgId parse(std::string_view s);  // throws InputError
  static bool valid(std::string_view s);

  const std::string& str() const { return value_; }
  auto operator<=>(const CbgId&) const = default;

 private:
  explicit CbgId(std::string v) : value_(std::move(v)) {}
  std::string value_;
};

struct DateWindow {
  Date start;
  Date end;

  bool contains(Date d) const { return start <= d && d <= end; }
  int length_days() const { return end - start + 1; }
  bool well_formed() const { return start <= end; }
  bool operator==(const DateWindow&) const = default;
};

struct AnalysisConfig {
  Date landfall_date = Date::from_ymd(2017, 8, 25);
  DateWindow preparedness_window{Date::from_ymd(2017, 8, 20), Date::from_ymd(2017, 8, 25)};
  DateWindow poi_baseline_window{Date::from_ymd(2017, 8, 1), Date::from_ymd(2017, 8, 14)};
  DateWindow evac_baseline_window{Date::from_ymd(2017, 7, 9), Date::from_ymd(2017, 8, 5)};
  DateWindow evac_event_window{Date::from_ymd(2017, 8, 6), Date::from_ymd(2017, 9, 30)};
  DateWindow traffic_event_window{Date::from_ymd(2017, 8, 20), Date::from_ymd(2017, 9, 11)};
  DateWindow telecom_baseline_window{Date::from_ymd(2017, 8, 1), Date::from_ymd(2017, 8, 14)};
  DateWindow telecom_min_window{Date::from_ymd(2017, 8, 24), Date::from_ymd(2017, 9, 3)};
  DateWindow recovery_baseline_window{Date::from_ymd(2017, 8, 1), Date::from_ymd(2017, 8, 21)};
  Date recovery_observation_end = Date::from_ymd(2017, 9, 30);
  double recovery_threshold_pct = 0.90;
  int rolling_window_days = 7;
  int k_clusters = 4;
  uint64_t rng_seed = 20170825;

  // Knobs beyond the core study parameters.
  bool rolling_sum = false;            // literal 7-day sum instead of mean
  int min_null_duration_minutes = 0;   // flooded if null readings span at least this long
  int restarts = 1;                    // k-means restarts, best inertia kept
  int utc_offset_minutes = -300;       // local offset used for zoned timestamps

  bool operator==(const AnalysisConfig&) const = default;
};

/// Returns one message per violated invariant, each starting with the field name.
std::vector<std::string> validate_config(const AnalysisConfig& cfg);

enum class MetricKind : uint8_t {
  poi_pharmacy,
  poi_gas,
  poi_essential,
  poi_nonessential,
  cc_essential,
  cc_nonessential,
  evacuation_rate,
  download_kbps,
};
constexpr std::array<MetricKind, 8> kAllMetrics = {
    MetricKind::poi_pharmacy,  MetricKind::poi_gas,         MetricKind::poi_essential,
    MetricKind::poi_nonessential, MetricKind::cc_essential, MetricKind::cc_nonessential,
    MetricKind::evacuation_rate, MetricKind::download_kbps};

std::string_view to_string(MetricKind m);
std::optional<MetricKind> metric_from_string(std::string_view s);

struct DailySeries {
  CbgId cbg;
  MetricKind metric = MetricKind::poi_pharmacy;
  std::map<Date, double> values;

  bool operator==(const DailySeries&) const = default;
};

// Feature catalog. Order is the column order of every persisted matrix.
enum class Feature : uint8_t {
  preparedness_proactivity,
  evacuation_rate_change,
  flooded_road_length,
  claim_count,
  total_damage_usd,
  damage_ratio,
  telecom_disruption,
  recovery_essential_activity,
  recovery_nonessential_activity,
  recovery_cc_essential,
  recovery_cc_nonessential,
};
constexpr std::size_t kFeatureCount = 11;
constexpr std::size_t kRecoveryCount = 4;
constexpr std::size_t kFirstRecovery = 7;
constexpr std::array<Feature, 7> kRiskFeatures = {
    Feature::flooded_road_length, Feature::claim_count,        Feature::total_damage_usd,
    Feature::damage_ratio,        Feature::telecom_disruption, Feature::preparedness_proactivity,
    Feature::evacuation_rate_change};
constexpr std::array<Feature, 4> kRecoveryFeatures = {
    Feature::recovery_essential_activity, Feature::recovery_nonessential_activity,
    Feature::recovery_cc_essential, Feature::recovery_cc_nonessential};

constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }
std::string_view feature_name(Feature f);
std::string_view feature_name(std::size_t column);
std::optional<Feature> feature_from_string(std::string_view s);
// Column name of the censor flag for recovery feature number i (0..3).
std::string_view censor_column_name(std::size_t i);

struct FeatureVector {
  CbgId cbg;
  std::array<std::optional<double>, kFeatureCount> values{};
  // Reason code for every missing value, empty otherwise.
  std::array<std::string, kFeatureCount> missing_reason{};
  std::array<bool, kRecoveryCount> censored{};

  std::optional<double>& operator[](Feature f) { return values[index_of(f)]; }
  const std::optional<double>& operator[](Feature f) const { return values[index_of(f)]; }
  bool complete() const;
  bool operator==(const FeatureVector&) const = default;
};

struct RiskResiliencePoint {
  CbgId cbg;
  double risk_index = 0.0;
  double resilience_index = 0.0;
  bool operator==(const RiskResiliencePoint&) const = default;
};

enum class ArchetypeLabel : uint8_t { HH, HL, LH, LL };
constexpr std::array<ArchetypeLabel, 4> kAllLabels = {ArchetypeLabel::HH, ArchetypeLabel::HL,
                                                      ArchetypeLabel::LH, ArchetypeLabel::LL};
std::string_view to_string(ArchetypeLabel a);
std::optional<ArchetypeLabel> label_from_string(std::string_view s);
inline ArchetypeLabel make_label(bool high_risk, bool high_resilience) {
  if (high_risk) return high_resilience ? ArchetypeLabel::HH : ArchetypeLabel::HL;
  return high_resilience ? ArchetypeLabel::LH : ArchetypeLabel::LL;
}

// JSON forms. Dates are ISO-8601 strings and windows are [start, end] pairs.
void to_json(nlohmann::json& j, const Date& d);
void from_json(const nlohmann::json& j, Date& d);
void to_json(nlohmann::json& j, const CbgId& c);
void from_json(const nlohmann::json& j, CbgId& c);
void to_json(nlohmann::json& j, const DateWindow& w);
void from_json(const nlohmann::json& j, DateWindow& w);
void to_json(nlohmann::json& j, const AnalysisConfig& c);
void from_json(const nlohmann::json& j, AnalysisConfig& c);  // absent keys keep defaults
void to_json(nlohmann::json& j, const DailySeries& s);
void from_json(const nlohmann::json& j, DailySeries& s);
void to_json(nlohmann::json& j, const FeatureVector& f);
void from_json(const nlohmann::json& j, FeatureVector& f);
void to_json(nlohmann::json& j, const RiskResiliencePoint& p);
void from_json(const nlohmann::json& j, RiskResiliencePoint& p);
void to_json(nlohmann::json& j, const ArchetypeLabel& a);
void from_json(const nlohmann::json& j, ArchetypeLabel& a);

AnalysisConfig load_config(const std::string& path);  // throws InputError

}  // namespace resilience
