#include "resilience/core.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>

namespace resilience {

namespace {

bool parse_uint(std::string_view s, int& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

constexpr std::array<std::string_view, 8> kMetricNames = {
    "poi_pharmacy", "poi_gas", "poi_essential", "poi_nonessential",
    "cc_essential", "cc_nonessential", "evacuation_rate", "download_kbps"};

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "preparedness_proactivity",
    "evacuation_rate_change",
    "flooded_road_length",
    "claim_count",
    "total_damage_usd",
    "damage_ratio",
    "telecom_disruption",
    "recovery_essential_activity",
    "recovery_nonessential_activity",
    "recovery_cc_essential",
    "recovery_cc_nonessential"};

constexpr std::array<std::string_view, kRecoveryCount> kCensorNames = {
    "censored_essential_activity", "censored_nonessential_activity", "censored_cc_essential",
    "censored_cc_nonessential"};

constexpr std::array<std::string_view, 4> kLabelNames = {"HH", "HL", "LH", "LL"};

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw InputError("invalid calendar date");
  return Date(static_cast<int32_t>(sys_days{ymd}.time_since_epoch().count()));
}

std::optional<Date> Date::try_parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!parse_uint(iso.substr(0, 4), y) || !parse_uint(iso.substr(5, 2), m) ||
      !parse_uint(iso.substr(8, 2), d))
    return std::nullopt;
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                     std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date(static_cast<int32_t>(sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(std::string_view iso) {
  auto d = try_parse(iso);
  if (!d) throw InputError("invalid date '" + std::string(iso) + "'");
  return *d;
}

std::string Date::iso() const {
  using namespace std::chrono;
  year_month_day ymd{sys_days{std::chrono::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<Timestamp> try_parse_timestamp(std::string_view s, int utc_offset_minutes) {
  if (s.size() < 19 || s[10] != 'T' || s[13] != ':' || s[16] != ':') return std::nullopt;
  auto date = Date::try_parse(s.substr(0, 10));
  int hh = 0, mm = 0, ss = 0;
  if (!date || !parse_uint(s.substr(11, 2), hh) || !parse_uint(s.substr(14, 2), mm) ||
      !parse_uint(s.substr(17, 2), ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  Timestamp t = start_of(*date) + hh * 3600 + mm * 60 + ss;
  std::string_view zone = s.substr(19);
  if (zone.empty()) return t;
  int zone_minutes = 0;
  if (zone == "Z") {
    zone_minutes = 0;
  } else if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') && zone[3] == ':') {
    int zh = 0, zm = 0;
    if (!parse_uint(zone.substr(1, 2), zh) || !parse_uint(zone.substr(4, 2), zm)) return std::nullopt;
    zone_minutes = (zh * 60 + zm) * (zone[0] == '-' ? -1 : 1);
  } else {
    return std::nullopt;
  }
  // t is wall-clock in the given zone; move to UTC, then to study-local time.
  return t - zone_minutes * 60 + static_cast<int64_t>(utc_offset_minutes) * 60;
}

std::string format_timestamp(Timestamp t) {
  Date d = date_of(t);
  int64_t secs = t - start_of(d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d", d.iso().c_str(), static_cast<int>(secs / 3600),
                static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  return buf;
}

bool CbgId::valid(std::string_view s) {
  if (s.size() != 12) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

std::optional<CbgId> CbgId::try_parse(std::string_view s) {
  if (!valid(s)) return std::nullopt;
  return CbgId(std::string(s));
}

CbgId CbgId::parse(std::string_view s) {
  auto id = try_parse(s);
  if (!id) throw InputError("invalid cbg_id '" + std::string(s) + "'");
  return *id;
}

std::vector<std::string> validate_config(const AnalysisConfig& cfg) {
  std::vector<std::string> out;
  auto window = [&](const DateWindow& w, const char* name) {
    if (!w.well_formed())
      out.push_back(std::string(name) + ": start " + w.start.iso() + " is after end " + w.end.iso());
  };
  window(cfg.preparedness_window, "preparedness_window");
  window(cfg.poi_baseline_window, "poi_baseline_window");
  window(cfg.evac_baseline_window, "evac_baseline_window");
  window(cfg.evac_event_window, "evac_event_window");
  window(cfg.traffic_event_window, "traffic_event_window");
  window(cfg.telecom_baseline_window, "telecom_baseline_window");
  window(cfg.telecom_min_window, "telecom_min_window");
  window(cfg.recovery_baseline_window, "recovery_baseline_window");
  if (cfg.preparedness_window.well_formed() && cfg.preparedness_window.end > cfg.landfall_date)
    out.push_back("preparedness_window: must end on or before landfall_date");
  if (cfg.recovery_observation_end < cfg.landfall_date)
    out.push_back("recovery_observation_end: before landfall_date");
  if (!(cfg.recovery_threshold_pct > 0.0 && cfg.recovery_threshold_pct <= 1.0))
    out.push_back("recovery_threshold_pct: must lie in (0, 1]");
  if (cfg.rolling_window_days < 1) out.push_back("rolling_window_days: must be >= 1");
  if (cfg.k_clusters < 2) out.push_back("k_clusters: must be >= 2");
  if (cfg.restarts < 1) out.push_back("restarts: must be >= 1");
  if (cfg.min_null_duration_minutes < 0) out.push_back("min_null_duration_minutes: must be >= 0");
  return out;
}

std::string_view to_string(MetricKind m) { return kMetricNames[static_cast<std::size_t>(m)]; }

std::optional<MetricKind> metric_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kMetricNames.size(); ++i)
    if (kMetricNames[i] == s) return static_cast<MetricKind>(i);
  return std::nullopt;
}

std::string_view feature_name(Feature f) { return kFeatureNames[index_of(f)]; }
std::string_view feature_name(std::size_t column) { return kFeatureNames.at(column); }
std::string_view censor_column_name(std::size_t i) { return kCensorNames.at(i); }

std::optional<Feature> feature_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kFeatureNames.size(); ++i)
    if (kFeatureNames[i] == s) return static_cast<Feature>(i);
  return std::nullopt;
}

bool FeatureVector::complete() const {
  for (const auto& v : values)
    if (!v) return false;
  return true;
}

std::string_view to_string(ArchetypeLabel a) { return kLabelNames[static_cast<std::size_t>(a)]; }

std::optional<ArchetypeLabel> label_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i)
    if (kLabelNames[i] == s) return static_cast<ArchetypeLabel>(i);
  return std::nullopt;
}

// ---- JSON -----------------------------------------------------------------

void to_json(nlohmann::json& j, const Date& d) { j = d.iso(); }
void from_json(const nlohmann::json& j, Date& d) { d = Date::parse(j.get<std::string>()); }

void to_json(nlohmann::json& j, const CbgId& c) { j = c.str(); }
void from_json(const nlohmann::json& j, CbgId& c) { c = CbgId::parse(j.get<std::string>()); }

void to_json(nlohmann::json& j, const DateWindow& w) { j = nlohmann::json::array({w.start, w.end}); }
void from_json(const nlohmann::json& j, DateWindow& w) {
  if (!j.is_array() || j.size() != 2) throw InputError("date window must be a [start, end] pair");
  w.start = j[0].get<Date>();
  w.end = j[1].get<Date>();
}

#define RESILIENCE_CONFIG_FIELDS(X) \
  X(landfall_date)                  \
  X(preparedness_window)            \
  X(poi_baseline_window)            \
  X(evac_baseline_window)           \
  X(evac_event_window)              \
  X(traffic_event_window)           \
  X(telecom_baseline_window)        \
  X(telecom_min_window)             \
  X(recovery_baseline_window)       \
  X(recovery_observation_end)       \
  X(recovery_threshold_pct)         \
  X(rolling_window_days)            \
  X(k_clusters)                     \
  X(rng_seed)                       \
  X(rolling_sum)                    \
  X(min_null_duration_minutes)      \
  X(restarts)                       \
  X(utc_offset_minutes)

void to_json(nlohmann::json& j, const AnalysisConfig& c) {
  j = nlohmann::json::object();
#define X(name) j[#name] = c.name;
  RESILIENCE_CONFIG_FIELDS(X)
#undef X
}

void from_json(const nlohmann::json& j, AnalysisConfig& c) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
#define X(name) known = known || key == #name;
    RESILIENCE_CONFIG_FIELDS(X)
#undef X
    if (!known) throw InputError("unknown config key '" + key + "'");
  }
  try {
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(c.name);
    RESILIENCE_CONFIG_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

#undef RESILIENCE_CONFIG_FIELDS

void to_json(nlohmann::json& j, const DailySeries& s) {
  nlohmann::json values = nlohmann::json::object();
  for (const auto& [d, v] : s.values) values[d.iso()] = v;
  j = {{"cbg", s.cbg}, {"metric", to_string(s.metric)}, {"values", values}};
}

void from_json(const nlohmann::json& j, DailySeries& s) {
  s.cbg = j.at("cbg").get<CbgId>();
  auto m = metric_from_string(j.at("metric").get<std::string>());
  if (!m) throw InputError("unknown metric");
  s.metric = *m;
  s.values.clear();
  for (const auto& [k, v] : j.at("values").items()) s.values.emplace(Date::parse(k), v.get<double>());
}

void to_json(nlohmann::json& j, const FeatureVector& f) {
  j = nlohmann::json::object();
  j["cbg"] = f.cbg;
  nlohmann::json values = nlohmann::json::object();
  nlohmann::json missing = nlohmann::json::object();
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    values[std::string(feature_name(i))] = f.values[i] ? nlohmann::json(*f.values[i]) : nlohmann::json();
    if (!f.missing_reason[i].empty()) missing[std::string(feature_name(i))] = f.missing_reason[i];
  }
  j["values"] = values;
  j["missing_reason"] = missing;
  nlohmann::json censored = nlohmann::json::object();
  for (std::size_t i = 0; i < kRecoveryCount; ++i) censored[std::string(censor_column_name(i))] = f.censored[i];
  j["censored"] = censored;
}

void from_json(const nlohmann::json& j, FeatureVector& f) {
  f = FeatureVector{};
  f.cbg = j.at("cbg").get<CbgId>();
  const auto& values = j.at("values");
  const auto& missing = j.at("missing_reason");
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    std::string name(feature_name(i));
    if (values.contains(name) && !values[name].is_null()) f.values[i] = values[name].get<double>();
    if (missing.contains(name)) f.missing_reason[i] = missing[name].get<std::string>();
  }
  const auto& censored = j.at("censored");
  for (std::size_t i = 0; i < kRecoveryCount; ++i)
    f.censored[i] = censored.at(std::string(censor_column_name(i))).get<bool>();
}

void to_json(nlohmann::json& j, const RiskResiliencePoint& p) {
  j = {{"cbg", p.cbg}, {"risk_index", p.risk_index}, {"resilience_index", p.resilience_index}};
}

void from_json(const nlohmann::json& j, RiskResiliencePoint& p) {
  p.cbg = j.at("cbg").get<CbgId>();
  p.risk_index = j.at("risk_index").get<double>();
  p.resilience_index = j.at("resilience_index").get<double>();
}

void to_json(nlohmann::json& j, const ArchetypeLabel& a) { j = to_string(a); }
void from_json(const nlohmann::json& j, ArchetypeLabel& a) {
  auto l = label_from_string(j.get<std::string>());
  if (!l) throw InputError("unknown archetype label");
  a = *l;
}

AnalysisConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  AnalysisConfig cfg = j.get<AnalysisConfig>();
  auto problems = validate_config(cfg);
  if (!problems.empty()) throw InputError("config " + path + ": " + problems.front());
  return cfg;
}

}  // namespace resilience
