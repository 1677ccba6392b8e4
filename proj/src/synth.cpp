#include "resilience/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "resilience/clustering.hpp"
#include "resilience/geometry.hpp"
#include "resilience/ingest.hpp"
#include "resilience/io.hpp"
#include "resilience/pipeline.hpp"

namespace resilience::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPoiBase = 100.0;
constexpr double kRecoveryBase = 200.0;
constexpr double kSpeedBase = 20000.0;
constexpr int kMaxRecoveryDays = 40;
constexpr int kMaxFloodLines = 8;
constexpr double kDrySpeedMph = 30.0;
// stay_cbg used for every away stay; it does not need to be part of the study area.
const char* const kAwayCbg = "480000000000";

class Rng {
 public:
  explicit Rng(uint64_t seed) : g_(seed) {}
  double uniform() { return g_.uniform(); }
  double normal() {
    double u1 = 1.0 - g_.uniform();
    double u2 = g_.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double sample(const Dist& d) { return d.mean + d.spread * normal(); }
  uint64_t below(uint64_t n) { return g_.next() % n; }

 private:
  cluster::SplitMix64 g_;
};

long clamp_round(double v, long lo, long hi) { return std::clamp(std::lround(v), lo, hi); }

CbgId planted_id(std::size_t i) {
  return CbgId::parse("48201" + std::to_string(200000 + i / 3) + std::to_string(1 + i % 3));
}

bool injectable(Feature f) {
  switch (f) {
    case Feature::flooded_road_length:
    case Feature::claim_count:
    case Feature::total_damage_usd:
      return false;
    default:
      return true;
  }
}

std::array<double, kFeatureCount> center_of(const ArchetypeParams& a) {
  std::array<double, kFeatureCount> c{};
  c[index_of(Feature::preparedness_proactivity)] = a.proactivity_days.mean;
  c[index_of(Feature::evacuation_rate_change)] = a.evacuation_change.mean;
  c[index_of(Feature::flooded_road_length)] = a.flooded_km.mean;
  c[index_of(Feature::claim_count)] = a.claim_count.mean;
  c[index_of(Feature::total_damage_usd)] = a.claim_count.mean * a.claim_amount_usd.mean;
  c[index_of(Feature::damage_ratio)] = a.building_count.mean > 0 ? a.claim_count.mean / a.building_count.mean : 0.0;
  c[index_of(Feature::telecom_disruption)] = a.telecom_drop.mean;
  for (auto f : kRecoveryFeatures) c[index_of(f)] = a.recovery_days.mean;
  return c;
}

std::vector<std::pair<const char*, Dist ArchetypeParams::*>> dist_fields() {
  return {{"proactivity_days", &ArchetypeParams::proactivity_days},
          {"evacuation_change", &ArchetypeParams::evacuation_change},
          {"flooded_km", &ArchetypeParams::flooded_km},
          {"claim_count", &ArchetypeParams::claim_count},
          {"claim_amount_usd", &ArchetypeParams::claim_amount_usd},
          {"building_count", &ArchetypeParams::building_count},
          {"telecom_drop", &ArchetypeParams::telecom_drop},
          {"recovery_days", &ArchetypeParams::recovery_days},
          {"income_usd", &ArchetypeParams::income_usd}};
}

}  // namespace

std::size_t ScenarioSpec::total_cbgs() const {
  std::size_t n = 0;
  for (const auto& a : archetypes) n += static_cast<std::size_t>(std::max(a.n_cbgs, 0));
  return n;
}

ScenarioSpec default_spec() {
  auto make = [](ArchetypeLabel label, int n, double proactivity, double evac, double flood, double claims,
                 Dist amount, double telecom, double recovery, double income) {
    ArchetypeParams a;
    a.label = label;
    a.n_cbgs = n;
    a.proactivity_days = {proactivity, 0.5};
    a.evacuation_change = {evac, 0.75};
    a.flooded_km = {flood, 0.5};
    a.claim_count = {claims, 5.0};
    a.claim_amount_usd = amount;
    a.building_count = {300.0, 30.0};
    a.telecom_drop = {telecom, 0.075};
    a.recovery_days = {recovery, 2.0};
    a.income_usd = {income, 3000.0};
    return a;
  };
  ScenarioSpec s;
  const Dist low_amount{12000.0, 3000.0}, high_amount{30000.0, 6000.0};
  s.archetypes = {
      make(ArchetypeLabel::LL, 299, 1.0, 1.0, 0.4, 4.0, low_amount, 0.15, 29.0, 53657.0),
      make(ArchetypeLabel::LH, 662, 1.5, 1.0, 0.4, 4.0, low_amount, 0.15, 11.0, 62053.5),
      make(ArchetypeLabel::HL, 210, 4.0, 5.0, 3.4, 34.0, high_amount, 0.60, 27.0, 52045.5),
      make(ArchetypeLabel::HH, 290, 4.0, 6.0, 3.4, 34.0, high_amount, 0.60, 9.0, 68026.0),
  };
  return s;
}

ScenarioSpec noiseless(ScenarioSpec spec) {
  for (auto& a : spec.archetypes)
    for (const auto& [_, field] : dist_fields()) (a.*field).spread = 0.0;
  return spec;
}

std::vector<std::string> validate_spec(const ScenarioSpec& spec) {
  std::vector<std::string> out;
  if (spec.archetypes.empty()) out.push_back("archetypes: at least one archetype required");
  if (!(spec.cell_size_deg > 0.0) || spec.cell_size_deg > 1.0) out.push_back("cell_size_deg: must be in (0, 1]");
  if (spec.baseline_travellers < 1) out.push_back("baseline_travellers: must be at least 1");
  if (spec.devices_per_cbg <= spec.baseline_travellers)
    out.push_back("devices_per_cbg: must exceed baseline_travellers");
  if (!(spec.point_claim_fraction >= 0.0 && spec.point_claim_fraction <= 1.0))
    out.push_back("point_claim_fraction: must be in [0, 1]");
  std::size_t total = spec.total_cbgs();
  for (std::size_t i = 0; i < spec.archetypes.size(); ++i) {
    const auto& a = spec.archetypes[i];
    std::string where = "archetypes[" + std::to_string(i) + "]";
    if (a.n_cbgs < 1) out.push_back(where + ".n_cbgs: must be at least 1");
    for (const auto& [name, field] : dist_fields()) {
      const Dist& d = a.*field;
      if (!std::isfinite(d.mean) || !(d.spread >= 0.0) || !std::isfinite(d.spread))
        out.push_back(where + "." + name + ": mean must be finite and spread non-negative");
    }
    if (a.evacuation_change.mean * spec.baseline_travellers > spec.devices_per_cbg - spec.baseline_travellers)
      out.push_back(where + ".evacuation_change: more evacuees than devices");
    if (a.building_count.mean < 1.0) out.push_back(where + ".building_count: mean must be at least 1");
  }
  for (const auto& m : spec.missing) {
    if (m.cbg_index >= total) out.push_back("missing: cbg_index " + std::to_string(m.cbg_index) + " out of range");
    if (!injectable(m.feature))
      out.push_back("missing: " + std::string(feature_name(m.feature)) + " cannot be left missing");
  }
  // With four archetypes the centers must land in their declared quadrants.
  if (spec.archetypes.size() == 4 && out.empty()) {
    std::vector<std::array<double, kFeatureCount>> centers;
    for (const auto& a : spec.archetypes) centers.push_back(center_of(a));
    std::vector<ArchetypeLabel> seen;
    for (std::size_t i = 0; i < 4; ++i) {
      auto norm = [&](std::size_t j) {
        double lo = centers[0][j], hi = centers[0][j];
        for (const auto& c : centers) {
          lo = std::min(lo, c[j]);
          hi = std::max(hi, c[j]);
        }
        return hi > lo ? (centers[i][j] - lo) / (hi - lo) : 0.5;
      };
      std::vector<double> risk, rec;
      for (auto f : kRiskFeatures) risk.push_back(norm(index_of(f)));
      for (auto f : kRecoveryFeatures) rec.push_back(norm(index_of(f)));
      ArchetypeLabel l = make_label(indices::median(risk) > 0.5, 1.0 - indices::median(rec) > 0.5);
      if (l != spec.archetypes[i].label)
        out.push_back("archetypes[" + std::to_string(i) + "]: centers fall in quadrant " +
                      std::string(to_string(l)) + ", not " + std::string(to_string(spec.archetypes[i].label)));
      seen.push_back(l);
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      out.push_back("archetypes: the four archetypes must occupy distinct quadrants");
  }
  return out;
}

json spec_json(const ScenarioSpec& spec) {
  json archetypes = json::array();
  for (const auto& a : spec.archetypes) {
    json j = {{"label", a.label}, {"n_cbgs", a.n_cbgs}};
    for (const auto& [name, field] : dist_fields()) j[name] = {{"mean", (a.*field).mean}, {"spread", (a.*field).spread}};
    archetypes.push_back(std::move(j));
  }
  json missing = json::array();
  for (const auto& m : spec.missing) missing.push_back({{"cbg_index", m.cbg_index}, {"feature", feature_name(m.feature)}});
  return {{"archetypes", archetypes},
          {"cell_size_deg", spec.cell_size_deg},
          {"origin_lon", spec.origin_lon},
          {"origin_lat", spec.origin_lat},
          {"devices_per_cbg", spec.devices_per_cbg},
          {"baseline_travellers", spec.baseline_travellers},
          {"point_claim_fraction", spec.point_claim_fraction},
          {"missing", missing},
          {"rng_seed", spec.rng_seed}};
}

ScenarioSpec spec_from_json(const json& j) {
  static const std::vector<std::string> known = {"archetypes",          "cell_size_deg",      "origin_lon",
                                                 "origin_lat",          "devices_per_cbg",    "baseline_travellers",
                                                 "point_claim_fraction", "missing",           "rng_seed"};
  if (!j.is_object()) throw InputError("scenario spec must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw InputError("unknown spec key '" + key + "'");
  ScenarioSpec s = default_spec();
  try {
    if (j.contains("archetypes")) {
      const ScenarioSpec defaults = default_spec();
      s.archetypes.clear();
      for (const auto& ja : j.at("archetypes")) {
        auto label = ja.at("label").get<ArchetypeLabel>();
        ArchetypeParams a;
        for (const auto& d : defaults.archetypes)
          if (d.label == label) a = d;
        a.label = label;
        if (ja.contains("n_cbgs")) a.n_cbgs = ja.at("n_cbgs").get<int>();
        for (const auto& [name, field] : dist_fields()) {
          if (!ja.contains(name)) continue;
          const auto& jd = ja.at(name);
          if (jd.contains("mean")) (a.*field).mean = jd.at("mean").get<double>();
          if (jd.contains("spread")) (a.*field).spread = jd.at("spread").get<double>();
        }
        s.archetypes.push_back(a);
      }
    }
    if (j.contains("cell_size_deg")) s.cell_size_deg = j.at("cell_size_deg").get<double>();
    if (j.contains("origin_lon")) s.origin_lon = j.at("origin_lon").get<double>();
    if (j.contains("origin_lat")) s.origin_lat = j.at("origin_lat").get<double>();
    if (j.contains("devices_per_cbg")) s.devices_per_cbg = j.at("devices_per_cbg").get<int>();
    if (j.contains("baseline_travellers")) s.baseline_travellers = j.at("baseline_travellers").get<int>();
    if (j.contains("point_claim_fraction")) s.point_claim_fraction = j.at("point_claim_fraction").get<double>();
    if (j.contains("rng_seed")) s.rng_seed = j.at("rng_seed").get<uint64_t>();
    if (j.contains("missing")) {
      s.missing.clear();
      for (const auto& jm : j.at("missing")) {
        auto f = feature_from_string(jm.at("feature").get<std::string>());
        if (!f) throw InputError("missing: unknown feature " + jm.at("feature").dump());
        s.missing.push_back({jm.at("cbg_index").get<std::size_t>(), *f});
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("scenario spec: ") + e.what());
  }
  return s;
}

ScenarioSpec load_spec(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return spec_from_json(j);
}

json ground_truth_json(const GroundTruth& gt) {
  json cbgs = json::array();
  for (const auto& c : gt.cbgs) {
    json features = json::object();
    for (std::size_t j = 0; j < kFeatureCount; ++j)
      features[std::string(feature_name(j))] = c.features[j] ? json(*c.features[j]) : json();
    json censored = json::object();
    for (std::size_t r = 0; r < kRecoveryCount; ++r) censored[std::string(censor_column_name(r))] = c.censored[r];
    cbgs.push_back({{"cbg_id", c.id},
                    {"archetype", c.archetype},
                    {"label", c.label},
                    {"features", features},
                    {"censored", censored},
                    {"income", c.income}});
  }
  return {{"seed", gt.seed}, {"cbgs", cbgs}};
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth gt;
  try {
    gt.seed = j.at("seed").get<uint64_t>();
    for (const auto& jc : j.at("cbgs")) {
      PlantedCbg c;
      c.id = jc.at("cbg_id").get<CbgId>();
      c.archetype = jc.at("archetype").get<std::size_t>();
      c.label = jc.at("label").get<ArchetypeLabel>();
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const auto& v = jc.at("features").at(std::string(feature_name(f)));
        if (!v.is_null()) c.features[f] = v.get<double>();
      }
      for (std::size_t r = 0; r < kRecoveryCount; ++r)
        c.censored[r] = jc.at("censored").at(std::string(censor_column_name(r))).get<bool>();
      c.income = jc.at("income").get<double>();
      gt.cbgs.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("ground truth: ") + e.what());
  }
  return gt;
}

std::vector<double> recovery_profile(int days, int length) {
  std::vector<double> p(static_cast<std::size_t>(std::max(length, 0)), 0.0);
  auto set = [&](int t, double v) {
    if (t >= 0 && t < length) p[static_cast<std::size_t>(t)] = v;
  };
  if (days <= 0) return p;
  if (days < 7) {
    // One deep week-start dip, then a single rebound day that lifts the 7-day mean to just above -10%.
    for (int t = 0; t < days; ++t) set(t, -71.0);
    set(days, 71.0 * days - 69.0);
    return p;
  }
  for (int t = 0; t <= days - 7; ++t) set(t, -100.0);
  for (int t = days - 6; t < days; ++t) set(t, -11.0);
  return p;
}

namespace {

struct Cell {
  double lon0, lat0, size;
  geo::LonLat at(double fx, double fy) const { return {lon0 + size * fx, lat0 + size * fy}; }
};

std::string ts(Date d, int hour, int minute) {
  return format_timestamp(start_of(d) + hour * 3600 + minute * 60);
}

std::string row(std::initializer_list<std::string_view> fields) {
  std::string out;
  bool first = true;
  for (auto f : fields) {
    if (!first) out.push_back(',');
    out.append(f);
    first = false;
  }
  out.push_back('\n');
  return out;
}

}  // namespace

Bundle generate_scenario(const ScenarioSpec& spec) {
  auto problems = validate_spec(spec);
  if (!problems.empty()) throw InputError("scenario spec: " + problems.front());
  const AnalysisConfig cfg;
  const Date landfall = cfg.landfall_date;
  const std::size_t n = spec.total_cbgs();
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));

  // Archetype of every cell, shuffled.
  std::vector<std::size_t> archetype_of;
  for (std::size_t a = 0; a < spec.archetypes.size(); ++a)
    archetype_of.insert(archetype_of.end(), static_cast<std::size_t>(spec.archetypes[a].n_cbgs), a);
  {
    Rng shuffle(cluster::derive_seed(spec.rng_seed, 0));
    for (std::size_t i = n; i > 1; --i) std::swap(archetype_of[i - 1], archetype_of[shuffle.below(i)]);
  }

  std::set<std::pair<std::size_t, Feature>> omitted;
  for (const auto& m : spec.missing) omitted.insert({m.cbg_index, m.feature});

  json cbgs_doc = {{"type", "FeatureCollection"}, {"features", json::array()}};
  json roads_doc = {{"type", "FeatureCollection"}, {"features", json::array()}};
  std::string income = "cbg_id,median_income\n";
  std::string poi = "date,cbg_id,category,value\n";
  std::string card = poi;
  std::string speed = poi;
  std::string stays = "device_id,home_cbg,stay_cbg,start_ts,end_ts\n";
  std::string traffic = "segment_id,timestamp,speed_mph\n";
  std::string claims = "claim_id,lat,lon,cbg_id,damage_amount_usd\n";
  std::string buildings = "cbg_id,building_count\n";
  using io::format_double;

  Bundle bundle;
  bundle.truth.seed = spec.rng_seed;
  std::size_t claim_serial = 0;
  const Date aug1 = Date::from_ymd(2017, 8, 1);
  const Date period_start = cfg.evac_baseline_window.start;
  const Date period_end = cfg.recovery_observation_end + 1;
  const int observed_days = cfg.recovery_observation_end - landfall;

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t arch = archetype_of[i];
    const ArchetypeParams& a = spec.archetypes[arch];
    Rng rng(cluster::derive_seed(spec.rng_seed, i + 1));
    const CbgId id = planted_id(i);
    const std::string& sid = id.str();
    const Cell cell{spec.origin_lon + spec.cell_size_deg * static_cast<double>(i % cols),
                    spec.origin_lat + spec.cell_size_deg * static_cast<double>(i / cols), spec.cell_size_deg};
    auto missing = [&](Feature f) { return omitted.contains({i, f}); };

    PlantedCbg truth;
    truth.id = id;
    truth.archetype = arch;
    truth.label = a.label;

    geo::Ring ring = {cell.at(0, 0), cell.at(1, 0), cell.at(1, 1), cell.at(0, 1), cell.at(0, 0)};
    json coords = json::array();
    for (const auto& p : ring) coords.push_back({p.lon, p.lat});
    cbgs_doc["features"].push_back({{"type", "Feature"},
                                    {"properties", {{"cbg_id", sid}}},
                                    {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({coords})}}}});

    truth.income = static_cast<double>(std::max(1000L, std::lround(rng.sample(a.income_usd))));
    income += row({sid, format_double(truth.income)});

    // Preparedness: one peak day per category, other preparedness days mildly elevated.
    std::array<long, 2> proactivity{};
    for (auto& p : proactivity) p = clamp_round(rng.sample(a.proactivity_days), 0, 5);
    if (!missing(Feature::preparedness_proactivity)) {
      truth.features[index_of(Feature::preparedness_proactivity)] = (proactivity[0] + proactivity[1]) / 2.0;
      const char* names[2] = {"poi_pharmacy", "poi_gas"};
      for (int c = 0; c < 2; ++c) {
        Date peak = landfall - static_cast<int>(proactivity[c]);
        for (Date d = aug1; d <= Date::from_ymd(2017, 8, 31); ++d) {
          double v = kPoiBase;
          if (d == peak)
            v = 2.0 * kPoiBase;
          else if (cfg.preparedness_window.contains(d))
            v = 1.3 * kPoiBase;
          poi += row({d.iso(), sid, names[c], format_double(v)});
        }
      }
    }

    // Evacuation: b devices away all period, m more away for four days around landfall.
    const int b = spec.baseline_travellers;
    const long m = clamp_round(rng.sample(a.evacuation_change) * b, 0, spec.devices_per_cbg - b);
    if (!missing(Feature::evacuation_rate_change)) {
      truth.features[index_of(Feature::evacuation_rate_change)] = static_cast<double>(m) / b;
      const std::string from = ts(period_start, 0, 0), to = ts(period_end, 0, 0);
      const std::string leave = ts(landfall - 1, 12, 0), back = ts(landfall + 3, 12, 0);
      for (int dv = 0; dv < spec.devices_per_cbg; ++dv) {
        std::string device = sid + "-d" + std::to_string(dv);
        if (dv < b) {
          stays += row({device, sid, kAwayCbg, from, to});
        } else if (dv < b + m) {
          stays += row({device, sid, sid, from, leave});
          stays += row({device, sid, kAwayCbg, leave, back});
          stays += row({device, sid, sid, back, to});
        } else {
          stays += row({device, sid, sid, from, to});
        }
      }
    }

    // Flooded roads: horizontal lines inside the cell, the last one cut to the remaining length.
    double wanted = std::max(0.0, rng.sample(a.flooded_km));
    double planted_km = 0.0;
    auto add_road = [&](const std::string& seg, geo::LonLat p, geo::LonLat q, bool flooded) {
      roads_doc["features"].push_back(
          {{"type", "Feature"},
           {"properties", {{"segment_id", seg}}},
           {"geometry", {{"type", "LineString"}, {"coordinates", json::array({{p.lon, p.lat}, {q.lon, q.lat}})}}}});
      for (int k = 0; k < 6; ++k)
        traffic += row({seg, ts(landfall + 2, 10, 5 * k), flooded ? "" : format_double(kDrySpeedMph)});
    };
    for (int line = 0; line < kMaxFloodLines && wanted > 1e-9; ++line) {
      double fy = 0.1 + 0.1 * line;
      geo::LonLat p = cell.at(0.05, fy), q = cell.at(0.95, fy);
      double full = geo::haversine_km(p, q);
      if (wanted < full || line == kMaxFloodLines - 1) {
        if (wanted < full) {
          double phi = p.lat * std::numbers::pi / 180.0;
          double dlon = 2.0 * std::asin(std::sin(wanted / (2.0 * geo::kEarthRadiusKm)) / std::cos(phi));
          q = {p.lon + dlon * 180.0 / std::numbers::pi, p.lat};
        }
        wanted = 0.0;
      } else {
        wanted -= full;
      }
      planted_km += geo::haversine_km(p, q);
      add_road(sid + "-f" + std::to_string(line), p, q, true);
    }
    {
      std::string dry = sid + "-dry";
      add_road(dry, cell.at(0.05, 0.9), cell.at(0.95, 0.9), false);
      // A null reading after the event window must not count as flooding.
      traffic += row({dry, ts(Date::from_ymd(2017, 9, 15), 8, 0), ""});
    }
    truth.features[index_of(Feature::flooded_road_length)] = planted_km;

    // Claims and buildings.
    const long count = std::max(0L, std::lround(rng.sample(a.claim_count)));
    double total = 0.0;
    for (long c = 0; c < count; ++c) {
      double amount = static_cast<double>(std::max(0L, std::lround(rng.sample(a.claim_amount_usd))));
      total += amount;
      std::string cid = "c" + std::to_string(++claim_serial);
      if (rng.uniform() < spec.point_claim_fraction) {
        geo::LonLat p = cell.at(0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform());
        claims += row({cid, format_double(p.lat), format_double(p.lon), "", format_double(amount)});
      } else {
        claims += row({cid, "", "", sid, format_double(amount)});
      }
    }
    truth.features[index_of(Feature::claim_count)] = static_cast<double>(count);
    truth.features[index_of(Feature::total_damage_usd)] = total;
    const long building_count = std::max(1L, std::lround(rng.sample(a.building_count)));
    if (!missing(Feature::damage_ratio)) {
      buildings += row({sid, std::to_string(building_count)});
      truth.features[index_of(Feature::damage_ratio)] =
          static_cast<double>(count) / static_cast<double>(building_count);
    }

    // Download speed bottoms out four days after landfall.
    const long drop = std::lround(std::clamp(rng.sample(a.telecom_drop), 0.0, 1.0) * 10000.0);
    if (!missing(Feature::telecom_disruption)) {
      truth.features[index_of(Feature::telecom_disruption)] = static_cast<double>(drop) / 10000.0;
      for (Date d = aug1; d <= Date::from_ymd(2017, 9, 8); ++d) {
        if (cfg.telecom_baseline_window.contains(d)) {
          // Two tests whose mean is the baseline speed.
          speed += row({d.iso(), sid, "download_kbps", format_double(kSpeedBase - 1000.0)});
          speed += row({d.iso(), sid, "download_kbps", format_double(kSpeedBase + 1000.0)});
          continue;
        }
        double v = d == landfall + 4 ? kSpeedBase - 2.0 * static_cast<double>(drop) : kSpeedBase;
        speed += row({d.iso(), sid, "download_kbps", format_double(v)});
      }
    }

    // Recovery curves for the four activity series.
    static constexpr std::array<const char*, kRecoveryCount> kRecoveryCategories = {
        "poi_essential", "poi_nonessential", "cc_essential", "cc_nonessential"};
    for (std::size_t r = 0; r < kRecoveryCount; ++r) {
      const int days = static_cast<int>(clamp_round(rng.sample(a.recovery_days), 0, kMaxRecoveryDays));
      const Feature f = kRecoveryFeatures[r];
      if (missing(f)) continue;
      truth.features[index_of(f)] = static_cast<double>(std::min(days, observed_days));
      truth.censored[r] = days > observed_days;
      auto profile = recovery_profile(days, observed_days + 1);
      std::string& target = r < 2 ? poi : card;
      for (Date d = aug1; d <= cfg.recovery_observation_end; ++d) {
        int t = d - landfall;
        double pct = t >= 0 ? profile[static_cast<std::size_t>(t)] : 0.0;
        target += row({d.iso(), sid, kRecoveryCategories[r], format_double(kRecoveryBase * (1.0 + pct / 100.0))});
      }
    }

    bundle.truth.cbgs.push_back(std::move(truth));
  }

  bundle.files[ingest::files::kCbgs] = cbgs_doc.dump() + "\n";
  bundle.files[ingest::files::kRoads] = roads_doc.dump() + "\n";
  bundle.files[ingest::files::kIncome] = std::move(income);
  bundle.files[ingest::files::kPoiVisits] = std::move(poi);
  bundle.files[ingest::files::kCardTransactions] = std::move(card);
  bundle.files[ingest::files::kSpeedtests] = std::move(speed);
  bundle.files[ingest::files::kStays] = std::move(stays);
  bundle.files[ingest::files::kTraffic] = std::move(traffic);
  bundle.files[ingest::files::kClaims] = std::move(claims);
  bundle.files[ingest::files::kBuildings] = std::move(buildings);
  return bundle;
}

void write_bundle(const Bundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [name, text] : bundle.files) io::write_file(dir / name, text);
  io::write_file(dir / "ground_truth.json", ground_truth_json(bundle.truth).dump(2) + "\n");
}

json DiscrepancyReport::to_json() const {
  json dev = json::object();
  for (std::size_t j = 0; j < kFeatureCount; ++j)
    dev[std::string(feature_name(j))] = {{"max_abs_deviation", max_abs_deviation[j]}, {"compared", compared[j]}};
  json labels = json::array();
  for (auto l : cluster_labels) labels.push_back(to_string(l));
  return {{"features", dev},
          {"censor_mismatches", censor_mismatches},
          {"missing_mismatches", missing_mismatches},
          {"included", included},
          {"ari", ari},
          {"label_agreement", label_agreement},
          {"cluster_labels", labels}};
}

DiscrepancyReport verify_roundtrip(const fs::path& bundle_dir, const GroundTruth& truth, const AnalysisConfig& cfg) {
  auto data = ingest::ingest_directory(bundle_dir, cfg.utc_offset_minutes);
  auto result = pipeline::analyze(data, cfg);
  std::map<CbgId, const PlantedCbg*> planted;
  for (const auto& c : truth.cbgs) planted.emplace(c.id, &c);

  DiscrepancyReport rep;
  const auto& m = result.assembled.matrix;
  rep.included = m.size();
  std::set<CbgId> included(m.rows.begin(), m.rows.end());
  for (const auto& c : truth.cbgs) {
    bool complete = std::all_of(c.features.begin(), c.features.end(), [](const auto& v) { return v.has_value(); });
    if (complete != included.contains(c.id)) ++rep.missing_mismatches;
  }
  std::vector<int> planted_labels, found_labels;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto it = planted.find(m.rows[i]);
    if (it == planted.end()) {
      ++rep.missing_mismatches;
      continue;
    }
    const PlantedCbg& p = *it->second;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      if (!p.features[j]) continue;
      rep.max_abs_deviation[j] = std::max(rep.max_abs_deviation[j], std::abs(m.values[i][j] - *p.features[j]));
      ++rep.compared[j];
    }
    for (std::size_t r = 0; r < kRecoveryCount; ++r)
      if (m.censored[i][r] != p.censored[r]) ++rep.censor_mismatches;
    planted_labels.push_back(static_cast<int>(p.archetype));
    found_labels.push_back(result.model.labels[i]);
    if (result.row_labels[i] == p.label) ++agree;
  }
  if (!planted_labels.empty()) {
    rep.ari = cluster::adjusted_rand_index(planted_labels, found_labels);
    rep.label_agreement = static_cast<double>(agree) / static_cast<double>(planted_labels.size());
  }
  rep.cluster_labels = result.assignment.cluster_labels;
  return rep;
}

}  // namespace resilience::synth
