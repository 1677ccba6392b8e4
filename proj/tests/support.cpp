#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <tuple>

#include <unistd.h>

#include <omp.h>

#include "oracles.hpp"
#include "resilience/archetypes.hpp"
#include "resilience/clustering.hpp"
#include "resilience/indices.hpp"
#include "resilience/ingest.hpp"
#include "resilience/io.hpp"
#include "resilience/synth.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using namespace resilience;
using nlohmann::json;

fs::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  fs::path dir = fs::temp_directory_path() /
                 ("resilience-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CbgId cbg(int n) {
  std::string digits = std::to_string(n);
  return CbgId::parse("48201" + std::string(7 - digits.size(), '0') + digits);
}

DailySeries series(const CbgId& id, MetricKind m, Date first, const std::vector<double>& values) {
  DailySeries s{.cbg = id, .metric = m, .values = {}};
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isnan(values[i])) s.values[first + static_cast<int>(i)] = values[i];
  return s;
}

geo::Polygon square(double lon0, double lat0, double size) {
  return {{{lon0, lat0}, {lon0 + size, lat0}, {lon0 + size, lat0 + size}, {lon0, lat0 + size}, {lon0, lat0}}, {}};
}

geo::Polygon random_convex(Gen& g, double cx, double cy, double radius, int vertices) {
  std::vector<double> angles;
  for (int i = 0; i < vertices; ++i) angles.push_back(g.real(0, 2 * std::numbers::pi));
  std::sort(angles.begin(), angles.end());
  geo::Polygon p;
  for (double a : angles) p.exterior.push_back({cx + radius * std::cos(a), cy + radius * std::sin(a)});
  p.exterior.push_back(p.exterior.front());
  return p;
}

geo::CbgShape shape_of(const CbgId& id, geo::Polygon poly) {
  geo::CbgShape s{.id = id, .parts = {std::move(poly)}, .bbox = {}};
  s.bbox = geo::BBox::of(s.parts[0].exterior);
  return s;
}

features::FeatureMatrix random_matrix(Gen& g, std::size_t rows) {
  features::FeatureMatrix m;
  for (std::size_t i = 0; i < rows; ++i) {
    m.rows.push_back(cbg(static_cast<int>(i + 1)));
    std::array<double, kFeatureCount> v{};
    for (auto& x : v) x = g.real(-50, 50);
    m.values.push_back(v);
    m.censored.push_back({});
  }
  return m;
}

PropertyResult run_property(const NamedProperty& p, int cases, uint64_t seed) {
  PropertyResult r{.name = p.name, .cases = cases, .failures = 0, .first_failure = {}, .seconds = 0.0};
  auto t0 = std::chrono::steady_clock::now();
  for (int c = 0; c < cases; ++c) {
    Gen g(cluster::derive_seed(seed, static_cast<uint64_t>(c)));
    std::optional<std::string> failure;
    try {
      failure = p.check(g);
    } catch (const std::exception& e) {
      failure = std::string("threw: ") + e.what();
    }
    if (failure) {
      if (r.failures == 0) r.first_failure = "case " + std::to_string(c) + ": " + *failure;
      ++r.failures;
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace {

using Outcome = std::optional<std::string>;

template <class... Args>
std::string msg(Args&&... args) {
  std::ostringstream os;
  os.precision(17);
  (os << ... << args);
  return os.str();
}

Date random_date(Gen& g) { return Date::from_ymd(2017, 7, 1) + static_cast<int>(g.integer(0, 120)); }

DateWindow random_window(Gen& g) {
  Date a = random_date(g);
  return {a, a + static_cast<int>(g.integer(0, 30))};
}

// ---- core ----

Outcome config_roundtrip(Gen& g) {
  AnalysisConfig c;
  c.landfall_date = random_date(g);
  c.preparedness_window = random_window(g);
  c.poi_baseline_window = random_window(g);
  c.evac_baseline_window = random_window(g);
  c.evac_event_window = random_window(g);
  c.traffic_event_window = random_window(g);
  c.telecom_baseline_window = random_window(g);
  c.telecom_min_window = random_window(g);
  c.recovery_baseline_window = random_window(g);
  c.recovery_observation_end = random_date(g);
  c.recovery_threshold_pct = g.real(0.01, 0.99);
  c.rolling_window_days = static_cast<int>(g.integer(1, 14));
  c.k_clusters = static_cast<int>(g.integer(2, 9));
  c.rng_seed = g.bits();
  c.rolling_sum = g.coin();
  c.min_null_duration_minutes = static_cast<int>(g.integer(0, 600));
  c.restarts = static_cast<int>(g.integer(1, 20));
  c.utc_offset_minutes = static_cast<int>(g.integer(-720, 720));
  json j = c;
  AnalysisConfig back = json::parse(j.dump()).get<AnalysisConfig>();
  if (!(back == c)) return msg("config changed after round trip: ", j.dump());
  return {};
}

Outcome core_types_roundtrip(Gen& g) {
  FeatureVector fv;
  fv.cbg = cbg(static_cast<int>(g.integer(0, 9999999)));
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (g.coin(0.8))
      fv.values[j] = g.real(-1e6, 1e6);
    else
      fv.missing_reason[j] = g.coin() ? "no_series" : "baseline_unusable";
  }
  for (auto& c : fv.censored) c = g.coin();
  if (!(json::parse(json(fv).dump()).get<FeatureVector>() == fv)) return "FeatureVector round trip";
  DailySeries s{.cbg = fv.cbg, .metric = kAllMetrics[g.integer(0, 7)], .values = {}};
  for (int i = 0; i < 20; ++i)
    if (g.coin()) s.values[random_date(g)] = g.real(0, 1e5);
  if (!(json::parse(json(s).dump()).get<DailySeries>() == s)) return "DailySeries round trip";
  RiskResiliencePoint p{.cbg = fv.cbg, .risk_index = g.real(0, 1), .resilience_index = g.real(0, 1)};
  if (!(json::parse(json(p).dump()).get<RiskResiliencePoint>() == p)) return "RiskResiliencePoint round trip";
  Date d = random_date(g);
  if (Date::parse(d.iso()) != d) return msg("date round trip ", d.iso());
  Timestamp t = start_of(d) + g.integer(0, 86399);
  if (try_parse_timestamp(format_timestamp(t), 0) != t) return msg("timestamp round trip ", format_timestamp(t));
  return {};
}

Outcome cbg_id_rule(Gen& g) {
  static const std::string alphabet = "0123456789a -X";
  std::string s;
  long len = g.coin(0.5) ? 12 : g.integer(0, 15);
  for (long i = 0; i < len; ++i)
    s.push_back(g.coin(0.9) ? static_cast<char>('0' + g.integer(0, 9)) : alphabet[g.integer(0, alphabet.size() - 1)]);
  bool expected = s.size() == 12 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  if (CbgId::try_parse(s).has_value() != expected) return msg("CbgId rule broken for '", s, "'");
  return {};
}

// ---- ingest ----

Outcome ingest_row_accounting(Gen& g) {
  fs::path dir = scratch_dir("acct");
  std::string text = "date,cbg_id,category,value\n";
  long rows = g.integer(0, 40), valid = 0;
  for (long i = 0; i < rows; ++i) {
    std::string date = (Date::from_ymd(2017, 8, 1) + static_cast<int>(g.integer(0, 30))).iso();
    std::string id = cbg(static_cast<int>(g.integer(1, 5))).str();
    std::string cat = g.coin() ? "poi_pharmacy" : "poi_gas";
    std::string value = io::format_double(static_cast<double>(g.integer(0, 100)));
    switch (g.integer(0, 6)) {
      case 0: date = "2017-13-01"; break;
      case 1: id = "48201"; break;
      case 2: cat = "cc_essential"; break;
      case 3: value = "-3"; break;
      case 4: value = "abc"; break;
      case 5: value += ",extra"; break;
      default: ++valid;
    }
    text += date + "," + id + "," + cat + "," + value + "\n";
  }
  io::write_file(dir / "poi.csv", text);
  auto loaded = ingest::load_daily_series(dir / "poi.csv", ingest::kPoiMetrics);
  fs::remove_all(dir);
  const auto& r = loaded.report;
  if (r.accepted + r.rejected != static_cast<std::size_t>(rows) || r.total_rows != static_cast<std::size_t>(rows))
    return msg("accepted ", r.accepted, " + rejected ", r.rejected, " != rows ", rows);
  if (r.accepted != static_cast<std::size_t>(valid)) return msg("accepted ", r.accepted, " expected ", valid);
  return {};
}

synth::ScenarioSpec tiny_spec(Gen& g) {
  synth::ScenarioSpec spec = synth::default_spec();
  for (auto& a : spec.archetypes) a.n_cbgs = static_cast<int>(g.integer(1, 2));
  spec.rng_seed = g.bits();
  spec.devices_per_cbg = 14;
  spec.point_claim_fraction = g.real(0, 1);
  for (auto& a : spec.archetypes) a.claim_count.mean = std::min(a.claim_count.mean, 8.0);
  if (g.coin(0.3)) {
    const Feature options[] = {Feature::preparedness_proactivity, Feature::evacuation_rate_change,
                               Feature::damage_ratio, Feature::telecom_disruption,
                               Feature::recovery_cc_nonessential};
    spec.missing.push_back({static_cast<std::size_t>(g.integer(0, static_cast<long>(spec.total_cbgs()) - 1)),
                            options[g.integer(0, 4)]});
  }
  return spec;
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = io::read_file(e.path());
  return out;
}

Outcome ingest_idempotent(Gen& g) {
  auto bundle = synth::generate_scenario(tiny_spec(g));
  fs::path root = scratch_dir("idem");
  synth::write_bundle(bundle, root / "raw");
  ingest::write_workspace(ingest::ingest_directory(root / "raw"), root / "a");
  ingest::write_workspace(ingest::ingest_directory(root / "raw"), root / "b");
  ingest::write_workspace(ingest::load_workspace(root / "a"), root / "c");
  auto a = read_dir(root / "a"), b = read_dir(root / "b"), c = read_dir(root / "c");
  fs::remove_all(root);
  if (a != b) return "two ingests of the same files differ";
  a.erase(ingest::files::kReport);
  c.erase(ingest::files::kReport);
  if (a != c) return "re-ingesting a workspace changed it";
  return {};
}

// ---- geometry ----

geo::LineString random_line(Gen& g, double lo, double hi) {
  geo::LineString l;
  long n = g.integer(2, 6);
  for (long i = 0; i < n; ++i) l.vertices.push_back({g.real(lo, hi), g.real(lo, hi)});
  return l;
}

Outcome clip_bounds(Gen& g) {
  auto poly = random_convex(g, g.real(-0.5, 0.5), g.real(29, 30), g.real(0.05, 1.0), static_cast<int>(g.integer(3, 9)));
  auto line = random_line(g, -1.5, 1.5);
  for (auto& p : line.vertices) p.lat += 29.5;
  double c = geo::clip_line_length(line, poly), full = geo::haversine_length_km(line);
  if (c < 0 || c > full * (1 + 1e-12)) return msg("clip ", c, " outside [0, ", full, "]");
  return {};
}

Outcome clip_disjoint_sum(Gen& g) {
  double size = g.real(0.05, 0.3);
  long nx = g.integer(1, 4), ny = g.integer(1, 4);
  auto line = random_line(g, -0.2, size * 4 + 0.2);
  double sum = 0.0;
  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j)
      // Small gaps keep the cells strictly disjoint.
      sum += geo::clip_line_length(line, square(i * size + 0.001, j * size + 0.001, size - 0.002));
  double full = geo::haversine_length_km(line);
  if (sum > full * (1 + 1e-12)) return msg("sum over disjoint cells ", sum, " > ", full);
  return {};
}

Outcome clip_reversal(Gen& g) {
  geo::Polygon poly = g.coin() ? random_convex(g, 0, 0, g.real(0.1, 1), static_cast<int>(g.integer(3, 8)))
                               : square(-0.3, -0.3, 0.6);
  if (g.coin(0.3)) poly.holes.push_back(square(-0.05, -0.05, 0.1).exterior);
  auto line = random_line(g, -1, 1);
  auto rev = line;
  std::reverse(rev.vertices.begin(), rev.vertices.end());
  double a = geo::clip_line_length(line, poly), b = geo::clip_line_length(rev, poly);
  if (std::abs(a - b) > 1e-9) return msg("reversal changed clip: ", a, " vs ", b);
  return {};
}

Outcome pip_rotation(Gen& g) {
  auto poly = random_convex(g, 0, 0, 1, static_cast<int>(g.integer(3, 10)));
  geo::Polygon rotated;
  std::size_t n = poly.exterior.size() - 1;
  std::size_t shift = static_cast<std::size_t>(g.integer(0, static_cast<long>(n) - 1));
  for (std::size_t i = 0; i < n; ++i) rotated.exterior.push_back(poly.exterior[(i + shift) % n]);
  rotated.exterior.push_back(rotated.exterior.front());
  for (int i = 0; i < 50; ++i) {
    geo::LonLat p{g.real(-1.2, 1.2), g.real(-1.2, 1.2)};
    if (i % 10 == 0) p = poly.exterior[static_cast<std::size_t>(g.integer(0, static_cast<long>(n) - 1))];
    if (geo::point_in_polygon(p, poly) != geo::point_in_polygon(p, rotated))
      return msg("rotation changed answer at ", p.lon, ",", p.lat);
  }
  return {};
}

// ---- features ----

Outcome pc_identity(Gen& g) {
  double b = g.real(0.001, 1e6);
  std::vector<double> v(30, b);
  for (auto& x : v)
    if (g.coin(0.2)) x = NAN;
  v[0] = b;
  auto s = series(cbg(1), MetricKind::poi_pharmacy, Date::from_ymd(2017, 8, 1), v);
  auto base = features::baseline(s, {Date::from_ymd(2017, 8, 1), Date::from_ymd(2017, 8, 2)});
  auto pc = features::percent_change(s, base);
  if (pc.missing) return "baseline unusable";
  for (const auto& [d, x] : pc.values)
    if (x != 0.0) return msg("PC not zero at ", d.iso(), ": ", x);
  return {};
}

Outcome proactivity_range(Gen& g) {
  AnalysisConfig cfg;
  auto make = [&](MetricKind m) {
    std::vector<double> v(31);
    for (auto& x : v) x = g.coin(0.15) ? NAN : g.real(0, 100);
    auto s = series(cbg(1), m, Date::from_ymd(2017, 8, 1), v);
    return features::percent_change(s, features::baseline(s, cfg.poi_baseline_window));
  };
  auto p = features::preparedness_proactivity(make(MetricKind::poi_pharmacy), make(MetricKind::poi_gas), cfg);
  if (p && (*p < 0 || *p > cfg.preparedness_window.length_days() - 1)) return msg("proactivity out of range: ", *p);
  return {};
}

Outcome evacuation_oracle(Gen& g) {
  std::vector<ingest::StaySegment> segs;
  long devices = g.integer(1, 6);
  const Timestamp t0 = start_of(Date::from_ymd(2017, 8, 20));
  for (long d = 0; d < devices; ++d) {
    CbgId home = cbg(static_cast<int>(g.integer(1, 2)));
    Timestamp t = t0 + g.integer(0, 600) * 60;
    long n = g.integer(1, 6);
    for (long k = 0; k < n; ++k) {
      Timestamp len = g.integer(10, 60 * 60) * 60;
      CbgId stay = g.coin(0.6) ? home : cbg(static_cast<int>(g.integer(3, 5)));
      segs.push_back({"dev" + std::to_string(d), home, stay, t, t + len});
      t += len + g.integer(0, 600) * 60;
    }
  }
  std::sort(segs.begin(), segs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.device_id, a.start) < std::tie(b.device_id, b.start);
  });
  auto got = features::evacuation_series(segs, AnalysisConfig{});
  auto want = oracle::evacuation_brute_force(segs);
  // A CBG whose devices never qualify may appear with an empty series.
  std::erase_if(got, [](const auto& kv) { return kv.second.values.empty(); });
  if (got.size() != want.size()) return msg("CBG count ", got.size(), " vs ", want.size());
  for (const auto& [id, s] : got) {
    auto it = want.find(id);
    if (it == want.end() || it->second != s.values) return msg("series differ for ", id.str());
    for (const auto& [_, v] : s.values)
      if (v < 0 || v > 1) return msg("rate out of [0,1]: ", v);
  }
  return {};
}

Outcome flooded_bbox_bound(Gen& g) {
  std::vector<geo::CbgShape> shapes;
  for (int i = 0; i < 3; ++i)
    shapes.push_back(shape_of(cbg(i + 1), random_convex(g, g.real(0, 1), g.real(29, 30), g.real(0.05, 0.4), 6)));
  geo::CbgTable table(shapes);
  ingest::RoadMap roads;
  std::vector<ingest::TrafficReading> readings;
  AnalysisConfig cfg;
  for (int r = 0; r < 5; ++r) {
    auto line = random_line(g, 0, 1);
    for (auto& p : line.vertices) p.lat += 29;
    std::string id = "s" + std::to_string(r);
    roads[id] = line;
    Date day = cfg.traffic_event_window.start + static_cast<int>(g.integer(-3, 30));
    std::optional<double> speed;
    if (g.coin()) speed = 30.0;
    readings.push_back({id, start_of(day) + 36000, speed});
  }
  auto got = features::flooded_road_length(readings, roads, table, cfg);
  for (const auto& s : table) {
    double bound = 0.0;
    for (const auto& [_, line] : roads)
      if (geo::BBox::of(line.vertices).intersects(s.bbox)) bound += geo::haversine_length_km(line);
    if (got.at(s.id) > bound + 1e-9) return msg("flooded ", got.at(s.id), " exceeds bbox bound ", bound);
    if (got.at(s.id) < 0) return "negative flooded length";
  }
  return {};
}

Outcome damage_ratio_identity(Gen& g) {
  std::vector<geo::CbgShape> shapes = {shape_of(cbg(1), square(0, 0, 1)), shape_of(cbg(2), square(1, 0, 1))};
  geo::CbgTable table(shapes);
  std::vector<ingest::ClaimRecord> claims;
  long n = g.integer(0, 500);
  for (long i = 0; i < n; ++i) {
    ingest::ClaimRecord c{.claim_id = std::to_string(i), .location = {}, .cbg = {}, .damage_amount_usd = g.real(0, 1e5)};
    if (g.coin())
      c.location = geo::LonLat{g.real(0.01, 1.99), g.real(0.01, 0.99)};
    else
      c.cbg = cbg(static_cast<int>(g.integer(1, 2)));
    claims.push_back(c);
  }
  ingest::BuildingMap b = {{cbg(1), g.integer(1, 5000)}, {cbg(2), g.integer(1, 5000)}};
  for (const auto& [id, f] : features::claims_features(claims, b, table)) {
    if (!f.damage_ratio) return "ratio missing";
    if (std::llround(*f.damage_ratio * static_cast<double>(b.at(id))) != f.claim_count)
      return msg("ratio*buildings != count for ", id.str());
  }
  return {};
}

Outcome rolling_scaled_baseline(Gen& g) {
  AnalysisConfig cfg;
  cfg.rolling_window_days = static_cast<int>(g.integer(1, 10));
  double b = g.real(0.5, 5000), c = g.real(0.01, 3);
  std::vector<double> v(40, c * b);
  auto s = series(cbg(1), MetricKind::poi_essential, Date::from_ymd(2017, 8, 1), v);
  features::BaselineValue base{.cbg = s.cbg, .metric = s.metric, .value = b, .coverage = 1, .usable = true};
  for (const auto& [d, x] : features::rolling_pct_change(s, base, cfg))
    if (std::abs(x - 100.0 * (c - 1.0)) > 1e-9 * std::max(1.0, std::abs(x)))
      return msg("rolling ", x, " vs ", 100.0 * (c - 1.0));
  return {};
}

Outcome recovery_antitone(Gen& g) {
  AnalysisConfig lo, hi;
  lo.recovery_threshold_pct = g.real(0.01, 0.99);
  hi.recovery_threshold_pct = g.real(lo.recovery_threshold_pct, 0.999);
  std::map<Date, double> rolled;
  for (Date d = lo.landfall_date - 5; d <= lo.recovery_observation_end + 3; ++d)
    if (g.coin(0.9)) rolled[d] = g.real(-100, 10);
  auto a = features::recovery_duration(rolled, lo);
  auto b = features::recovery_duration(rolled, hi);
  if (a.has_value() != b.has_value()) return "observation differs";
  if (a && a->days > b->days) return msg("lower threshold gave longer duration: ", a->days, " > ", b->days);
  return {};
}

// ---- indices ----

Outcome normalize_idempotent(Gen& g) {
  auto m = random_matrix(g, static_cast<std::size_t>(g.integer(2, 40)));
  auto once = indices::normalize_minmax(m);
  features::FeatureMatrix again{once.rows, once.values, m.censored};
  auto twice = indices::normalize_minmax(again);
  for (std::size_t i = 0; i < once.size(); ++i)
    for (std::size_t j = 0; j < kFeatureCount; ++j)
      if (std::abs(once.values[i][j] - twice.values[i][j]) > 1e-12) return "normalize not idempotent";
  return {};
}

Outcome normalize_roundtrip(Gen& g) {
  auto m = random_matrix(g, static_cast<std::size_t>(g.integer(1, 50)));
  for (auto& row : m.values) row[4] *= 1e3;
  auto nm = indices::normalize_minmax(m);
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto back = indices::denormalize(nm, nm.values[i]);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      double tol = 1e-12 * std::max({1.0, std::abs(m.values[i][j]), nm.max[j] - nm.min[j]});
      bool constant = nm.min[j] == nm.max[j];
      if (!constant && std::abs(back[j] - m.values[i][j]) > tol) return msg("denormalize off by ", back[j] - m.values[i][j]);
    }
  }
  return {};
}

std::array<double, kFeatureCount> random_unit_row(Gen& g) {
  std::array<double, kFeatureCount> r{};
  for (auto& x : r) x = g.coin(0.1) ? std::round(g.real(0, 1)) : g.real(0, 1);
  return r;
}

Outcome index_permutation(Gen& g) {
  auto row = random_unit_row(g);
  auto perm = row;
  std::vector<double> risk, rec;
  for (auto f : kRiskFeatures) risk.push_back(row[index_of(f)]);
  for (auto f : kRecoveryFeatures) rec.push_back(row[index_of(f)]);
  std::shuffle(risk.begin(), risk.end(), g.engine());
  std::shuffle(rec.begin(), rec.end(), g.engine());
  for (std::size_t i = 0; i < kRiskFeatures.size(); ++i) perm[index_of(kRiskFeatures[i])] = risk[i];
  for (std::size_t i = 0; i < kRecoveryFeatures.size(); ++i) perm[index_of(kRecoveryFeatures[i])] = rec[i];
  if (indices::risk_index(row) != indices::risk_index(perm)) return "risk index depends on order";
  if (indices::resilience_index(row) != indices::resilience_index(perm)) return "resilience index depends on order";
  return {};
}

Outcome index_monotone(Gen& g) {
  auto row = random_unit_row(g);
  auto up = row;
  std::size_t j = static_cast<std::size_t>(g.integer(0, kFeatureCount - 1));
  up[j] = g.real(row[j], 1.0);
  bool is_risk = j < kFirstRecovery;
  if (is_risk && indices::risk_index(up) < indices::risk_index(row)) return "risk index decreased";
  if (!is_risk && indices::resilience_index(up) > indices::resilience_index(row)) return "resilience index increased";
  if (is_risk && indices::resilience_index(up) != indices::resilience_index(row)) return "risk feature moved resilience";
  if (!is_risk && indices::risk_index(up) != indices::risk_index(row)) return "recovery feature moved risk";
  return {};
}

Outcome index_range(Gen& g) {
  auto row = random_unit_row(g);
  double r = indices::risk_index(row), s = indices::resilience_index(row);
  if (r < 0 || r > 1 || s < 0 || s > 1) return msg("index outside [0,1]: ", r, ", ", s);
  return {};
}

Outcome translation_invariance(Gen& g) {
  auto m = random_matrix(g, static_cast<std::size_t>(g.integer(2, 30)));
  auto shifted = m;
  std::size_t j = static_cast<std::size_t>(g.integer(0, kFeatureCount - 1));
  double c = g.real(-1000, 1000);
  for (auto& row : shifted.values) row[j] += c;
  auto a = indices::normalize_minmax(m), b = indices::normalize_minmax(shifted);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (std::abs(a.values[i][j] - b.values[i][j]) > 1e-9) return msg("shift moved normalized value by ", a.values[i][j] - b.values[i][j]);
    if (std::abs(indices::risk_index(a.values[i]) - indices::risk_index(b.values[i])) > 1e-9 ||
        std::abs(indices::resilience_index(a.values[i]) - indices::resilience_index(b.values[i])) > 1e-9)
      return "shift moved an index";
  }
  return {};
}

// ---- clustering ----

cluster::Matrix random_points(Gen& g, std::size_t n, std::size_t dim) {
  cluster::Matrix m(n, dim);
  for (auto& x : m.data) x = g.real(0, 1);
  return m;
}

Outcome inertia_monotone(Gen& g) {
  auto pts = random_points(g, static_cast<std::size_t>(g.integer(5, 120)), static_cast<std::size_t>(g.integer(1, 6)));
  int k = static_cast<int>(g.integer(1, std::min<long>(8, static_cast<long>(pts.rows))));
  auto m = cluster::kmeans_fit(pts, k, g.bits());
  for (std::size_t i = 1; i < m.inertia_trace.size(); ++i)
    if (m.inertia_trace[i] > m.inertia_trace[i - 1] * (1 + 1e-12)) return msg("inertia rose at iteration ", i);
  return {};
}

Outcome kmeans_fixpoint(Gen& g) {
  auto pts = random_points(g, static_cast<std::size_t>(g.integer(5, 120)), static_cast<std::size_t>(g.integer(1, 6)));
  int k = static_cast<int>(g.integer(1, std::min<long>(8, static_cast<long>(pts.rows))));
  auto m = cluster::kmeans_fit(pts, k, g.bits());
  if (m.iterations >= cluster::kMaxIterations) return {};
  std::vector<int> labels;
  std::vector<double> dist;
  cluster::serial::assign_step(pts, m.centroids, labels, dist);
  if (labels != m.labels) return "re-assignment changed labels";
  return {};
}

Outcome kmeans_worker_independence(Gen& g) {
  auto pts = random_points(g, static_cast<std::size_t>(g.integer(10, 200)), 11);
  int k = static_cast<int>(g.integer(2, 6));
  uint64_t seed = g.bits();
  int before = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = cluster::kmeans_fit(pts, k, seed);
  double sa = cluster::silhouette_score(pts, a.labels, k);
  omp_set_num_threads(8);
  auto b = cluster::kmeans_fit(pts, k, seed);
  double sb = cluster::silhouette_score(pts, b.labels, k);
  omp_set_num_threads(before);
  if (a.labels != b.labels || a.centroids.data != b.centroids.data || a.inertia != b.inertia || sa != sb)
    return "model depends on worker count";
  return {};
}

Outcome canonical_relabel(Gen& g) {
  int k = static_cast<int>(g.integer(2, 5));
  std::size_t dim = static_cast<std::size_t>(g.integer(2, 6));
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < k; ++c) {
    std::vector<double> ctr(dim);
    for (auto& x : ctr) x = g.real(0, 1);
    ctr[static_cast<std::size_t>(c) % dim] += 2.0 * (c + 1);  // keep blobs far apart
    centers.push_back(ctr);
  }
  std::vector<std::vector<double>> rows;
  std::normal_distribution<double> noise(0.0, 0.01);
  for (int c = 0; c < k; ++c) {
    long n = g.integer(3, 30);
    for (long i = 0; i < n; ++i) {
      auto p = centers[static_cast<std::size_t>(c)];
      for (auto& x : p) x += noise(g.engine());
      rows.push_back(p);
    }
  }
  auto shuffled = rows;
  std::shuffle(shuffled.begin(), shuffled.end(), g.engine());
  uint64_t seed = g.bits();
  auto a = cluster::kmeans_fit(cluster::Matrix::from(rows), k, seed);
  auto b = cluster::kmeans_fit(cluster::Matrix::from(shuffled), k, seed);
  auto sa = a.cluster_sizes(), sb = b.cluster_sizes();
  if (sa != sb) return "cluster sizes differ after permutation";
  for (std::size_t i = 0; i < a.centroids.data.size(); ++i)
    if (std::abs(a.centroids.data[i] - b.centroids.data[i]) > 1e-10) return "centroids differ after permutation";
  return {};
}

Outcome silhouette_range(Gen& g) {
  auto pts = random_points(g, static_cast<std::size_t>(g.integer(4, 80)), static_cast<std::size_t>(g.integer(1, 5)));
  int k = static_cast<int>(g.integer(2, std::min<long>(6, static_cast<long>(pts.rows))));
  std::vector<int> labels(pts.rows);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < static_cast<std::size_t>(k) ? static_cast<int>(i) : static_cast<int>(g.integer(0, k - 1));
  double s = cluster::silhouette_score(pts, labels, k);
  if (s < -1 || s > 1) return msg("silhouette ", s);
  return {};
}

// ---- archetypes ----

Outcome quadrant_monotone_transform(Gen& g) {
  // An odd number of clusters, each of odd size, keeps every median an observed value.
  int k = static_cast<int>(2 * g.integer(1, 3) + 1);
  std::vector<int> clusters;
  std::vector<RiskResiliencePoint> pts;
  for (int c = 0; c < k; ++c) {
    long n = 2 * g.integer(0, 10) + 1;
    double cr = g.real(0, 1), cs = g.real(0, 1);
    for (long i = 0; i < n; ++i) {
      clusters.push_back(c);
      pts.push_back({cbg(static_cast<int>(pts.size() + 1)), std::clamp(cr + g.real(-0.2, 0.2), 0.0, 1.0),
                     std::clamp(cs + g.real(-0.2, 0.2), 0.0, 1.0)});
    }
  }
  auto base = archetypes::label_quadrants(indices::with_global_medians(pts), clusters, k);
  auto cubed = pts;
  for (auto& p : cubed) {
    p.risk_index = p.risk_index * p.risk_index * p.risk_index;
    p.resilience_index = std::exp(3 * p.resilience_index) - 7;
  }
  auto moved = archetypes::label_quadrants(indices::with_global_medians(cubed), clusters, k);
  if (base.cluster_labels != moved.cluster_labels) return "monotone transform changed labels";
  return {};
}

Outcome archetype_counts(Gen& g) {
  auto m = random_matrix(g, static_cast<std::size_t>(g.integer(1, 60)));
  std::vector<ArchetypeLabel> labels;
  for (std::size_t i = 0; i < m.size(); ++i) labels.push_back(kAllLabels[g.integer(0, 3)]);
  ingest::IncomeMap inc;
  for (const auto& id : m.rows)
    if (g.coin(0.8)) inc[id] = g.real(2e4, 1e5);
  auto rows = archetypes::income_disparity(inc, m.rows, labels);
  std::size_t sum = 0;
  for (const auto& r : rows)
    if (r.archetype != archetypes::kAllArchetypes) sum += r.cbg_count;
  if (sum != m.size() || rows.back().cbg_count != m.size()) return msg("archetype counts ", sum, " vs ", m.size());
  return {};
}

Outcome quantiles_match_reference(Gen& g) {
  std::vector<double> v(static_cast<std::size_t>(g.integer(1, 80)));
  for (auto& x : v) x = g.coin(0.2) ? std::round(g.real(0, 10)) : g.real(-100, 100);
  auto s = archetypes::box_stats(v);
  if (s.q1 != oracle::sorted_quantile(v, 0.25) || s.median != oracle::sorted_quantile(v, 0.5) ||
      s.q3 != oracle::sorted_quantile(v, 0.75))
    return "quantiles differ from the sort-based reference";
  return {};
}

// ---- synth ----

Outcome synth_pure(Gen& g) {
  auto spec = tiny_spec(g);
  auto a = synth::generate_scenario(spec);
  auto b = synth::generate_scenario(spec);
  if (a.files != b.files || synth::ground_truth_json(a.truth) != synth::ground_truth_json(b.truth))
    return "same spec produced different bundles";
  return {};
}

Outcome synth_clean_and_planted(Gen& g) {
  auto spec = tiny_spec(g);
  auto bundle = synth::generate_scenario(spec);
  fs::path dir = scratch_dir("plant");
  synth::write_bundle(bundle, dir);
  auto data = ingest::ingest_directory(dir);
  fs::remove_all(dir);
  if (data.report["total_rejected"].get<std::size_t>() != 0) return "generated files had rejected rows";
  AnalysisConfig cfg;
  auto fvs = features::compute_features(data, cfg);
  std::map<CbgId, const FeatureVector*> by_id;
  for (const auto& fv : fvs) by_id[fv.cbg] = &fv;
  for (const auto& p : bundle.truth.cbgs) {
    const FeatureVector& fv = *by_id.at(p.id);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      if (p.features[j].has_value() != fv.values[j].has_value())
        return msg(p.id.str(), " ", feature_name(j), " presence differs");
      if (!p.features[j]) continue;
      // Counts and dollar totals are exact; lengths and ratios carry float rounding only.
      if (std::abs(*p.features[j] - *fv.values[j]) > 1e-9) return msg(p.id.str(), " ", feature_name(j), " off");
    }
    for (std::size_t r = 0; r < kRecoveryCount; ++r)
      if (p.features[kFirstRecovery + r] && p.censored[r] != fv.censored[r]) return "censor flag differs";
  }
  return {};
}

}  // namespace

const std::vector<NamedProperty>& all_properties() {
  static const std::vector<NamedProperty> props = {
      {"core: config JSON round trip", config_roundtrip},
      {"core: core types JSON round trip", core_types_roundtrip},
      {"core: CbgId accepts exactly 12 digits", cbg_id_rule},
      {"ingest: accepted + rejected = rows", ingest_row_accounting},
      {"ingest: idempotent workspace", ingest_idempotent},
      {"geometry: 0 <= clip <= length", clip_bounds},
      {"geometry: disjoint clip sum <= length", clip_disjoint_sum},
      {"geometry: clip reversal invariant", clip_reversal},
      {"geometry: point_in_polygon rotation invariant", pip_rotation},
      {"features: PC of baseline series is zero", pc_identity},
      {"features: proactivity within window length", proactivity_range},
      {"features: evacuation matches brute force", evacuation_oracle},
      {"features: flooded length under bbox bound", flooded_bbox_bound},
      {"features: damage_ratio * buildings = claims", damage_ratio_identity},
      {"features: rolling of c*B is 100(c-1)", rolling_scaled_baseline},
      {"features: recovery antitone in threshold", recovery_antitone},
      {"indices: normalization idempotent", normalize_idempotent},
      {"indices: normalization round trip", normalize_roundtrip},
      {"indices: permutation invariant", index_permutation},
      {"indices: monotone in features", index_monotone},
      {"indices: within [0,1]", index_range},
      {"indices: translation invariant", translation_invariance},
      {"clustering: inertia non-increasing", inertia_monotone},
      {"clustering: final assignment is a fixpoint", kmeans_fixpoint},
      {"clustering: independent of worker count", kmeans_worker_independence},
      {"clustering: canonical relabeling", canonical_relabel},
      {"clustering: silhouette within [-1,1]", silhouette_range},
      {"archetypes: labels invariant under monotone transforms", quadrant_monotone_transform},
      {"archetypes: counts sum to included", archetype_counts},
      {"archetypes: quantiles match sort reference", quantiles_match_reference},
      {"synth: generation is pure", synth_pure},
      {"synth: clean ingest and planted features", synth_clean_and_planted},
  };
  return props;
}

}  // namespace testsupport
