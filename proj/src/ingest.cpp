#include "resilience/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "resilience/io.hpp"

namespace resilience::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

void FileReport::reject(std::size_t line, std::string reason) {
  ++total_rows;
  ++rejected;
  ++reasons[reason];
  rejections.push_back({line, std::move(reason)});
}

json report_json(const FileReport& r) {
  json rej = json::array();
  for (const auto& x : r.rejections) rej.push_back({{"line", x.line}, {"reason", x.reason}});
  return {{"file", r.file},         {"total_rows", r.total_rows}, {"accepted", r.accepted},
          {"rejected", r.rejected}, {"reasons", r.reasons},       {"rejections", rej}};
}

const std::vector<std::string>& mandatory_files() {
  static const std::vector<std::string> names = {
      files::kCbgs,  files::kIncome,  files::kPoiVisits, files::kCardTransactions, files::kSpeedtests,
      files::kStays, files::kTraffic, files::kRoads,     files::kClaims,           files::kBuildings};
  return names;
}

namespace {

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::optional<geo::LonLat> parse_position(const json& j) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) return std::nullopt;
  return geo::LonLat{j[0].get<double>(), j[1].get<double>()};
}

// Returns a reason code on failure.
std::optional<std::string> parse_ring(const json& j, geo::Ring& ring) {
  if (!j.is_array()) return "malformed_ring";
  for (const auto& p : j) {
    auto pos = parse_position(p);
    if (!pos) return "malformed_position";
    ring.push_back(*pos);
  }
  if (ring.size() < 4 || !(ring.front() == ring.back())) return "unclosed_ring";
  if (geo::signed_area(ring) == 0.0) return "zero_area";
  return std::nullopt;
}

std::optional<std::string> parse_polygon(const json& j, geo::Polygon& poly) {
  if (!j.is_array() || j.empty()) return "malformed_polygon";
  if (auto err = parse_ring(j[0], poly.exterior)) return err;
  for (std::size_t i = 1; i < j.size(); ++i) {
    geo::Ring hole;
    if (auto err = parse_ring(j[i], hole)) return err;
    poly.holes.push_back(std::move(hole));
  }
  return std::nullopt;
}

json ring_json(const geo::Ring& ring) {
  json out = json::array();
  for (const auto& p : ring) out.push_back({p.lon, p.lat});
  return out;
}

json polygon_json(const geo::Polygon& poly) {
  json out = json::array({ring_json(poly.exterior)});
  for (const auto& h : poly.holes) out.push_back(ring_json(h));
  return out;
}

std::optional<std::string> string_property(const json& feature, const char* key) {
  if (!feature.contains("properties") || !feature["properties"].is_object()) return std::nullopt;
  const auto& props = feature["properties"];
  if (!props.contains(key)) return std::nullopt;
  const auto& v = props[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned()) return std::to_string(v.get<uint64_t>());
  return std::nullopt;
}

const json& feature_array(const json& doc, const fs::path& path) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array())
    throw InputError(path.string() + ": not a GeoJSON FeatureCollection");
  return doc["features"];
}

bool is_visit_metric(MetricKind m) { return m != MetricKind::download_kbps; }

std::string csv_line(std::initializer_list<std::string_view> fields) {
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

Loaded<geo::CbgTable> load_cbg_geometries(const fs::path& path) {
  FileReport report{.file = path.filename().string()};
  json doc = parse_json_file(path);
  std::vector<geo::CbgShape> shapes;
  std::size_t index = 0;
  for (const auto& feature : feature_array(doc, path)) {
    ++index;  // feature ordinal stands in for a line number
    auto raw_id = string_property(feature, "cbg_id");
    if (!raw_id) {
      report.reject(index, "missing_cbg_id");
      continue;
    }
    auto id = CbgId::try_parse(*raw_id);
    if (!id) {
      report.reject(index, "invalid_cbg_id");
      continue;
    }
    const json& g = feature.contains("geometry") ? feature["geometry"] : json();
    std::string type = g.is_object() ? g.value("type", "") : "";
    geo::CbgShape shape{.id = *id, .parts = {}, .bbox = {}};
    std::optional<std::string> err;
    if (type == "Polygon") {
      geo::Polygon poly;
      err = parse_polygon(g.contains("coordinates") ? g["coordinates"] : json(), poly);
      shape.parts.push_back(std::move(poly));
    } else if (type == "MultiPolygon") {
      const json& coords = g.contains("coordinates") ? g["coordinates"] : json();
      if (!coords.is_array() || coords.empty()) err = "malformed_polygon";
      for (std::size_t i = 0; !err && i < coords.size(); ++i) {
        geo::Polygon poly;
        err = parse_polygon(coords[i], poly);
        shape.parts.push_back(std::move(poly));
      }
    } else {
      err = "not_polygon";
    }
    if (err) {
      report.reject(index, *err);
      continue;
    }
    std::vector<geo::LonLat> all;
    for (const auto& p : shape.parts) all.insert(all.end(), p.exterior.begin(), p.exterior.end());
    shape.bbox = geo::BBox::of(all);
    shapes.push_back(std::move(shape));
    report.accept();
  }
  geo::CbgTable table(std::move(shapes));  // throws on duplicate ids
  return {std::move(table), std::move(report)};
}

Loaded<IncomeMap> load_income_table(const fs::path& path) {
  FileReport report{.file = path.filename().string()};
  io::CsvReader csv(path, "cbg_id,median_income");
  IncomeMap out;
  while (auto row = csv.next()) {
    const auto& f = *row;
    std::size_t line = csv.line_number();
    if (f.size() != 2) {
      report.reject(line, "wrong_field_count");
      continue;
    }
    auto id = CbgId::try_parse(f[0]);
    if (!id) {
      report.reject(line, "invalid_cbg_id");
      continue;
    }
    if (f[1].empty()) {
      report.reject(line, "missing_income");
      continue;
    }
    auto v = io::parse_double(f[1]);
    if (!v) {
      report.reject(line, "invalid_income");
      continue;
    }
    if (*v < 0) {
      report.reject(line, "negative_income");
      continue;
    }
    if (!out.emplace(*id, *v).second) {
      report.reject(line, "duplicate_cbg_id");
      continue;
    }
    report.accept();
  }
  return {std::move(out), std::move(report)};
}

Loaded<std::vector<DailySeries>> load_daily_series(const fs::path& path, std::span<const MetricKind> accepted) {
  FileReport report{.file = path.filename().string()};
  io::CsvReader csv(path, "date,cbg_id,category,value");
  struct Acc {
    double sum = 0.0;
    int n = 0;
  };
  std::map<std::pair<CbgId, MetricKind>, std::map<Date, Acc>> acc;
  while (auto row = csv.next()) {
    const auto& f = *row;
    std::size_t line = csv.line_number();
    if (f.size() != 4) {
      report.reject(line, "wrong_field_count");
      continue;
    }
    auto date = Date::try_parse(f[0]);
    if (!date) {
      report.reject(line, "invalid_date");
      continue;
    }
    auto id = CbgId::try_parse(f[1]);
    if (!id) {
      report.reject(line, "invalid_cbg_id");
      continue;
    }
    auto metric = metric_from_string(f[2]);
    if (!metric || std::find(accepted.begin(), accepted.end(), *metric) == accepted.end()) {
      report.reject(line, "category_mismatch");
      continue;
    }
    auto v = io::parse_double(f[3]);
    if (!v) {
      report.reject(line, "invalid_value");
      continue;
    }
    if (*v < 0) {
      report.reject(line, "negative_value");
      continue;
    }
    auto& a = acc[{*id, *metric}][*date];
    a.sum += *v;
    ++a.n;
    report.accept();
  }
  std::vector<DailySeries> out;
  out.reserve(acc.size());
  for (auto& [key, days] : acc) {
    DailySeries s{.cbg = key.first, .metric = key.second, .values = {}};
    for (const auto& [d, a] : days) s.values.emplace(d, is_visit_metric(key.second) ? a.sum : a.sum / a.n);
    out.push_back(std::move(s));
  }
  return {std::move(out), std::move(report)};
}

Loaded<std::vector<StaySegment>> load_stay_segments(const fs::path& path, int utc_offset_minutes) {
  FileReport report{.file = path.filename().string()};
  io::CsvReader csv(path, "device_id,home_cbg,stay_cbg,start_ts,end_ts");
  std::vector<StaySegment> out;
  while (auto row = csv.next()) {
    const auto& f = *row;
    std::size_t line = csv.line_number();
    if (f.size() != 5) {
      report.reject(line, "wrong_field_count");
      continue;
    }
    if (f[0].empty()) {
      report.reject(line, "missing_device_id");
      continue;
    }
    auto home = CbgId::try_parse(f[1]);
    auto stay = CbgId::try_parse(f[2]);
    if (!home || !stay) {
      report.reject(line, "invalid_cbg_id");
      continue;
    }
    auto start = try_parse_timestamp(f[3], utc_offset_minutes);
    auto end = try_parse_timestamp(f[4], utc_offset_minutes);
    if (!start || !end) {
      report.reject(line, "invalid_timestamp");
      continue;
    }
    if (*end <= *start) {
      report.reject(line, "end_not_after_start");
      continue;
    }
    out.push_back({std::string(f[0]), *home, *stay, *start, *end});
    report.accept();
  }
  std::stable_sort(out.begin(), out.end(), [](const StaySegment& a, const StaySegment& b) {
    return std::tie(a.device_id, a.start) < std::tie(b.device_id, b.start);
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    const auto& prev = out[i - 1];
    const auto& cur = out[i];
    if (prev.device_id != cur.device_id) continue;
    if (cur.start < prev.end) throw InputError("overlapping stay segments for device " + cur.device_id);
    if (!(cur.home_cbg == prev.home_cbg))
      throw InputError("device " + cur.device_id + " has more than one home_cbg");
  }
  return {std::move(out), std::move(report)};
}

TrafficData load_traffic(const fs::path& readings_path, const fs::path& roads_path, int utc_offset_minutes) {
  TrafficData out;
  out.roads_report.file = roads_path.filename().string();
  out.readings_report.file = readings_path.filename().string();

  json doc = parse_json_file(roads_path);
  std::size_t index = 0;
  for (const auto& feature : feature_array(doc, roads_path)) {
    ++index;
    auto id = string_property(feature, "segment_id");
    if (!id || id->empty()) {
      out.roads_report.reject(index, "missing_segment_id");
      continue;
    }
    const json& g = feature.contains("geometry") ? feature["geometry"] : json();
    if (!g.is_object() || g.value("type", "") != "LineString" || !g.contains("coordinates") ||
        !g["coordinates"].is_array()) {
      out.roads_report.reject(index, "not_linestring");
      continue;
    }
    geo::LineString line;
    bool ok = true;
    for (const auto& p : g["coordinates"]) {
      auto pos = parse_position(p);
      if (!pos) {
        ok = false;
        break;
      }
      if (line.vertices.empty() || !(line.vertices.back() == *pos)) line.vertices.push_back(*pos);
    }
    if (!ok) {
      out.roads_report.reject(index, "malformed_position");
      continue;
    }
    if (line.vertices.size() < 2) {
      out.roads_report.reject(index, "degenerate_line");
      continue;
    }
    if (!out.roads.emplace(*id, std::move(line)).second) {
      out.roads_report.reject(index, "duplicate_segment_id");
      continue;
    }
    out.roads_report.accept();
  }

  io::CsvReader csv(readings_path, "segment_id,timestamp,speed_mph");
  while (auto row = csv.next()) {
    const auto& f = *row;
    std::size_t line = csv.line_number();
    auto& report = out.readings_report;
    if (f.size() != 3) {
      report.reject(line, "wrong_field_count");
      continue;
    }
    auto ts = try_parse_timestamp(f[1], utc_offset_minutes);
    if (!ts) {
      report.reject(line, "invalid_timestamp");
      continue;
    }
    if (*ts % 300 != 0) {
      report.reject(line, "off_grid_timestamp");
      continue;
    }
    std::optional<double> speed;
    if (!f[2].empty()) {
      speed = io::parse_double(f[2]);
      if (!speed) {
        report.reject(line, "invalid_speed");
        continue;
      }
      if (*speed < 0) {
        report.reject(line, "negative_speed");
        continue;
      }
    }
    if (!out.roads.contains(std::string(f[0]))) {
      report.reject(line, "unknown_segment");
      continue;
    }
    out.readings.push_back({std::string(f[0]), *ts, speed});
    report.accept();
  }
  std::stable_sort(out.readings.begin(), out.readings.end(), [](const TrafficReading& a, const TrafficReading& b) {
    return std::tie(a.segment_id, a.timestamp) < std::tie(b.segment_id, b.timestamp);
  });
  return out;
}

Loaded<std::vector<ClaimRecord>> load_claims(const fs::path& path) {
  FileReport report{.file = path.filename().string()};
  io::CsvReader csv(path, "claim_id,lat,lon,cbg_id,damage_amount_usd");
  std::vector<ClaimRecord> out;
  while (auto row = csv.next()) {
    const auto& f = *row;
    std::size_t line = csv.line_number();
    if (f.size() != 5) {
      report.reject(line, "wrong_field_count");
      continue;
    }
    bool has_point = !f[1].empty() || !f[2].empty();
    bool has_id = !f[3].empty();
    if (has_point && has_id) {
      report.reject(line, "both_locations");
      continue;
    }
    if (!has_point && !has_id) {
      report.reject(line, "no_location");
      continue;
    }
    ClaimRecord rec{.claim_id = std::string(f[0]), .location = {}, .cbg = {}, .damage_amount_usd = 0.0};
    if (has_point) {
      auto lat = io::parse_double(f[1]);
      auto lon = io::parse_double(f[2]);
      if (!lat || !lon || std::abs(*lat) > 90.0 || std::abs(*lon) > 180.0) {
        report.reject(line, "invalid_coordinate");
        continue;
      }
      rec.location = geo::LonLat{*lon, *lat};
    } else {
      rec.cbg = CbgId::try_parse(f[3]);
      if (!rec.cbg) {
        report.reject(line, "invalid_cbg_id");
        continue;
      }
    }
    auto amount = io::parse_double(f[4]);
    if (!amount) {
      report.reject(line, "invalid_damage");
      continue;
    }
    if (*amount < 0) {
      report.reject(line, "negative_damage");
      continue;
    }
    rec.damage_amount_usd = *amount;
    out.push_back(std::move(rec));
    report.accept();
  }
  return {std::move(out), std::move(report)};
}

Loaded<BuildingMap> load_building_counts(const fs::path& path) {
  FileReport report{.file = path.filename().string()};
  io::CsvReader csv(path, "cbg_id,building_count");
  BuildingMap out;
  while (auto row = csv.next()) {
    const auto& f = *row;
    std::size_t line = csv.line_number();
    if (f.size() != 2) {
      report.reject(line, "wrong_field_count");
      continue;
    }
    auto id = CbgId::try_parse(f[0]);
    if (!id) {
      report.reject(line, "invalid_cbg_id");
      continue;
    }
    auto n = io::parse_int(f[1]);
    if (!n) {
      report.reject(line, "non_integer_count");
      continue;
    }
    if (*n < 0) {
      report.reject(line, "negative_count");
      continue;
    }
    if (!out.emplace(*id, *n).second) {
      report.reject(line, "duplicate_cbg_id");
      continue;
    }
    report.accept();
  }
  return {std::move(out), std::move(report)};
}

namespace {

json coverage_json(const Dataset& d) {
  std::map<CbgId, json> cov;
  for (const auto& s : d.cbgs)
    cov[s.id] = {{"income", d.incomes.contains(s.id)}, {"buildings", d.buildings.contains(s.id)},
                 {"series_days", json::object()}, {"devices", 0}};
  for (const auto& s : d.series) {
    auto it = cov.find(s.cbg);
    if (it != cov.end()) it->second["series_days"][std::string(to_string(s.metric))] = s.values.size();
  }
  const std::string* last_device = nullptr;
  for (const auto& s : d.stays) {
    if (last_device && *last_device == s.device_id) continue;
    last_device = &s.device_id;
    auto it = cov.find(s.home_cbg);
    if (it != cov.end()) it->second["devices"] = it->second["devices"].get<int>() + 1;
  }
  json out = json::object();
  for (auto& [id, v] : cov) out[id.str()] = std::move(v);
  return out;
}

}  // namespace

Dataset ingest_directory(const fs::path& dir, int utc_offset_minutes) {
  for (const auto& name : mandatory_files())
    if (!fs::is_regular_file(dir / name)) throw InputError("missing input file " + name);

  Dataset d;
  json files_json = json::object();
  auto keep = [&](const FileReport& r) { files_json[r.file] = report_json(r); };

  auto cbgs = load_cbg_geometries(dir / files::kCbgs);
  d.cbgs = std::move(cbgs.value);
  keep(cbgs.report);
  auto income = load_income_table(dir / files::kIncome);
  d.incomes = std::move(income.value);
  keep(income.report);
  for (auto [name, family] : {std::pair{files::kPoiVisits, std::span<const MetricKind>(kPoiMetrics)},
                              std::pair{files::kCardTransactions, std::span<const MetricKind>(kCardMetrics)},
                              std::pair{files::kSpeedtests, std::span<const MetricKind>(kSpeedMetrics)}}) {
    auto s = load_daily_series(dir / name, family);
    d.series.insert(d.series.end(), std::make_move_iterator(s.value.begin()), std::make_move_iterator(s.value.end()));
    keep(s.report);
  }
  auto stays = load_stay_segments(dir / files::kStays, utc_offset_minutes);
  d.stays = std::move(stays.value);
  keep(stays.report);
  auto traffic = load_traffic(dir / files::kTraffic, dir / files::kRoads, utc_offset_minutes);
  d.readings = std::move(traffic.readings);
  d.roads = std::move(traffic.roads);
  keep(traffic.readings_report);
  keep(traffic.roads_report);
  auto claims = load_claims(dir / files::kClaims);
  d.claims = std::move(claims.value);
  keep(claims.report);
  auto buildings = load_building_counts(dir / files::kBuildings);
  d.buildings = std::move(buildings.value);
  keep(buildings.report);

  std::size_t rejected = 0;
  for (const auto& [_, r] : files_json.items()) rejected += r["rejected"].get<std::size_t>();
  d.report = {{"files", files_json}, {"total_rejected", rejected}, {"coverage", coverage_json(d)}};
  return d;
}

void write_workspace(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  using io::format_double;

  json cbgs = {{"type", "FeatureCollection"}, {"features", json::array()}};
  for (const auto& s : d.cbgs) {
    json geometry;
    if (s.parts.size() == 1) {
      geometry = {{"type", "Polygon"}, {"coordinates", polygon_json(s.parts[0])}};
    } else {
      json coords = json::array();
      for (const auto& p : s.parts) coords.push_back(polygon_json(p));
      geometry = {{"type", "MultiPolygon"}, {"coordinates", coords}};
    }
    cbgs["features"].push_back(
        {{"type", "Feature"}, {"properties", {{"cbg_id", s.id.str()}}}, {"geometry", geometry}});
  }
  io::write_file(dir / files::kCbgs, cbgs.dump() + "\n");

  std::string income = "cbg_id,median_income\n";
  for (const auto& [id, v] : d.incomes) income += csv_line({id.str(), format_double(v)});
  io::write_file(dir / files::kIncome, income);

  std::string poi = "date,cbg_id,category,value\n";
  std::string card = poi;
  std::string speed = poi;
  for (const auto& s : d.series) {
    std::string& target = s.metric == MetricKind::download_kbps ? speed
                          : (s.metric == MetricKind::cc_essential || s.metric == MetricKind::cc_nonessential)
                              ? card
                              : poi;
    for (const auto& [date, v] : s.values)
      target += csv_line({date.iso(), s.cbg.str(), to_string(s.metric), format_double(v)});
  }
  io::write_file(dir / files::kPoiVisits, poi);
  io::write_file(dir / files::kCardTransactions, card);
  io::write_file(dir / files::kSpeedtests, speed);

  std::string stays = "device_id,home_cbg,stay_cbg,start_ts,end_ts\n";
  for (const auto& s : d.stays)
    stays += csv_line({s.device_id, s.home_cbg.str(), s.stay_cbg.str(), format_timestamp(s.start),
                       format_timestamp(s.end)});
  io::write_file(dir / files::kStays, stays);

  std::string traffic = "segment_id,timestamp,speed_mph\n";
  for (const auto& r : d.readings)
    traffic += csv_line({r.segment_id, format_timestamp(r.timestamp), r.speed ? format_double(*r.speed) : ""});
  io::write_file(dir / files::kTraffic, traffic);

  json roads = {{"type", "FeatureCollection"}, {"features", json::array()}};
  for (const auto& [id, line] : d.roads) {
    json coords = json::array();
    for (const auto& p : line.vertices) coords.push_back({p.lon, p.lat});
    roads["features"].push_back({{"type", "Feature"},
                                 {"properties", {{"segment_id", id}}},
                                 {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
  }
  io::write_file(dir / files::kRoads, roads.dump() + "\n");

  std::string claims = "claim_id,lat,lon,cbg_id,damage_amount_usd\n";
  for (const auto& c : d.claims) {
    if (c.location)
      claims += csv_line({c.claim_id, format_double(c.location->lat), format_double(c.location->lon), "",
                          format_double(c.damage_amount_usd)});
    else
      claims += csv_line({c.claim_id, "", "", c.cbg->str(), format_double(c.damage_amount_usd)});
  }
  io::write_file(dir / files::kClaims, claims);

  std::string buildings = "cbg_id,building_count\n";
  for (const auto& [id, n] : d.buildings) buildings += csv_line({id.str(), std::to_string(n)});
  io::write_file(dir / files::kBuildings, buildings);

  io::write_file(dir / files::kReport, d.report.dump(2) + "\n");
}

Dataset load_workspace(const fs::path& dir) {
  if (!fs::is_regular_file(dir / files::kReport))
    throw InputError("workspace " + dir.string() + " has no " + files::kReport + "; run ingest first");
  // Workspace timestamps are already local, so the offset is irrelevant here.
  Dataset d = ingest_directory(dir, 0);
  d.report = parse_json_file(dir / files::kReport);
  return d;
}

}  // namespace resilience::ingest
