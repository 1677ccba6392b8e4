#include "resilience/pipeline.hpp"

#include <chrono>
#include <set>

#include <omp.h>

#include "resilience/io.hpp"

namespace resilience::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

Stage stage_from_string(const std::string& s) {
  if (s == "features") return Stage::features;
  if (s == "cluster") return Stage::cluster;
  if (s == "report") return Stage::report;
  throw InputError("unknown stage '" + s + "' (expected features, cluster or report)");
}

void set_workers(int n) {
  if (n > 0) omp_set_num_threads(n);
}

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<std::pair<std::string, double>>& sink) : sink_(sink) {}
  void lap(const char* name) {
    auto now = std::chrono::steady_clock::now();
    sink_.emplace_back(name, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }

 private:
  std::vector<std::pair<std::string, double>>& sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  out.push_back('\n');
  return out;
}

std::string opt_number(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

}  // namespace

RunResult analyze_matrix(features::AssembledFeatures assembled, const ingest::IncomeMap& incomes,
                         const AnalysisConfig& cfg, const cluster::ClusterModel* model) {
  RunResult r;
  r.cfg = cfg;
  StageClock clock(r.stage_seconds);
  r.assembled = std::move(assembled);
  if (r.assembled.matrix.size() < static_cast<std::size_t>(cfg.k_clusters))
    throw InsufficientDataError("only " + std::to_string(r.assembled.matrix.size()) + " complete CBGs for k=" +
                                std::to_string(cfg.k_clusters));
  r.normalized = indices::normalize_minmax(r.assembled.matrix);
  r.points = indices::index_points(r.normalized);
  clock.lap("indices");
  if (model) {
    if (model->rows != r.normalized.rows) throw InputError("cluster model rows do not match features.csv");
    r.model = *model;
  } else {
    r.model = cluster::kmeans_fit(r.normalized, cfg.k_clusters, cfg.rng_seed, cfg.restarts);
  }
  clock.lap("clustering");
  r.assignment = archetypes::label_quadrants(r.points, r.model.labels, r.model.k);
  r.row_labels = r.assignment.row_labels(r.model.labels);
  r.boxplot = archetypes::archetype_feature_stats(r.assembled.matrix, r.row_labels);
  r.income = archetypes::income_disparity(incomes, r.assembled.matrix.rows, r.row_labels);
  clock.lap("archetypes");
  return r;
}

RunResult analyze(const ingest::Dataset& data, const AnalysisConfig& cfg) {
  auto problems = validate_config(cfg);
  if (!problems.empty()) throw InputError("config: " + problems.front());
  std::vector<std::pair<std::string, double>> timing;
  StageClock clock(timing);
  auto fvs = features::compute_features(data, cfg);
  auto assembled = features::assemble_feature_matrix(fvs, cfg.k_clusters);
  clock.lap("features");
  RunResult r = analyze_matrix(std::move(assembled), data.incomes, cfg);
  r.stage_seconds.insert(r.stage_seconds.begin(), timing.begin(), timing.end());
  return r;
}

std::string features_csv(const features::FeatureMatrix& m) {
  std::vector<std::string> header{"cbg_id"};
  for (std::size_t j = 0; j < kFeatureCount; ++j) header.emplace_back(feature_name(j));
  for (std::size_t j = 0; j < kRecoveryCount; ++j) header.emplace_back(censor_column_name(j));
  std::string out = join_row(header);
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::string> row{m.rows[i].str()};
    for (double v : m.values[i]) row.push_back(io::format_double(v));
    for (bool c : m.censored[i]) row.push_back(c ? "1" : "0");
    out += join_row(row);
  }
  return out;
}

features::FeatureMatrix parse_features_csv(const fs::path& path) {
  std::string header = "cbg_id";
  for (std::size_t j = 0; j < kFeatureCount; ++j) header += "," + std::string(feature_name(j));
  for (std::size_t j = 0; j < kRecoveryCount; ++j) header += "," + std::string(censor_column_name(j));
  io::CsvReader csv(path, header);
  features::FeatureMatrix m;
  while (auto row = csv.next()) {
    const auto& f = *row;
    if (f.size() != 1 + kFeatureCount + kRecoveryCount)
      throw InputError(path.string() + ":" + std::to_string(csv.line_number()) + ": wrong field count");
    m.rows.push_back(CbgId::parse(f[0]));
    std::array<double, kFeatureCount> values{};
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      auto v = io::parse_double(f[1 + j]);
      if (!v) throw InputError(path.string() + ":" + std::to_string(csv.line_number()) + ": bad number");
      values[j] = *v;
    }
    std::array<bool, kRecoveryCount> censored{};
    for (std::size_t j = 0; j < kRecoveryCount; ++j) censored[j] = f[1 + kFeatureCount + j] == "1";
    m.values.push_back(values);
    m.censored.push_back(censored);
  }
  return m;
}

std::string exclusions_csv(const std::vector<features::Exclusion>& ex) {
  std::string out = "cbg_id,feature,reason\n";
  for (const auto& e : ex) out += join_row({e.cbg.str(), std::string(feature_name(e.feature)), e.reason});
  return out;
}

std::vector<features::Exclusion> parse_exclusions_csv(const fs::path& path) {
  io::CsvReader csv(path, "cbg_id,feature,reason");
  std::vector<features::Exclusion> out;
  while (auto row = csv.next()) {
    const auto& f = *row;
    auto feature = f.size() == 3 ? feature_from_string(f[1]) : std::nullopt;
    if (!feature) throw InputError(path.string() + ":" + std::to_string(csv.line_number()) + ": malformed row");
    out.push_back({CbgId::parse(f[0]), *feature, std::string(f[2])});
  }
  return out;
}

namespace {

std::string normalized_csv(const RunResult& r) {
  std::vector<std::string> header{"cbg_id"};
  for (std::size_t j = 0; j < kFeatureCount; ++j) header.emplace_back(feature_name(j));
  for (const char* extra : {"risk_index", "resilience_index", "cluster", "archetype"}) header.emplace_back(extra);
  std::string out = join_row(header);
  for (std::size_t i = 0; i < r.normalized.size(); ++i) {
    std::vector<std::string> row{r.normalized.rows[i].str()};
    for (double v : r.normalized.values[i]) row.push_back(io::format_double(v));
    row.push_back(io::format_double(r.points.points[i].risk_index));
    row.push_back(io::format_double(r.points.points[i].resilience_index));
    row.push_back(std::to_string(r.model.labels[i]));
    row.emplace_back(to_string(r.row_labels[i]));
    out += join_row(row);
  }
  return out;
}

std::string boxplot_csv(const std::vector<archetypes::FeatureStatsRow>& rows) {
  std::string out = "archetype,feature,n,min,q1,median,q3,max,mean,outliers\n";
  for (const auto& r : rows) {
    std::string outliers;
    for (std::size_t i = 0; i < r.stats.outliers.size(); ++i) {
      if (i) outliers.push_back(';');
      outliers += io::format_double(r.stats.outliers[i]);
    }
    const auto& s = r.stats;
    out += join_row({r.archetype, std::string(feature_name(r.feature)), std::to_string(s.n), io::format_double(s.min),
                     io::format_double(s.q1), io::format_double(s.median), io::format_double(s.q3),
                     io::format_double(s.max), io::format_double(s.mean), outliers});
  }
  return out;
}

std::string income_csv(const std::vector<archetypes::IncomeRow>& rows) {
  std::string out = "archetype,cbg_count,income_count,mean_income,median_income\n";
  for (const auto& r : rows)
    out += join_row({r.archetype, std::to_string(r.cbg_count), std::to_string(r.income_count),
                     opt_number(r.mean_income), opt_number(r.median_income)});
  return out;
}

json choropleth(const RunResult& r, const geo::CbgTable& cbgs, const ingest::IncomeMap& incomes) {
  std::map<CbgId, std::size_t> row_of;
  for (std::size_t i = 0; i < r.normalized.size(); ++i) row_of.emplace(r.normalized.rows[i], i);
  auto ring = [](const geo::Ring& ring) {
    json out = json::array();
    for (const auto& p : ring) out.push_back({p.lon, p.lat});
    return out;
  };
  auto polygon = [&](const geo::Polygon& p) {
    json out = json::array({ring(p.exterior)});
    for (const auto& h : p.holes) out.push_back(ring(h));
    return out;
  };
  json features = json::array();
  for (const auto& s : cbgs) {
    json geometry;
    if (s.parts.size() == 1) {
      geometry = {{"type", "Polygon"}, {"coordinates", polygon(s.parts[0])}};
    } else {
      json coords = json::array();
      for (const auto& p : s.parts) coords.push_back(polygon(p));
      geometry = {{"type", "MultiPolygon"}, {"coordinates", coords}};
    }
    json props = {{"cbg_id", s.id.str()}, {"included", false}, {"cluster", nullptr}, {"archetype", nullptr},
                  {"risk_index", nullptr}, {"resilience_index", nullptr}, {"median_income", nullptr}};
    if (auto it = incomes.find(s.id); it != incomes.end()) props["median_income"] = it->second;
    if (auto it = row_of.find(s.id); it != row_of.end()) {
      std::size_t i = it->second;
      props["included"] = true;
      props["cluster"] = r.model.labels[i];
      props["archetype"] = to_string(r.row_labels[i]);
      props["risk_index"] = r.points.points[i].risk_index;
      props["resilience_index"] = r.points.points[i].resilience_index;
    }
    features.push_back({{"type", "Feature"}, {"properties", props}, {"geometry", geometry}});
  }
  return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace

void write_outputs(const RunResult& r, const geo::CbgTable& cbgs, const ingest::IncomeMap& incomes,
                   const std::map<std::string, std::string>& input_digests, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::map<std::string, std::string> contents;
  contents["features.csv"] = features_csv(r.assembled.matrix);
  contents["normalized.csv"] = normalized_csv(r);
  contents["cluster_model.json"] = cluster::model_json(r.model).dump(2) + "\n";
  json arche = archetypes::assignment_json(r.assignment);
  arche["global_median_risk"] = r.points.global_median_risk;
  arche["global_median_resilience"] = r.points.global_median_resilience;
  contents["archetypes.json"] = arche.dump(2) + "\n";
  contents["boxplot_stats.csv"] = boxplot_csv(r.boxplot);
  contents["income_disparity.csv"] = income_csv(r.income);
  contents["exclusions.csv"] = exclusions_csv(r.assembled.exclusions);
  contents["choropleth.geojson"] = choropleth(r, cbgs, incomes).dump() + "\n";

  json normalization = json::object();
  for (std::size_t j = 0; j < kFeatureCount; ++j)
    normalization[std::string(feature_name(j))] = {{"min", r.normalized.min[j]}, {"max", r.normalized.max[j]}};
  json outputs = json::object();
  for (const auto& [name, text] : contents) outputs[name] = io::sha256_hex(text);
  json manifest = {
      {"tool", "resilience"},
      {"version", kToolVersion},
      {"config", r.cfg},
      {"inputs", input_digests},
      {"normalization", normalization},
      {"cluster_model",
       {{"k", r.model.k},
        {"seed", r.model.seed},
        {"restarts", r.cfg.restarts},
        {"inertia", r.model.inertia},
        {"silhouette", r.model.silhouette},
        {"iterations", r.model.iterations},
        {"cluster_sizes", r.model.cluster_sizes()}}},
      {"rng",
       {{"name", "splitmix64"},
        {"definition",
         "state += 0x9E3779B97F4A7C15; z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; "
         "z = (z ^ (z >> 27)) * 0x94D049BB133111EB; return z ^ (z >> 31)"},
        {"restart_seed", "r-th output of splitmix64(seed), r = 0.."}}},
      {"included_cbgs", r.assembled.matrix.size()},
      {"excluded_cbgs",
       [&] {
         std::set<CbgId> ids;
         for (const auto& e : r.assembled.exclusions) ids.insert(e.cbg);
         return ids.size();
       }()},
      {"outputs", outputs}};
  contents["run_manifest.json"] = manifest.dump(2) + "\n";

  for (const auto& [name, text] : contents) io::write_file(out_dir / name, text);

  json timings = json::object();
  for (const auto& [stage, secs] : r.stage_seconds) timings[stage] = secs;
  json timing_doc = {{"stage_seconds", timings}, {"workers", omp_get_max_threads()}};
  io::write_file(out_dir / kTimingsFile, timing_doc.dump(2) + "\n");
}

std::map<std::string, std::string> workspace_digests(const fs::path& workspace) {
  std::map<std::string, std::string> out;
  for (const auto& name : ingest::mandatory_files()) out[name] = io::sha256_file(workspace / name);
  return out;
}

RunResult run(const RunOptions& opts) {
  auto problems = validate_config(opts.cfg);
  if (!problems.empty()) throw InputError("config: " + problems.front());
  auto digests = workspace_digests(opts.workspace);
  if (opts.stage == Stage::features) {
    auto data = ingest::load_workspace(opts.workspace);
    RunResult r = analyze(data, opts.cfg);
    write_outputs(r, data.cbgs, data.incomes, digests, opts.out_dir);
    return r;
  }
  // Resume: only geometry and incomes are needed from the workspace.
  auto cbgs = ingest::load_cbg_geometries(opts.workspace / ingest::files::kCbgs).value;
  auto incomes = ingest::load_income_table(opts.workspace / ingest::files::kIncome).value;
  features::AssembledFeatures assembled;
  assembled.matrix = parse_features_csv(opts.out_dir / "features.csv");
  assembled.exclusions = parse_exclusions_csv(opts.out_dir / "exclusions.csv");
  std::optional<cluster::ClusterModel> model;
  if (opts.stage == Stage::report) {
    model = cluster::model_from_json(json::parse(io::read_file(opts.out_dir / "cluster_model.json")));
  }
  RunResult r = analyze_matrix(std::move(assembled), incomes, opts.cfg, model ? &*model : nullptr);
  write_outputs(r, cbgs, incomes, digests, opts.out_dir);
  return r;
}

std::string sweep_csv(const std::vector<cluster::SweepRow>& rows) {
  std::string out = "k,inertia,silhouette\n";
  for (const auto& r : rows)
    out += join_row({std::to_string(r.k), io::format_double(r.inertia), io::format_double(r.silhouette)});
  return out;
}

std::vector<cluster::SweepRow> sweep(const fs::path& workspace, const AnalysisConfig& cfg, int k_min, int k_max) {
  auto problems = validate_config(cfg);
  if (!problems.empty()) throw InputError("config: " + problems.front());
  auto data = ingest::load_workspace(workspace);
  auto fvs = features::compute_features(data, cfg);
  auto assembled = features::assemble_feature_matrix(fvs, k_max + 1);
  auto nm = indices::normalize_minmax(assembled.matrix);
  return cluster::sweep_k(cluster::Matrix::from(nm), k_min, k_max, cfg.rng_seed, cfg.restarts);
}

}  // namespace resilience::pipeline
