#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "resilience/archetypes.hpp"
#include "resilience/clustering.hpp"
#include "resilience/core.hpp"
#include "resilience/features.hpp"
#include "resilience/indices.hpp"
#include "resilience/ingest.hpp"

namespace resilience::pipeline {

inline constexpr const char* kToolVersion = "1.0.0";

// Output files of a run, in manifest order.
inline constexpr std::array<const char*, 9> kOutputFiles = {
    "features.csv",        "normalized.csv",        "cluster_model.json",
    "archetypes.json",     "boxplot_stats.csv",     "income_disparity.csv",
    "exclusions.csv",      "run_manifest.json",     "choropleth.geojson"};
inline constexpr const char* kTimingsFile = "run_timings.json";
inline constexpr const char* kSweepFile = "k_sweep.csv";

enum class Stage { features, cluster, report };
Stage stage_from_string(const std::string& s);  // throws InputError

// Caps OpenMP parallelism; n <= 0 leaves the runtime default.
void set_workers(int n);

struct RunResult {
  AnalysisConfig cfg;
  features::AssembledFeatures assembled;
  indices::NormalizedMatrix normalized;
  indices::IndexPoints points;
  cluster::ClusterModel model;
  archetypes::ArchetypeAssignment assignment;
  std::vector<ArchetypeLabel> row_labels;
  std::vector<archetypes::FeatureStatsRow> boxplot;
  std::vector<archetypes::IncomeRow> income;
  std::vector<std::pair<std::string, double>> stage_seconds;
};

/// Features through archetypes, in memory.
RunResult analyze(const ingest::Dataset& data, const AnalysisConfig& cfg);
/// Normalization onward from an assembled matrix. When model is given, clustering is skipped.
RunResult analyze_matrix(features::AssembledFeatures assembled, const ingest::IncomeMap& incomes,
                         const AnalysisConfig& cfg, const cluster::ClusterModel* model = nullptr);

// CSV/JSON forms of the persisted intermediates.
std::string features_csv(const features::FeatureMatrix& m);
features::FeatureMatrix parse_features_csv(const std::filesystem::path& path);
std::string exclusions_csv(const std::vector<features::Exclusion>& ex);
std::vector<features::Exclusion> parse_exclusions_csv(const std::filesystem::path& path);

/// Writes the nine outputs plus run_timings.json. inputs maps workspace file names to digests.
void write_outputs(const RunResult& r, const geo::CbgTable& cbgs, const ingest::IncomeMap& incomes,
                   const std::map<std::string, std::string>& input_digests, const std::filesystem::path& out_dir);

std::map<std::string, std::string> workspace_digests(const std::filesystem::path& workspace);

struct RunOptions {
  std::filesystem::path workspace;
  std::filesystem::path out_dir;
  AnalysisConfig cfg;
  Stage stage = Stage::features;
};

/// The `run` command: workspace -> all outputs, optionally resuming from out_dir intermediates.
RunResult run(const RunOptions& opts);

std::string sweep_csv(const std::vector<cluster::SweepRow>& rows);
std::vector<cluster::SweepRow> sweep(const std::filesystem::path& workspace, const AnalysisConfig& cfg, int k_min,
                                     int k_max);

}  // namespace resilience::pipeline
