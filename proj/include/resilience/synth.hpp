#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "resilience/core.hpp"

namespace resilience::synth {

struct Dist {
  double mean = 0.0;
  double spread = 0.0;  // standard deviation
};

/// Generator parameters for one planted archetype. Feature distributions are in raw units.
struct ArchetypeParams {
  ArchetypeLabel label = ArchetypeLabel::LL;
  int n_cbgs = 1;
  Dist proactivity_days;      // per category (pharmacy, gas), rounded to whole days
  Dist evacuation_change;     // realized as evacuees / baseline travellers
  Dist flooded_km;
  Dist claim_count;
  Dist claim_amount_usd;      // per claim, whole dollars
  Dist building_count;
  Dist telecom_drop;          // fraction of baseline speed lost at the worst day
  Dist recovery_days;         // each of the four recovery curves, whole days
  Dist income_usd;
};

struct MissingInjection {
  std::size_t cbg_index = 0;  // position in generation order
  Feature feature = Feature::preparedness_proactivity;
};

struct ScenarioSpec {
  std::vector<ArchetypeParams> archetypes;  // planted archetype index = position here
  double cell_size_deg = 0.01;
  double origin_lon = -95.8;
  double origin_lat = 29.5;
  int devices_per_cbg = 20;
  int baseline_travellers = 2;
  double point_claim_fraction = 0.8;  // the rest carry an explicit cbg_id
  std::vector<MissingInjection> missing;
  uint64_t rng_seed = 20170825;

  std::size_t total_cbgs() const;
};

/// Four archetypes sized like the Harris County clusters (LL 299, LH 662, HL 210, HH 290)
/// with income centers from the same study and moderate noise.
ScenarioSpec default_spec();
// Same layout with every spread set to zero.
ScenarioSpec noiseless(ScenarioSpec spec);

std::vector<std::string> validate_spec(const ScenarioSpec& spec);

nlohmann::json spec_json(const ScenarioSpec& spec);
ScenarioSpec spec_from_json(const nlohmann::json& j);  // absent keys keep default_spec values
ScenarioSpec load_spec(const std::filesystem::path& path);

struct PlantedCbg {
  CbgId id;
  std::size_t archetype = 0;
  ArchetypeLabel label = ArchetypeLabel::LL;
  std::array<std::optional<double>, kFeatureCount> features{};  // nullopt where a gap was injected
  std::array<bool, kRecoveryCount> censored{};
  double income = 0.0;
};

struct GroundTruth {
  uint64_t seed = 0;
  std::vector<PlantedCbg> cbgs;
};

nlohmann::json ground_truth_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

struct Bundle {
  std::map<std::string, std::string> files;  // file name -> contents
  GroundTruth truth;
};

/// Emits every ingest file plus ground truth. Throws InputError for an invalid spec.
/// Pure function of the spec (including its seed). Dates follow the default AnalysisConfig.
Bundle generate_scenario(const ScenarioSpec& spec);
// Writes the files and ground_truth.json.
void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);

struct DiscrepancyReport {
  std::array<double, kFeatureCount> max_abs_deviation{};
  std::array<std::size_t, kFeatureCount> compared{};
  std::size_t censor_mismatches = 0;
  std::size_t missing_mismatches = 0;  // planted-complete rows excluded or the reverse
  std::size_t included = 0;
  double ari = 0.0;
  double label_agreement = 0.0;
  std::vector<ArchetypeLabel> cluster_labels;

  nlohmann::json to_json() const;
};

/// Runs the full pipeline on a bundle directory and compares with the planted truth.
DiscrepancyReport verify_roundtrip(const std::filesystem::path& bundle_dir, const GroundTruth& truth,
                                   const AnalysisConfig& cfg);

// Planted daily percent changes (offset 0 = landfall) whose trailing 7-day mean first
// reaches -10% exactly `days` after landfall.
std::vector<double> recovery_profile(int days, int length);

}  // namespace resilience::synth
