// resilience: command-line driver for the risk/resilience pipeline.
//
//   resilience ingest  --input DIR --workspace DIR
//   resilience run     --workspace DIR --out DIR [--stage features|cluster|report]
//   resilience sweep-k --workspace DIR --out DIR [--k-min 2 --k-max 8]
//   resilience synth   --out DIR [--spec FILE] [--noiseless]
//
// Common options: --config FILE, --seed N, --workers N. Each can also come from
// RESILIENCE_CONFIG, RESILIENCE_SEED, RESILIENCE_WORKERS; likewise RESILIENCE_WORKSPACE
// and RESILIENCE_OUT.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "resilience/core.hpp"
#include "resilience/ingest.hpp"
#include "resilience/io.hpp"
#include "resilience/pipeline.hpp"
#include "resilience/synth.hpp"

namespace fs = std::filesystem;
using namespace resilience;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInsufficient = 3;
constexpr int kExitInvariant = 4;

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  int workers = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "analysis config (JSON)")->envname("RESILIENCE_CONFIG");
  cmd->add_option("--seed", c.seed, "RNG seed, overrides the config")->envname("RESILIENCE_SEED");
  cmd->add_option("--workers", c.workers, "maximum worker threads (0 = all cores)")
      ->envname("RESILIENCE_WORKERS")
      ->check(CLI::NonNegativeNumber);
}

AnalysisConfig resolve_config(const Common& c) {
  AnalysisConfig cfg = c.config.empty() ? AnalysisConfig{} : load_config(c.config);
  if (c.seed) cfg.rng_seed = *c.seed;
  auto problems = validate_config(cfg);
  if (!problems.empty()) throw InputError("config: " + problems.front());
  pipeline::set_workers(c.workers);
  return cfg;
}

int cmd_ingest(const Common& c, const fs::path& input, const fs::path& workspace) {
  AnalysisConfig cfg = resolve_config(c);
  auto data = ingest::ingest_directory(input, cfg.utc_offset_minutes);
  ingest::write_workspace(data, workspace);
  std::cout << "ingested " << data.cbgs.size() << " CBGs into " << workspace.string() << "; "
            << data.report["total_rejected"].get<std::size_t>() << " rows rejected\n";
  for (const auto& [name, r] : data.report["files"].items()) {
    std::cout << "  " << name << ": " << r["accepted"] << " accepted, " << r["rejected"] << " rejected";
    for (const auto& [reason, n] : r["reasons"].items()) std::cout << " [" << reason << " x" << n << "]";
    std::cout << "\n";
  }
  return 0;
}

int cmd_run(const Common& c, const fs::path& workspace, const fs::path& out, const std::string& stage) {
  pipeline::RunOptions opts{workspace, out, resolve_config(c), pipeline::stage_from_string(stage)};
  auto r = pipeline::run(opts);
  std::cout << "clustered " << r.assembled.matrix.size() << " CBGs into k=" << r.model.k
            << " (silhouette " << io::format_double(r.model.silhouette) << ")\n";
  for (std::size_t k = 0; k < r.assignment.cluster_labels.size(); ++k)
    std::cout << "  cluster " << k << ": " << to_string(r.assignment.cluster_labels[k]) << ", "
              << r.assignment.cluster_sizes[k] << " CBGs\n";
  std::cout << "outputs written to " << out.string() << "\n";
  return 0;
}

int cmd_sweep(const Common& c, const fs::path& workspace, const fs::path& out, int k_min, int k_max) {
  if (k_min < 2 || k_max < k_min) throw InputError("k range: need 2 <= k-min <= k-max");
  auto rows = pipeline::sweep(workspace, resolve_config(c), k_min, k_max);
  std::string csv = pipeline::sweep_csv(rows);
  fs::create_directories(out);
  io::write_file(out / pipeline::kSweepFile, csv);
  std::cout << csv;
  return 0;
}

int cmd_synth(const Common& c, const std::string& spec_path, const fs::path& out, bool noiseless) {
  synth::ScenarioSpec spec = spec_path.empty() ? synth::default_spec() : synth::load_spec(spec_path);
  if (noiseless) spec = synth::noiseless(std::move(spec));
  if (c.seed) spec.rng_seed = *c.seed;
  auto bundle = synth::generate_scenario(spec);
  synth::write_bundle(bundle, out);
  io::write_file(out / "scenario.json", synth::spec_json(spec).dump(2) + "\n");
  std::cout << "wrote " << bundle.truth.cbgs.size() << " CBGs to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community risk and resilience archetypes from disaster-period activity data"};
  app.require_subcommand(1);
  Common common;

  std::string input, workspace, out, stage = "features", spec_path;
  int k_min = 2, k_max = 8;
  bool noiseless = false;

  auto* ingest_cmd = app.add_subcommand("ingest", "validate raw inputs into a workspace");
  add_common(ingest_cmd, common);
  ingest_cmd->add_option("--input", input, "directory with the raw input files")->required();
  ingest_cmd->add_option("--workspace", workspace, "workspace directory to populate")
      ->envname("RESILIENCE_WORKSPACE")
      ->required();

  auto* run_cmd = app.add_subcommand("run", "features, indices, clusters and reports");
  add_common(run_cmd, common);
  run_cmd->add_option("--workspace", workspace)->envname("RESILIENCE_WORKSPACE")->required();
  run_cmd->add_option("--out", out)->envname("RESILIENCE_OUT")->required();
  run_cmd->add_option("--stage", stage, "first stage to run: features, cluster or report")
      ->check(CLI::IsMember({"features", "cluster", "report"}));

  auto* sweep_cmd = app.add_subcommand("sweep-k", "inertia and silhouette for a range of k");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--workspace", workspace)->envname("RESILIENCE_WORKSPACE")->required();
  sweep_cmd->add_option("--out", out)->envname("RESILIENCE_OUT")->required();
  sweep_cmd->add_option("--k-min", k_min);
  sweep_cmd->add_option("--k-max", k_max);

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic input bundle with planted archetypes");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--spec", spec_path, "scenario spec (JSON); defaults to the built-in fixture");
  synth_cmd->add_option("--out", out)->envname("RESILIENCE_OUT")->required();
  synth_cmd->add_flag("--noiseless", noiseless, "set every spread to zero");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(common, input, workspace);
    if (*run_cmd) return cmd_run(common, workspace, out, stage);
    if (*sweep_cmd) return cmd_sweep(common, workspace, out, k_min, k_max);
    if (*synth_cmd) return cmd_synth(common, spec_path, out, noiseless);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InsufficientDataError& e) {
    std::cerr << "insufficient data: " << e.what() << "\n";
    return kExitInsufficient;
  } catch (const InvariantViolation& e) {
    std::cerr << "internal invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}
