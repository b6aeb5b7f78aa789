#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "solarcast/dataset.hpp"
#include "solarcast/harness.hpp"
#include "solarcast/metrics.hpp"
#include "solarcast/synth.hpp"

namespace solarcast {

/// Everything a pipeline run needs, with paths already resolved.
struct RunConfig {
  std::filesystem::path config_path;  // empty when built in code
  nlohmann::json raw;                 // the configuration as given

  std::filesystem::path out = "out";
  std::uint64_t seed = 0;
  int workers = 1;

  // Input data; the synth stage writes here.
  std::filesystem::path data_dir;
  DataPaths data;
  std::filesystem::path grid_path;

  SynthParams synth;
  std::filesystem::path synth_grid;  // grid used by the generator

  int kmeans_restarts = 10;
  int kmeans_iterations = 100;
  std::vector<ModelConfiguration> configurations;

  std::optional<GeoCoordinate> refloc;  // empty: centroid of the grid
  int solar_offset_minutes = 0;
  HourRange hours;
  std::vector<Date> outliers;

  int n_trees = 600;
  int candidates = 25;
  std::map<Method, std::vector<ParamRange>> ranges;  // overrides of the defaults
  WindowSpec validation = standard_validation_spec();
  WindowSpec test = standard_test_spec();
  McsOptions mcs;

  std::vector<std::string> explain;  // configuration ids; empty = all
  std::size_t shap_rows_per_month = 0;

  /// Seed of a named stage, derived from the master seed.
  std::uint64_t stage_seed(std::string_view stage) const;
};

/// Parses a configuration. Relative paths resolve against `base_dir`.
/// Throws ValidationError on unknown or ill-typed keys.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Keeps only the configurations whose ids are listed; unknown ids throw.
void restrict_configurations(RunConfig& config, const std::vector<std::string>& ids);

// Stages. Each reads its upstream artifacts from `config.out`, writes its own
// and records timing in out/manifest.json. Missing upstream artifacts raise
// IngestionError.
void cmd_synth(const RunConfig& config);
void cmd_cluster(const RunConfig& config);
void cmd_prepare(const RunConfig& config);
void cmd_tune(const RunConfig& config);
void cmd_backtest(const RunConfig& config);
/// `inputs` empty: the backtest CSV of every configuration.
void cmd_evaluate(const RunConfig& config, const std::vector<std::filesystem::path>& inputs = {});
void cmd_explain(const RunConfig& config);

/// Runs the named stage; "all" runs every stage from cluster to explain.
void run_command(const std::string& name, const RunConfig& config);

// Artifact locations under `out`.
std::filesystem::path selection_path(const RunConfig& c, SelectionMode mode, int k);
std::filesystem::path prepared_dir(const RunConfig& c, const ModelConfiguration& m);
std::filesystem::path tuned_path(const RunConfig& c, const ModelConfiguration& m);
std::filesystem::path backtest_path(const RunConfig& c, const ModelConfiguration& m);
std::filesystem::path model_path(const RunConfig& c, const ModelConfiguration& m);
std::filesystem::path shap_dir(const RunConfig& c, const ModelConfiguration& m);

extern const char* const kVersion;

}  // namespace solarcast
