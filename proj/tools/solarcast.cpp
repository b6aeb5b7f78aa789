// Command-line entry point: solarcast <command> [options]

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <nlohmann/json.hpp>

#include "solarcast/error.hpp"
#include "solarcast/pipeline.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kComputation = 1;
constexpr int kInput = 2;

std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Day-ahead solar generation forecasting pipeline"};
  app.set_version_flag("--version", solarcast::kVersion);
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::string out;
  std::string only;
  long long seed = -1;
  int workers = 0;
  std::vector<std::string> inputs;

  app.add_option("-c,--config", config_path,
                 "JSON configuration (default: $SOLARCAST_CONFIG, then ./solarcast.json)");
  app.add_option("--seed", seed, "master seed, overrides the config")->check(CLI::NonNegativeNumber);
  app.add_option("--workers", workers, "worker threads, overrides the config")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory, overrides the config");
  app.add_option("--only", only, "comma-separated configuration ids to run");

  const std::pair<const char*, const char*> commands[] = {
      {"synth", "generate a synthetic dataset"},
      {"cluster", "select representative grid cells"},
      {"prepare", "assemble feature and target tables"},
      {"tune", "Latin hypercube search over the validation windows"},
      {"backtest", "rolling day-ahead test forecasts"},
      {"evaluate", "metrics table and model confidence sets"},
      {"explain", "monthly SHAP attributions"},
      {"all", "cluster through explain"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (std::string(name) == "evaluate")
      sub->add_option("inputs", inputs, "backtest CSVs (default: every configuration)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (config_path.empty()) {
      const char* env = std::getenv("SOLARCAST_CONFIG");
      config_path = env && *env ? env : "solarcast.json";
    }
    nlohmann::json raw;
    solarcast::RunConfig config = solarcast::load_run_config(config_path);
    // Flag overrides are applied to the raw JSON so derived paths and seeds follow.
    raw = config.raw;
    if (!out.empty()) raw["out"] = std::filesystem::absolute(out).string();
    if (seed >= 0) raw["seed"] = static_cast<std::uint64_t>(seed);
    if (workers > 0) raw["workers"] = workers;
    if (raw != config.raw) {
      const auto path = config.config_path;
      config = solarcast::parse_run_config(raw, path.parent_path());
      config.config_path = path;
    }
    if (!only.empty()) solarcast::restrict_configurations(config, split_ids(only));

    std::vector<std::filesystem::path> files(inputs.begin(), inputs.end());
    if (command == "evaluate") solarcast::cmd_evaluate(config, files);
    else solarcast::run_command(command, config);
    return kOk;
  } catch (const solarcast::ComputationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kComputation;
  } catch (const solarcast::ExplainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kComputation;
  } catch (const solarcast::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const solarcast::IngestionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const solarcast::PlanningError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const solarcast::OutOfRangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: configuration: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kComputation;
  }
}
