#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "solarcast/dataset.hpp"
#include "solarcast/geo.hpp"

namespace solarcast {

/// Parameters of the synthetic generator.
///
/// Generation at time t is IC_t times the capacity-weighted sum over cells of
///   min(eff * cs(reference zenith) / 1000 * tau_c * thermal_c, ac_limit)
/// with tau_c = 1 - 0.75 TCC_c^3.4 the cloud transmission and thermal_c the
/// temperature derating. Weights favour northern cells. SNR and SSD follow
/// the local clear-sky curve times tau_c; RH and WCI are independent decoys.
struct SynthParams {
  Date start = make_date(2019, 1, 1);
  int days = 548;
  std::uint64_t seed = 0;
  double noise = 1.0;        // scale of every noise term; 0 = none
  bool clouds = true;        // false: TCC = 0 everywhere
  double temp_coeff = -0.004;  // relative output change per kelvin above 298.15 K
  double efficiency = 0.85;
  double ac_limit = 0.55;   // per-cell inverter clipping of the load factor
  double ic_start = 3369.0;
  double ic_end = 7593.0;
  GeoCoordinate refloc{4.64, 50.65};
};

nlohmann::json to_json(const SynthParams& p);
SynthParams synth_params_from_json(const nlohmann::json& j);

struct SynthDataset {
  ObservationTable table;
  SpatialGrid grid;
  nlohmann::json truth;  // generative relevance per variable
};

/// Belgian wall-clock offset (minutes) at a UTC instant, EU summer-time rule.
int belgian_offset_minutes(std::chrono::sys_seconds utc);

/// Clear-sky irradiance (W m^-2) used by the generator.
double clear_sky_irradiance(double zenith_deg);

SynthDataset synthesize(const SpatialGrid& grid, const SynthParams& params);

/// Writes asg.csv, capacity.csv, meteo.csv, grid.csv and truth.json into `dir`.
void write_dataset(const SynthDataset& data, const std::filesystem::path& dir);

}  // namespace solarcast
