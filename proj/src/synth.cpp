#include "solarcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "solarcast/csv.hpp"
#include "solarcast/error.hpp"
#include "solarcast/parallel.hpp"
#include "solarcast/solarpos.hpp"

namespace solarcast {

namespace {

using namespace std::chrono;

constexpr int kCloudModes = 10;
constexpr double kCloudScaleKm = 80.0;
constexpr double kCloudPersistence = 0.95;

sys_seconds last_sunday_0100_utc(int year, unsigned month) {
  const sys_days last{year_month_day_last{std::chrono::year{year}, month_day_last{std::chrono::month{month}}}};
  const weekday wd{last};
  const sys_days sunday = last - (wd - Sunday);
  return sunday + hours{1};
}

struct Ar1 {
  double phi;
  double value = 0.0;
  double step(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> z(0.0, 1.0);
    value = phi * value + std::sqrt(1.0 - phi * phi) * z(rng) * scale;
    return value;
  }
};

}  // namespace

int belgian_offset_minutes(sys_seconds utc) {
  const int y = static_cast<int>(year_month_day{floor<days>(utc)}.year());
  const bool summer = utc >= last_sunday_0100_utc(y, 3) && utc < last_sunday_0100_utc(y, 10);
  return summer ? 120 : 60;
}

double clear_sky_irradiance(double zenith_deg) {
  const double c = std::cos(zenith_deg * std::numbers::pi / 180.0);
  return c > 0.0 ? 1000.0 * std::pow(c, 1.2) : 0.0;
}

nlohmann::json to_json(const SynthParams& p) {
  return {{"start", format_date(p.start)},       {"days", p.days},
          {"seed", p.seed},                      {"noise", p.noise},
          {"clouds", p.clouds},                  {"temp_coeff", p.temp_coeff},
          {"efficiency", p.efficiency},          {"ic_start", p.ic_start},
          {"ic_end", p.ic_end},                  {"ac_limit", p.ac_limit},
          {"refloc", {p.refloc.lon, p.refloc.lat}}};
}

SynthParams synth_params_from_json(const nlohmann::json& j) {
  SynthParams p;
  if (j.contains("start")) p.start = parse_date(j.at("start").get<std::string>());
  p.days = j.value("days", p.days);
  p.seed = j.value("seed", p.seed);
  p.noise = j.value("noise", p.noise);
  p.clouds = j.value("clouds", p.clouds);
  p.temp_coeff = j.value("temp_coeff", p.temp_coeff);
  p.efficiency = j.value("efficiency", p.efficiency);
  p.ic_start = j.value("ic_start", p.ic_start);
  p.ic_end = j.value("ic_end", p.ic_end);
  p.ac_limit = j.value("ac_limit", p.ac_limit);
  if (j.contains("refloc")) {
    const auto& r = j.at("refloc");
    p.refloc = GeoCoordinate::checked(r.at(0).get<double>(), r.at(1).get<double>());
  }
  return p;
}

SynthDataset synthesize(const SpatialGrid& grid, const SynthParams& params) {
  grid.validate();
  params.refloc.validate();
  if (params.days < 1) throw ValidationError("synth needs days >= 1");
  if (!(params.noise >= 0.0)) throw ValidationError("synth noise must be >= 0");
  if (!(params.ic_start > 0.0 && params.ic_end > 0.0))
    throw ValidationError("synth capacity endpoints must be positive");

  SynthDataset out;
  out.grid = grid;
  ObservationTable& table = out.table;
  const auto& cells = grid.cells;
  const std::size_t nc = cells.size();

  // Hour-start instants covering the local days [start, start + days).
  const Date end = params.start + days(params.days);
  {
    sys_seconds t = sys_seconds{params.start} - minutes(belgian_offset_minutes(sys_seconds{params.start}));
    for (;;) {
      const Timestamp ts = Timestamp::from_utc(t, belgian_offset_minutes(t));
      if (ts.local_date() >= end) break;
      if (ts.local_date() >= params.start) table.timestamps.push_back(ts);
      t += hours(1);
    }
  }
  const std::size_t n = table.timestamps.size();
  const auto ni = static_cast<Eigen::Index>(n);

  std::mt19937_64 rng(derive_seed(params.seed, 0));
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // Capacity weights favouring the north, with a little jitter.
  double lat_mid = 0.0;
  for (const auto& c : cells) lat_mid += c.coord.lat / static_cast<double>(nc);
  std::vector<double> weight(nc);
  double wsum = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    weight[c] = std::exp(1.5 * (cells[c].coord.lat - lat_mid)) * (1.0 + 0.2 * params.noise * u(rng));
    wsum += weight[c];
  }
  for (auto& w : weight) w /= wsum;

  // Cloud field: smooth bumps driven by AR(1) amplitudes.
  double lon_lo = 1e9, lon_hi = -1e9, lat_lo = 1e9, lat_hi = -1e9;
  for (const auto& c : cells) {
    lon_lo = std::min(lon_lo, c.coord.lon);
    lon_hi = std::max(lon_hi, c.coord.lon);
    lat_lo = std::min(lat_lo, c.coord.lat);
    lat_hi = std::max(lat_hi, c.coord.lat);
  }
  std::vector<GeoCoordinate> centres(kCloudModes);
  for (auto& g : centres)
    g = {lon_lo - 0.5 + u(rng) * (lon_hi - lon_lo + 1.0), lat_lo - 0.3 + u(rng) * (lat_hi - lat_lo + 0.6)};
  Eigen::MatrixXd load(static_cast<Eigen::Index>(nc), kCloudModes);
  for (std::size_t c = 0; c < nc; ++c) {
    for (int b = 0; b < kCloudModes; ++b) {
      const double d = haversine_distance(cells[c].coord, centres[static_cast<std::size_t>(b)]);
      load(static_cast<Eigen::Index>(c), b) = std::exp(-0.5 * d * d / (kCloudScaleKm * kCloudScaleKm));
    }
    const double norm = load.row(static_cast<Eigen::Index>(c)).norm();
    if (norm > 0.0) load.row(static_cast<Eigen::Index>(c)) /= norm;
  }

  std::vector<Ar1> modes(kCloudModes, Ar1{kCloudPersistence});
  std::vector<Ar1> local_cloud(nc, Ar1{0.8});
  std::vector<Ar1> rh(nc, Ar1{0.97}), wci(nc, Ar1{0.98}), temp(nc, Ar1{0.97});

  std::map<MetVariable, Eigen::MatrixXd> met;
  for (MetVariable v : kAllVariables) met[v] = Eigen::MatrixXd(ni, static_cast<Eigen::Index>(nc));
  table.asg.resize(ni);

  const double ic_span = static_cast<double>(params.days);
  auto ic_at = [&](const Timestamp& t) {
    const double frac = std::clamp(
        static_cast<double>((t.local_seconds() - sys_seconds{params.start}).count()) / 86400.0 / ic_span,
        0.0, 1.0);
    return params.ic_start + frac * (params.ic_end - params.ic_start);
  };

  Eigen::VectorXd amp(kCloudModes);
  for (std::size_t i = 0; i < n; ++i) {
    const Timestamp& t = table.timestamps[i];
    const auto ii = static_cast<Eigen::Index>(i);
    for (int b = 0; b < kCloudModes; ++b) amp[b] = modes[static_cast<std::size_t>(b)].step(rng, 1.0);
    const double doy = static_cast<double>((t.local_date() - make_date(civil_year(t.local_date()), 1, 1)).count());
    const double season = -std::cos(2.0 * std::numbers::pi * (doy + 10.0) / 365.25);
    const double hour = t.local_hour();
    const double diurnal = -std::cos(2.0 * std::numbers::pi * (hour - 3.0) / 24.0);
    const double cs_ref = clear_sky_irradiance(solar_position(t, params.refloc).zenith);

    double lf = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto cc = static_cast<Eigen::Index>(c);
      const double cs = clear_sky_irradiance(solar_position(t, cells[c].coord).zenith);
      double tcc = 0.0;
      if (params.clouds) {
        const double field = load.row(cc).dot(amp) + 0.5 * local_cloud[c].step(rng, 1.0);
        tcc = 1.0 / (1.0 + std::exp(-(1.6 * field + 0.4)));
      }
      const double tau = 1.0 - 0.75 * std::pow(tcc, 3.4);
      const double kelvin = 283.15 + 8.0 * season + 4.0 * diurnal +
                            0.6 * (lat_mid - cells[c].coord.lat) +
                            1.5 * params.noise * temp[c].step(rng, 1.0);
      const double snr = 0.8 * cs * tau * 3600.0 * (1.0 + 0.02 * params.noise * z(rng));
      const double ssd = cs * tau * 3600.0 * (1.0 + 0.10 * params.noise * z(rng));
      met[MetVariable::SNR](ii, cc) = std::max(snr, 0.0);
      met[MetVariable::SSD](ii, cc) = std::max(ssd, 0.0);
      met[MetVariable::T2m](ii, cc) = kelvin;
      met[MetVariable::TCC](ii, cc) = tcc;
      met[MetVariable::RH](ii, cc) =
          std::clamp(75.0 + 12.0 * std::max(params.noise, 0.05) * rh[c].step(rng, 1.0), 0.0, 100.0);
      met[MetVariable::WCI](ii, cc) = 5.0 + 4.0 * std::max(params.noise, 0.05) * wci[c].step(rng, 1.0);
      const double dc = params.efficiency * cs_ref / 1000.0 * tau *
                        (1.0 + params.temp_coeff * (kelvin - 298.15));
      lf += weight[c] * std::min(dc, params.ac_limit);
    }
    const double gen = ic_at(t) * lf * (1.0 + 0.03 * params.noise * z(rng));
    table.asg[ii] = std::max(gen, 0.0);
  }

  // Monthly capacity anchors at local midnight, plus one past the end.
  for (Date d = first_of_month(params.start);; d = first_of_month(d + days(32))) {
    const Date anchor = std::max(d, params.start);
    const sys_seconds utc_guess = sys_seconds{anchor} - hours(1);
    const int off = belgian_offset_minutes(utc_guess);
    const Timestamp t = Timestamp::from_utc(sys_seconds{anchor} - minutes(off), off);
    table.capacity.push_back({t, ic_at(t)});
    if (d >= end) break;
  }

  for (std::size_t c = 0; c < nc; ++c)
    for (MetVariable v : kAllVariables)
      table.meteo[{cells[c].id, v}] = met[v].col(static_cast<Eigen::Index>(c));

  out.truth = {
      {"generator", to_json(params)},
      {"relevance",
       {{"SNR", 1.0}, {"SSD", 1.0}, {"TCC", 1.0}, {"T2m", params.temp_coeff == 0.0 ? 0.0 : 0.1},
        {"RH", 0.0}, {"WCI", 0.0}}},
      {"decoys", {"RH", "WCI"}},
      {"driver", "SNR"},
  };
  nlohmann::json w = nlohmann::json::object();
  for (std::size_t c = 0; c < nc; ++c) w[std::to_string(cells[c].id)] = weight[c];
  out.truth["capacity_weights"] = w;
  return out;
}

void write_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw IngestionError("cannot write '" + (dir / name).string() + "'");
    return f;
  };
  const auto& t = data.table;
  std::vector<std::string> stamps;
  stamps.reserve(t.timestamps.size());
  for (const auto& ts : t.timestamps) stamps.push_back(format_timestamp(ts));
  {
    auto f = open("asg.csv");
    f << "timestamp,asg_mw\n";
    for (std::size_t i = 0; i < stamps.size(); ++i)
      f << stamps[i] << ',' << format_number(t.asg[static_cast<Eigen::Index>(i)]) << '\n';
  }
  {
    auto f = open("capacity.csv");
    f << "timestamp,ic_mw\n";
    for (const auto& a : t.capacity) f << format_timestamp(a.t) << ',' << format_number(a.mw) << '\n';
  }
  {
    auto f = open("meteo.csv");
    f << "timestamp,cell_id,variable,value\n";
    for (std::size_t i = 0; i < stamps.size(); ++i)
      for (const auto& cell : data.grid.cells)
        for (MetVariable v : kAllVariables)
          f << stamps[i] << ',' << cell.id << ',' << variable_name(v) << ','
            << format_number(t.series(cell.id, v)[static_cast<Eigen::Index>(i)]) << '\n';
  }
  {
    auto f = open("grid.csv");
    f << "cell_id,lon,lat\n";
    for (const auto& c : data.grid.cells)
      f << c.id << ',' << format_number(c.coord.lon) << ',' << format_number(c.coord.lat) << '\n';
  }
  {
    auto f = open("truth.json");
    f << data.truth.dump(2) << '\n';
  }
}

}  // namespace solarcast
