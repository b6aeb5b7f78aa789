#include "solarcast/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "solarcast/csv.hpp"
#include "solarcast/error.hpp"
#include "solarcast/solarpos.hpp"

namespace solarcast {

namespace {

constexpr std::array<MetVariable, 1> kSetA = {MetVariable::SNR};

Timestamp read_timestamp(const CsvReader& csv, std::size_t col) {
  try {
    return parse_timestamp(csv.field(col));
  } catch (const ValidationError& e) {
    csv.fail(col, e.what());
  }
}

}  // namespace

std::string_view variable_name(MetVariable v) {
  switch (v) {
    case MetVariable::SNR: return "SNR";
    case MetVariable::SSD: return "SSD";
    case MetVariable::T2m: return "T2m";
    case MetVariable::RH: return "RH";
    case MetVariable::WCI: return "WCI";
    case MetVariable::TCC: return "TCC";
  }
  return "?";
}

MetVariable parse_variable(std::string_view name) {
  for (auto v : kAllVariables)
    if (variable_name(v) == name) return v;
  throw ValidationError("unknown meteorological variable '" + std::string(name) + "'");
}

const Eigen::VectorXd& ObservationTable::series(int cell, MetVariable v) const {
  auto it = meteo.find({cell, v});
  if (it == meteo.end())
    throw ValidationError("missing series " + std::string(variable_name(v)) + " for cell " +
                          std::to_string(cell));
  return it->second;
}

ObservationTable ObservationTable::select(std::span<const std::size_t> rows) const {
  ObservationTable out;
  out.capacity = capacity;
  out.timestamps.reserve(rows.size());
  out.asg.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.timestamps.push_back(timestamps.at(rows[i]));
    out.asg[static_cast<Eigen::Index>(i)] = asg[static_cast<Eigen::Index>(rows[i])];
  }
  for (const auto& [key, s] : meteo) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = s[static_cast<Eigen::Index>(rows[i])];
    out.meteo.emplace(key, std::move(v));
  }
  return out;
}

ObservationTable load_csv(const DataPaths& paths, const CsvSchema& schema) {
  ObservationTable table;

  // Target series.
  {
    CsvReader csv(paths.asg);
    const auto ct = csv.column(schema.timestamp);
    const auto ca = csv.column(schema.asg);
    std::vector<std::pair<Timestamp, double>> rows;
    while (csv.next()) {
      const Timestamp t = read_timestamp(csv, ct);
      const double v = csv.number(ca);
      if (v < 0.0) csv.fail(ca, "ASG must be non-negative, got " + format_number(v));
      rows.emplace_back(t, v);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].first == rows[i - 1].first)
        throw IngestionError(paths.asg.string() + ": duplicate timestamp " +
                             format_timestamp(rows[i].first));
      if (rows[i].first.local_date() == rows[i - 1].first.local_date() &&
          rows[i].first.utc - rows[i - 1].first.utc != std::chrono::hours(1))
        throw IngestionError(paths.asg.string() + ": non-hourly spacing before " +
                             format_timestamp(rows[i].first));
    }
    table.timestamps.reserve(rows.size());
    table.asg.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      table.timestamps.push_back(rows[i].first);
      table.asg[static_cast<Eigen::Index>(i)] = rows[i].second;
    }
  }

  // Capacity anchors.
  {
    CsvReader csv(paths.capacity);
    const auto ct = csv.column(schema.timestamp);
    const auto cc = csv.column(schema.capacity);
    while (csv.next()) {
      const Timestamp t = read_timestamp(csv, ct);
      const double v = csv.number(cc);
      if (v <= 0.0) csv.fail(cc, "installed capacity must be positive");
      table.capacity.push_back({t, v});
    }
    std::stable_sort(table.capacity.begin(), table.capacity.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < table.capacity.size(); ++i)
      if (table.capacity[i].t == table.capacity[i - 1].t)
        throw IngestionError(paths.capacity.string() + ": duplicate timestamp " +
                             format_timestamp(table.capacity[i].t));
  }

  // Meteorology, long format.
  {
    std::unordered_map<std::int64_t, Eigen::Index> row_of;
    row_of.reserve(table.timestamps.size());
    for (std::size_t i = 0; i < table.timestamps.size(); ++i)
      row_of.emplace(table.timestamps[i].unix_seconds(), static_cast<Eigen::Index>(i));

    CsvReader csv(paths.meteo);
    const auto ct = csv.column(schema.timestamp);
    const auto cid = csv.column(schema.cell_id);
    const auto cvar = csv.column(schema.variable);
    const auto cval = csv.column(schema.value);
    const Eigen::Index n = table.rows();
    std::map<std::pair<int, MetVariable>, std::vector<bool>> seen;
    while (csv.next()) {
      const Timestamp t = read_timestamp(csv, ct);
      const int cell = static_cast<int>(csv.integer(cid));
      MetVariable var{};
      try {
        var = parse_variable(csv.field(cvar));
      } catch (const ValidationError& e) {
        csv.fail(cvar, e.what());
      }
      const double v = csv.number(cval);
      if (var == MetVariable::RH && (v < 0.0 || v > 100.0))
        csv.fail(cval, "RH must lie in [0, 100], got " + format_number(v));
      if (var == MetVariable::TCC && (v < 0.0 || v > 1.0))
        csv.fail(cval, "TCC must lie in [0, 1], got " + format_number(v));
      auto it = row_of.find(t.unix_seconds());
      if (it == row_of.end())
        csv.fail(ct, "timestamp " + format_timestamp(t) + " is absent from the ASG series");
      auto key = std::make_pair(cell, var);
      auto [sit, fresh] = table.meteo.try_emplace(key, Eigen::VectorXd::Zero(n));
      auto& mask = seen[key];
      if (fresh) mask.assign(static_cast<std::size_t>(n), false);
      const auto r = static_cast<std::size_t>(it->second);
      if (mask[r]) csv.fail(ct, "duplicate timestamp for this cell and variable");
      mask[r] = true;
      sit->second[it->second] = v;
    }
    for (const auto& [key, mask] : seen) {
      auto gap = std::find(mask.begin(), mask.end(), false);
      if (gap != mask.end())
        throw IngestionError(paths.meteo.string() + ": series " +
                             std::string(variable_name(key.second)) + " of cell " +
                             std::to_string(key.first) + " has no value at " +
                             format_timestamp(table.timestamps[gap - mask.begin()]));
    }
  }
  return table;
}

SpatialGrid load_grid(const std::filesystem::path& path, const CsvSchema& schema) {
  CsvReader csv(path);
  const auto cid = csv.column(schema.cell_id);
  const auto clon = csv.column(schema.lon);
  const auto clat = csv.column(schema.lat);
  SpatialGrid grid;
  while (csv.next()) {
    GridCell c{static_cast<int>(csv.integer(cid)), {csv.number(clon), csv.number(clat)}};
    try {
      c.coord.validate();
    } catch (const ValidationError& e) {
      csv.fail(clat, e.what());
    }
    grid.cells.push_back(c);
  }
  try {
    grid.validate();
  } catch (const ValidationError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
  return grid;
}

double CapacityCurve::at(const Timestamp& t) const {
  auto it = std::lower_bound(timeline.begin(), timeline.end(), t);
  if (it == timeline.end() || !(*it == t))
    throw ValidationError("timestamp " + format_timestamp(t) + " is not on the capacity curve");
  return ic[it - timeline.begin()];
}

CapacityCurve interpolate_capacity(std::vector<CapacityAnchor> anchors,
                                   std::span<const Timestamp> timeline) {
  if (anchors.size() < 2) throw ValidationError("capacity interpolation needs at least 2 anchors");
  std::stable_sort(anchors.begin(), anchors.end(),
                   [](const auto& a, const auto& b) { return a.t < b.t; });
  CapacityCurve curve;
  curve.timeline.assign(timeline.begin(), timeline.end());
  curve.ic.resize(static_cast<Eigen::Index>(timeline.size()));
  std::size_t seg = 0;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    const Timestamp& t = timeline[i];
    double v = 0.0;
    if (t <= anchors.front().t) {
      v = anchors.front().mw;
    } else if (t >= anchors.back().t) {
      v = anchors.back().mw;
    } else {
      if (i == 0 || t < timeline[i - 1]) seg = 0;
      while (anchors[seg + 1].t < t) ++seg;
      const auto& a = anchors[seg];
      const auto& b = anchors[seg + 1];
      const double span = static_cast<double>((b.t.utc - a.t.utc).count());
      const double w = span > 0.0 ? static_cast<double>((t.utc - a.t.utc).count()) / span : 1.0;
      v = t == b.t ? b.mw : a.mw + w * (b.mw - a.mw);
    }
    curve.ic[static_cast<Eigen::Index>(i)] = v;
  }
  return curve;
}

Eigen::VectorXd make_load_factor(const ObservationTable& table, const CapacityCurve& cap) {
  if (cap.ic.size() != table.asg.size())
    throw ValidationError("capacity curve and table have different lengths");
  if ((cap.ic.array() <= 0.0).any())
    throw ComputationError("installed capacity must be strictly positive on the timeline");
  return (table.asg.array() / cap.ic.array()).matrix();
}

double denormalize_forecast(double lf, const CapacityCurve& cap, const Timestamp& t) {
  return std::max(lf, 0.0) * cap.at(t);
}

std::vector<std::size_t> rows_in_hours(std::span<const Timestamp> timestamps, HourRange keep) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < timestamps.size(); ++i)
    if (keep.contains(timestamps[i].local_hour())) rows.push_back(i);
  return rows;
}

ObservationTable filter_hours(const ObservationTable& table, HourRange keep) {
  return table.select(rows_in_hours(table.timestamps, keep));
}

std::array<double, 24> expand_to_24h(std::span<const int> hours, std::span<const double> values) {
  if (hours.size() != values.size())
    throw ValidationError("expand_to_24h: hours and values differ in length");
  std::array<double, 24> day{};
  for (std::size_t i = 0; i < hours.size(); ++i) {
    if (hours[i] < 0 || hours[i] > 23) throw ValidationError("hour out of range");
    day[static_cast<std::size_t>(hours[i])] = values[i];
  }
  return day;
}

std::array<double, 24> expand_to_24h(std::span<const double> values, HourRange keep) {
  if (static_cast<int>(values.size()) != keep.count())
    throw ValidationError("expand_to_24h: expected " + std::to_string(keep.count()) +
                          " forecasts, got " + std::to_string(values.size()));
  std::vector<int> hours(values.size());
  std::iota(hours.begin(), hours.end(), keep.first);
  return expand_to_24h(hours, values);
}

std::vector<std::size_t> rows_excluding_days(std::span<const Timestamp> timestamps,
                                             std::span<const Date> days) {
  const std::set<Date> drop(days.begin(), days.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < timestamps.size(); ++i)
    if (!drop.count(timestamps[i].local_date())) rows.push_back(i);
  return rows;
}

ObservationTable exclude_outlier_days(const ObservationTable& table, std::span<const Date> days) {
  return table.select(rows_excluding_days(table.timestamps, days));
}

std::span<const MetVariable> feature_variables(FeatureSet set) {
  if (set == FeatureSet::a) return kSetA;
  return kAllVariables;
}

FeatureSet parse_feature_set(std::string_view tag) {
  if (tag == "a") return FeatureSet::a;
  if (tag == "b") return FeatureSet::b;
  throw ValidationError("unknown feature set '" + std::string(tag) + "' (expected a or b)");
}

std::string_view feature_set_name(FeatureSet set) { return set == FeatureSet::a ? "a" : "b"; }

std::string FeatureInfo::name() const {
  switch (kind) {
    case Kind::zenith: return "zenith";
    case Kind::azimuth: return "azimuth";
    case Kind::meteo: break;
  }
  return std::string(variable_name(variable)) + "@" +
         (location < 0 ? std::string("avg") : std::to_string(location));
}

std::vector<std::string> FeatureMatrix::names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) out.push_back(c.name());
  return out;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out;
  out.columns = columns;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  out.timestamps.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
    out.timestamps.push_back(timestamps.at(rows[i]));
  }
  return out;
}

AssembledData assemble_features(const ObservationTable& table, const GridSelection& selection,
                                FeatureSet set, const GeoCoordinate& refloc,
                                const AssemblyOptions& options) {
  const auto vars = feature_variables(set);
  const Eigen::Index n = table.rows();
  const bool average = selection.mode == SelectionMode::average;
  const std::vector<int> locations = selection.location_ids();
  if (locations.empty()) throw ValidationError("grid selection has no cells");

  const Eigen::Index n_loc = average ? 1 : static_cast<Eigen::Index>(locations.size());
  const Eigen::Index n_cols = n_loc * static_cast<Eigen::Index>(vars.size()) + 2;

  AssembledData out;
  FeatureMatrix& fm = out.features;
  fm.values.resize(n, n_cols);
  fm.timestamps = table.timestamps;

  auto need = [&](int cell, MetVariable v) -> const Eigen::VectorXd& {
    if (!table.has_series(cell, v))
      throw ValidationError("feature assembly: no " + std::string(variable_name(v)) +
                            " series for cell " + std::to_string(cell));
    return table.series(cell, v);
  };

  Eigen::Index col = 0;
  if (average) {
    for (auto v : vars) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
      for (int cell : locations) acc += need(cell, v);
      fm.values.col(col++) = acc / static_cast<double>(locations.size());
      fm.columns.push_back({FeatureInfo::Kind::meteo, v, -1});
    }
  } else {
    for (int cell : locations) {
      for (auto v : vars) {
        fm.values.col(col++) = need(cell, v);
        fm.columns.push_back({FeatureInfo::Kind::meteo, v, cell});
      }
    }
  }

  const auto shift = std::chrono::minutes(options.solar_offset_minutes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = table.timestamps[static_cast<std::size_t>(i)];
    const SolarPosition sp = solar_position(t + shift, refloc);
    fm.values(i, col) = sp.zenith;
    fm.values(i, col + 1) = sp.azimuth;
  }
  fm.columns.push_back({FeatureInfo::Kind::zenith, MetVariable::SNR, -1});
  fm.columns.push_back({FeatureInfo::Kind::azimuth, MetVariable::SNR, -1});

  out.capacity = interpolate_capacity(table.capacity, table.timestamps);
  out.target = make_load_factor(table, out.capacity);
  return out;
}

}  // namespace solarcast
